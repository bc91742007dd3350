"""Built-in base templates.

The four templates ship as plain JSON base-definition documents next to this
module; instantiating one deep-copies the definition with fresh ids, an empty
grid, blank most-recently-used state, and the caller as owner. Everything a
template sets up is ordinary schema afterwards and can be customized freely.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources

from .access import Grant, Role
from .document import base_from_doc
from .errors import NotFoundError, ValidationError
from .forms import lint_form
from .ids import new_id
from .schema import Base, FieldKind

TEMPLATE_IDS = ("field-records", "hort-activity", "fsma", "marketing-delivery")


@dataclass(frozen=True)
class Template:
    template_id: str
    title: str
    description: str
    blurb: str
    definition: dict  # tables + forms, documented key layout


def _load(template_id: str) -> Template:
    path = resources.files(__package__) / "templates" / f"{template_id}.json"
    doc = json.loads(path.read_text("utf-8"))
    return Template(
        template_id=doc["template_id"],
        title=doc["title"],
        description=doc["description"],
        blurb=doc["blurb"],
        definition={"tables": doc["tables"], "forms": doc["forms"]},
    )


def list_templates() -> list[Template]:
    return [_load(tid) for tid in TEMPLATE_IDS]


def get_template(template_id: str) -> Template:
    if template_id not in TEMPLATE_IDS:
        raise NotFoundError("unknown-template", f"no template {template_id!r}")
    return _load(template_id)


def template_to_doc(tpl: Template) -> dict:
    return {
        "template_id": tpl.template_id,
        "title": tpl.title,
        "description": tpl.description,
        "blurb": tpl.blurb,
    }


def instantiate(template_id: str, base_name: str, owner: str) -> Base:
    """A fresh base from a template: new ids everywhere, zero records, blank
    MRU state, one owner grant."""
    tpl = get_template(template_id)
    if not base_name.strip():
        raise ValidationError("empty-name", "base name must not be empty")

    definition = copy.deepcopy(tpl.definition)
    idmap: dict[str, str] = {}

    def remap(old: str, prefix: str) -> str:
        if old not in idmap:
            idmap[old] = new_id(prefix)
        return idmap[old]

    for table in definition["tables"]:
        table["id"] = remap(table["id"], "tbl")
        for field in table["fields"]:
            field["id"] = remap(field["id"], "fld")
            for option in field.get("options", ()):
                option["id"] = remap(option["id"], "opt")
                option["last_used_at"] = None
                option["last_used_seq"] = None
    for form in definition["forms"]:
        form["id"] = remap(form["id"], "frm")
        form["table_id"] = idmap[form["table_id"]]
        for entry in form["entries"]:
            entry["field_id"] = idmap[entry["field_id"]]
            rule = entry.get("visibility") or {}
            if rule.get("field_id"):
                rule["field_id"] = idmap[rule["field_id"]]
            if rule.get("option_ids"):
                rule["option_ids"] = [idmap[o] for o in rule["option_ids"]]

    base = base_from_doc(
        {
            "id": new_id("bas"),
            "name": base_name,
            "tables": definition["tables"],
            "forms": definition["forms"],
            "grants": [],
            "form_tokens": [],
            "mru_seq": 0,
        }
    )
    base.grants.append(Grant(principal_id=owner, role=Role.OWNER))

    for table in base.tables:
        if sum(1 for f in table.fields if f.kind == FieldKind.CREATED_TIME) != 1:
            raise ValidationError("invalid-template", f"table {table.name!r} needs exactly one created-time field")
    for form in base.forms:
        issues = lint_form(form, base.resolve_table(form.table_id))
        if issues:
            raise ValidationError("invalid-template", f"form {form.title!r}: " + "; ".join(issues))
    return base


def undelivered_balances(contracts_table, contract_records, deliveries_table, delivery_records) -> list[dict]:
    """Contracted minus delivered quantity per contract id, for the marketing
    and delivery template's unmet-commitments view. Computed on read; the grid
    itself stays formula-free."""
    contract_id_field = contracts_table.resolve_field("Contract ID")
    contract_qty_field = contracts_table.resolve_field("Quantity (bu)")
    delivery_id_field = deliveries_table.resolve_field("Contract ID")
    delivery_qty_field = deliveries_table.resolve_field("Quantity (bu)")

    balances: dict[str, dict] = {}
    for record in contract_records:
        ref_cell = record.cells.get(contract_id_field.field_id)
        if ref_cell is None:
            continue
        ref = str(ref_cell.value)
        qty_cell = record.cells.get(contract_qty_field.field_id)
        entry = balances.setdefault(ref, {"contract_id": ref, "contracted": 0.0, "delivered": 0.0})
        entry["contracted"] += float(qty_cell.value) if qty_cell else 0.0
    for record in delivery_records:
        ref_cell = record.cells.get(delivery_id_field.field_id)
        if ref_cell is None:
            continue
        ref = str(ref_cell.value)
        qty_cell = record.cells.get(delivery_qty_field.field_id)
        entry = balances.setdefault(ref, {"contract_id": ref, "contracted": 0.0, "delivered": 0.0})
        entry["delivered"] += float(qty_cell.value) if qty_cell else 0.0
    out = []
    for ref in sorted(balances):
        entry = balances[ref]
        entry["balance"] = entry["contracted"] - entry["delivered"]
        out.append(entry)
    return out
