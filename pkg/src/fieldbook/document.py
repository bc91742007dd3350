"""Canonical document (de)serialization for bases and their parts.

Key names here are the stable on-disk and on-wire contract; golden tests pin
them. Arrays keep definition order (field order, option order, entry order),
which is meaningful everywhere in the system.
"""

from __future__ import annotations

import json
from datetime import datetime

from .access import FormToken, Grant, Role
from .forms import FormField, FormSpec, FormView, VisibilityRule
from .schema import Base, FieldKind, FieldSpec, Option, TableSpec


def canonical_json(doc) -> str:
    """One-line canonical rendering: sorted object keys, tight separators."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def option_to_doc(option: Option) -> dict:
    return {
        "id": option.option_id,
        "label": option.label,
        "last_used_at": option.last_used_at.isoformat() if option.last_used_at else None,
        "last_used_seq": option.last_used_seq,
    }


def option_from_doc(doc: dict) -> Option:
    return Option(
        option_id=doc["id"],
        label=doc["label"],
        last_used_at=datetime.fromisoformat(doc["last_used_at"]) if doc.get("last_used_at") else None,
        last_used_seq=doc.get("last_used_seq"),
    )


def field_to_doc(spec: FieldSpec) -> dict:
    doc = {
        "id": spec.field_id,
        "name": spec.name,
        "kind": spec.kind.value,
        "unit_label": spec.unit_label,
    }
    if spec.options is not None:
        doc["options"] = [option_to_doc(o) for o in spec.options]
    return doc


def field_from_doc(doc: dict) -> FieldSpec:
    options = None
    if "options" in doc:
        options = [option_from_doc(o) for o in doc["options"]]
    return FieldSpec(
        field_id=doc["id"],
        name=doc["name"],
        kind=FieldKind(doc["kind"]),
        unit_label=doc.get("unit_label"),
        options=options,
    )


def table_to_doc(table: TableSpec) -> dict:
    return {
        "id": table.table_id,
        "name": table.name,
        "fields": [field_to_doc(f) for f in table.fields],
    }


def table_from_doc(doc: dict) -> TableSpec:
    return TableSpec(
        table_id=doc["id"],
        name=doc["name"],
        fields=[field_from_doc(f) for f in doc["fields"]],
    )


def visibility_to_doc(rule: VisibilityRule) -> dict:
    doc = {"kind": rule.kind}
    if rule.field_id is not None:
        doc["field_id"] = rule.field_id
    if rule.option_ids:
        doc["option_ids"] = list(rule.option_ids)
    return doc


def visibility_from_doc(doc: dict) -> VisibilityRule:
    return VisibilityRule(
        kind=doc.get("kind", "always"),
        field_id=doc.get("field_id"),
        option_ids=tuple(doc.get("option_ids", ())),
    )


def form_field_to_doc(entry: FormField) -> dict:
    return {
        "field_id": entry.field_id,
        "prompt": entry.prompt,
        "required": entry.required,
        "visibility": visibility_to_doc(entry.visibility),
        "allow_add_option": entry.allow_add_option,
    }


def form_field_from_doc(doc: dict) -> FormField:
    return FormField(
        field_id=doc["field_id"],
        prompt=doc.get("prompt"),
        required=doc.get("required", False),
        visibility=visibility_from_doc(doc.get("visibility", {"kind": "always"})),
        allow_add_option=doc.get("allow_add_option", False),
    )


def form_to_doc(form: FormSpec) -> dict:
    return {
        "id": form.form_id,
        "table_id": form.table_id,
        "title": form.title,
        "description": form.description,
        "entries": [form_field_to_doc(e) for e in form.entries],
    }


def form_from_doc(doc: dict) -> FormSpec:
    return FormSpec(
        form_id=doc["id"],
        table_id=doc["table_id"],
        title=doc["title"],
        description=doc.get("description", ""),
        entries=[form_field_from_doc(e) for e in doc["entries"]],
    )


def grant_to_doc(grant: Grant) -> dict:
    return {"principal_id": grant.principal_id, "role": grant.role.value}


def grant_from_doc(doc: dict) -> Grant:
    return Grant(principal_id=doc["principal_id"], role=Role(doc["role"]))


def token_to_doc(token: FormToken) -> dict:
    return {"token": token.token, "form_id": token.form_id, "revoked": token.revoked}


def token_from_doc(doc: dict) -> FormToken:
    return FormToken(token=doc["token"], form_id=doc["form_id"], revoked=doc.get("revoked", False))


def base_to_doc(base: Base) -> dict:
    return {
        "id": base.base_id,
        "name": base.name,
        "tables": [table_to_doc(t) for t in base.tables],
        "forms": [form_to_doc(f) for f in base.forms],
        "grants": [grant_to_doc(g) for g in base.grants],
        "form_tokens": [token_to_doc(t) for t in base.form_tokens],
        "mru_seq": base.mru_seq,
    }


def base_from_doc(doc: dict) -> Base:
    return Base(
        base_id=doc["id"],
        name=doc["name"],
        tables=[table_from_doc(t) for t in doc["tables"]],
        forms=[form_from_doc(f) for f in doc["forms"]],
        grants=[grant_from_doc(g) for g in doc["grants"]],
        form_tokens=[token_from_doc(t) for t in doc.get("form_tokens", ())],
        mru_seq=doc.get("mru_seq", 0),
    )


def form_view_to_doc(view: FormView) -> dict:
    return {
        "form_id": view.form_id,
        "title": view.title,
        "description": view.description,
        "entries": [
            {
                "field_id": e.field_id,
                "prompt": e.prompt,
                "required": e.required,
                "kind": e.kind,
                "unit_label": e.unit_label,
                "options": [{"id": oid, "label": label} for oid, label in e.options] if e.options is not None else None,
                "allow_add_option": e.allow_add_option,
            }
            for e in view.entries
        ],
    }
