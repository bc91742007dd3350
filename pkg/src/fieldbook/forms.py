"""Entry forms: conditional visibility, required checks, MRU option ordering.

A form is an ordered, annotated view over one table. Visibility rules may only
look at single-select fields that appear earlier in the form, which rules out
cycles by construction; the linter enforces that whenever a form is saved.
Submissions are validated as a whole before anything mutates, so a rejected
submission leaves no trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Mapping

from .errors import ValidationError
from .ids import new_id
from .schema import (
    CellValue,
    FieldKind,
    FieldSpec,
    Option,
    TableSpec,
    add_option,
    find_option,
    validate_cell,
)

ALWAYS = "always"
WHEN_EQUALS = "when-equals"
WHEN_ONE_OF = "when-one-of"


@dataclass(frozen=True)
class VisibilityRule:
    kind: str = ALWAYS
    field_id: str | None = None
    option_ids: tuple[str, ...] = ()

    def matches(self, selected: str | None) -> bool:
        if self.kind == ALWAYS:
            return True
        if selected is None:
            return False
        return selected in self.option_ids


@dataclass
class FormField:
    field_id: str
    prompt: str | None = None
    required: bool = False
    visibility: VisibilityRule = VisibilityRule()
    allow_add_option: bool = False


@dataclass
class FormSpec:
    form_id: str
    table_id: str
    title: str
    description: str = ""
    entries: list[FormField] = dc_field(default_factory=list)

    def entry_for(self, field_id: str) -> FormField | None:
        for e in self.entries:
            if e.field_id == field_id:
                return e
        return None


@dataclass(frozen=True)
class FormViewField:
    field_id: str
    prompt: str
    required: bool
    kind: str
    unit_label: str | None
    options: tuple[tuple[str, str], ...] | None  # (option-id, label) in MRU order
    allow_add_option: bool


@dataclass(frozen=True)
class FormView:
    form_id: str
    title: str
    description: str
    entries: tuple[FormViewField, ...]


def make_form(
    table: TableSpec,
    title: str,
    entries: list[FormField],
    description: str = "",
    form_id: str | None = None,
) -> FormSpec:
    form = FormSpec(
        form_id=form_id or new_id("frm"),
        table_id=table.table_id,
        title=title,
        description=description,
        entries=entries,
    )
    issues = lint_form(form, table)
    if issues:
        raise ValidationError("invalid-form", "; ".join(issues))
    return form


def lint_form(form: FormSpec, table: TableSpec) -> list[str]:
    """Static checks run whenever a form is saved; empty list means clean."""
    issues: list[str] = []
    seen: set[str] = set()
    for position, entry in enumerate(form.entries):
        spec = table.field_by_id(entry.field_id)
        if spec is None:
            issues.append(f"entry {position} references unknown field {entry.field_id!r}")
            continue
        if spec.field_id in seen:
            issues.append(f"field {spec.name!r} appears twice")
        seen.add(spec.field_id)
        if spec.kind == FieldKind.CREATED_TIME:
            issues.append("created time never appears on a form")
        if entry.allow_add_option and spec.kind not in (FieldKind.SINGLE_SELECT, FieldKind.MULTI_SELECT):
            issues.append(f"add-option flag on non-select field {spec.name!r}")
        rule = entry.visibility
        if rule.kind == ALWAYS:
            continue
        if rule.kind not in (WHEN_EQUALS, WHEN_ONE_OF):
            issues.append(f"unknown visibility rule {rule.kind!r} on {spec.name!r}")
            continue
        controller = table.field_by_id(rule.field_id) if rule.field_id else None
        if controller is None:
            issues.append(f"visibility of {spec.name!r} references unknown field")
            continue
        if controller.kind != FieldKind.SINGLE_SELECT:
            issues.append(f"visibility of {spec.name!r} must key on a single-select field")
        earlier = [e.field_id for e in form.entries[:position]]
        if rule.field_id not in earlier:
            issues.append(f"visibility of {spec.name!r} must key on an earlier entry")
        for option_id in rule.option_ids:
            if controller.options is not None and not any(o.option_id == option_id for o in controller.options):
                issues.append(f"visibility of {spec.name!r} names a missing option")
    return issues


def _selected_option(spec: FieldSpec, raw) -> str | None:
    """Resolve a draft value for a controlling field; anything invalid is unset."""
    if raw is None:
        return None
    if isinstance(raw, (list, tuple)):
        return None
    try:
        cell = validate_cell(spec, raw)
    except ValidationError:
        return None
    return cell.value if cell.kind == "option-ref" else None


def visible_fields(form: FormSpec, table: TableSpec, draft: Mapping[str, object]) -> list[str]:
    """Field ids shown for this draft, in form order.

    A rule only fires when its controlling field is itself visible; values of
    hidden fields are treated as unset.
    """
    draft_by_id = _resolve_draft_keys(table, draft)
    visible: list[str] = []
    for entry in form.entries:
        rule = entry.visibility
        if rule.kind == ALWAYS:
            visible.append(entry.field_id)
            continue
        if rule.field_id not in visible:
            continue
        controller = table.field_by_id(rule.field_id)
        selected = _selected_option(controller, draft_by_id.get(rule.field_id))
        if rule.matches(selected):
            visible.append(entry.field_id)
    return visible


def _resolve_draft_keys(table: TableSpec, draft: Mapping[str, object]) -> dict[str, object]:
    resolved: dict[str, object] = {}
    for ref, raw in draft.items():
        try:
            spec = table.resolve_field(ref)
        except Exception:
            continue  # unknown draft keys cannot influence visibility
        resolved[spec.field_id] = raw
    return resolved


def mru_ordered(options: list[Option]) -> list[Option]:
    """Most recently used first; never-used options keep their original
    relative order. This is a permutation, never a filter."""
    indexed = list(enumerate(options))
    indexed.sort(key=lambda p: (-(p[1].last_used_seq if p[1].last_used_seq is not None else -1), p[0]))
    return [o for _, o in indexed]


def render_form(form: FormSpec, table: TableSpec, draft: Mapping[str, object] | None = None) -> FormView:
    draft = draft or {}
    shown = set(visible_fields(form, table, draft))
    entries = []
    for entry in form.entries:
        if entry.field_id not in shown:
            continue
        spec = table.field_by_id(entry.field_id)
        options = None
        if spec.options is not None:
            options = tuple((o.option_id, o.label) for o in mru_ordered(spec.options))
        entries.append(
            FormViewField(
                field_id=spec.field_id,
                prompt=entry.prompt or spec.name,
                required=entry.required,
                kind=spec.kind.value,
                unit_label=spec.unit_label,
                options=options,
                allow_add_option=entry.allow_add_option,
            )
        )
    return FormView(form_id=form.form_id, title=form.title, description=form.description, entries=tuple(entries))


def _is_blank(raw) -> bool:
    if raw is None:
        return True
    if isinstance(raw, str):
        return not raw.strip()
    if isinstance(raw, (list, tuple)):
        return all(_is_blank(item) for item in raw)
    return False


@dataclass
class PreparedSubmission:
    """Everything a submission will change, computed before any mutation."""

    cells: dict[str, CellValue]
    new_options: list[tuple[str, Option]]  # (field-id, option) actually novel
    used_options: list[tuple[str, str]]  # (field-id, option-id) referenced


def prepare_submission(
    form: FormSpec,
    table: TableSpec,
    answers: Mapping[str, object],
    new_options: list[tuple[str, str]] | None = None,
) -> PreparedSubmission:
    """Validate a submission without touching table state.

    New options are planned first (only where the form allows adding), then
    visibility is evaluated against the answers; answers for hidden fields are
    rejected rather than dropped, and required checks apply to visible fields
    only. Raises on the first problem in form order.
    """
    def resolve(ref: str) -> FieldSpec:
        try:
            return table.resolve_field(ref)
        except Exception:
            raise ValidationError("unknown-field", f"form's table has no field {ref!r}", field=ref) from None

    answers_by_id: dict[str, object] = {}
    for ref, raw in answers.items():
        spec = resolve(ref)
        if spec.kind == FieldKind.CREATED_TIME:
            raise ValidationError(
                "client-set-created-time", "created time is assigned by the server", field=spec.name
            )
        if form.entry_for(spec.field_id) is None and not _is_blank(raw):
            raise ValidationError(
                "hidden-field-answer", f"{spec.name!r} is not requested by this form", field=spec.name
            )
        answers_by_id[spec.field_id] = raw

    # Plan option additions against a scratch copy so a failing submission
    # leaves the real option lists untouched. The planned Option objects (ids
    # included) are the ones committed on success, so cell refs stay valid.
    planned: dict[str, FieldSpec] = {}
    novel: list[tuple[str, Option]] = []
    for ref, label in new_options or ():
        spec = resolve(ref)
        entry = form.entry_for(spec.field_id)
        if entry is None or not entry.allow_add_option:
            raise ValidationError("add-not-allowed", f"form does not allow adding options to {spec.name!r}", field=spec.name)
        scratch = planned.get(spec.field_id)
        if scratch is None:
            scratch = FieldSpec(
                field_id=spec.field_id,
                name=spec.name,
                kind=spec.kind,
                unit_label=spec.unit_label,
                options=list(spec.options or ()),
            )
            planned[spec.field_id] = scratch
        before = len(scratch.options)
        option = add_option(scratch, label)
        if len(scratch.options) > before:
            novel.append((spec.field_id, option))

    def effective(spec: FieldSpec) -> FieldSpec:
        return planned.get(spec.field_id, spec)

    # Visibility over the answers, with planned options in effect.
    visible: list[str] = []
    for entry in form.entries:
        rule = entry.visibility
        if rule.kind == ALWAYS:
            visible.append(entry.field_id)
            continue
        if rule.field_id in visible:
            controller = effective(table.field_by_id(rule.field_id))
            if rule.matches(_selected_option(controller, answers_by_id.get(rule.field_id))):
                visible.append(entry.field_id)
    shown = set(visible)

    for entry in form.entries:
        spec = table.field_by_id(entry.field_id)
        raw = answers_by_id.get(entry.field_id)
        if entry.field_id not in shown:
            if raw is not None and not _is_blank(raw):
                raise ValidationError(
                    "hidden-field-answer", f"{spec.name!r} is hidden for this submission", field=spec.name
                )
            continue
        if entry.required and _is_blank(raw):
            raise ValidationError("missing-required", f"{spec.name!r} is required", field=spec.name)

    cells: dict[str, CellValue] = {}
    used: list[tuple[str, str]] = []
    for entry in form.entries:
        raw = answers_by_id.get(entry.field_id)
        if entry.field_id not in shown or _is_blank(raw):
            continue
        spec = effective(table.field_by_id(entry.field_id))
        value = validate_cell(spec, raw)
        if value.is_empty:
            continue
        cells[entry.field_id] = value
        if value.kind == "option-ref":
            used.append((entry.field_id, value.value))
        elif value.kind == "option-ref-list":
            used.extend((entry.field_id, ref) for ref in value.value)

    return PreparedSubmission(cells=cells, new_options=novel, used_options=used)


def apply_new_options(table: TableSpec, new_options: list[tuple[str, Option]]) -> None:
    """Commit planned options to the live schema, keeping their planned ids."""
    for field_id, option in new_options:
        spec = table.field_by_id(field_id)
        if find_option(spec, option.label) is None:
            spec.options.append(option)


def stamp_options_used(table: TableSpec, used: list[tuple[str, str]], at, seq: int) -> None:
    """Mark options as just-used so the next render floats them to the top."""
    for field_id, option_id in used:
        spec = table.field_by_id(field_id)
        option = find_option(spec, option_id)
        if option is not None:
            option.last_used_at = at
            option.last_used_seq = seq
