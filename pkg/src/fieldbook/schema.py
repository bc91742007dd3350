"""Typed tables and cell validation.

A table is an ordered list of typed fields; the column order is stable and is
also the CSV export order. ``validate_cell`` is the single gate between raw
user text and stored values: everything that reaches a record went through it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from datetime import date, datetime
from enum import Enum
from typing import Iterable
from urllib.parse import urlsplit

from .access import Grant, Role
from .errors import NotFoundError, ValidationError
from .ids import new_id


class FieldKind(str, Enum):
    DATE = "date"
    DATETIME = "datetime"  # user-writable timestamp (created-time is auto-only)
    CREATED_TIME = "created-time"
    SHORT_TEXT = "short-text"
    LONG_TEXT = "long-text"
    INTEGER = "integer"
    REAL = "real"
    URL = "url"
    SINGLE_SELECT = "single-select"
    MULTI_SELECT = "multi-select"
    ATTACHMENT_REF = "attachment-ref"


SELECT_KINDS = frozenset({FieldKind.SINGLE_SELECT, FieldKind.MULTI_SELECT})
TEXTUAL_KINDS = frozenset(
    {FieldKind.SHORT_TEXT, FieldKind.LONG_TEXT, FieldKind.URL, FieldKind.ATTACHMENT_REF}
)
NUMERIC_KINDS = frozenset({FieldKind.INTEGER, FieldKind.REAL})

# Which CellValue tag each field kind stores.
CELL_KIND_FOR_FIELD = {
    FieldKind.DATE: "date",
    FieldKind.DATETIME: "timestamp",
    FieldKind.CREATED_TIME: "timestamp",
    FieldKind.SHORT_TEXT: "text",
    FieldKind.LONG_TEXT: "text",
    FieldKind.INTEGER: "integer",
    FieldKind.REAL: "real",
    FieldKind.URL: "url",
    FieldKind.SINGLE_SELECT: "option-ref",
    FieldKind.MULTI_SELECT: "option-ref-list",
    FieldKind.ATTACHMENT_REF: "attachment-ref",
}


@dataclass(frozen=True)
class CellValue:
    """Tagged union of everything a cell can hold. Immutable and shareable."""

    kind: str
    value: object = None

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty"


EMPTY = CellValue("empty")


@dataclass
class Option:
    option_id: str
    label: str
    last_used_at: datetime | None = None
    # Total order behind the timestamp: two uses in the same clock tick must
    # still have a well-defined "more recent".
    last_used_seq: int | None = None


@dataclass
class FieldSpec:
    field_id: str
    name: str
    kind: FieldKind
    unit_label: str | None = None
    options: list[Option] | None = None  # present iff kind is a select


@dataclass
class TableSpec:
    table_id: str
    name: str
    fields: list[FieldSpec] = dc_field(default_factory=list)

    def field_by_id(self, field_id: str) -> FieldSpec | None:
        for f in self.fields:
            if f.field_id == field_id:
                return f
        return None

    def resolve_field(self, ref: str) -> FieldSpec:
        """Accept a field id or a display name; names are unique per table."""
        spec = self.field_by_id(ref)
        if spec is None:
            for f in self.fields:
                if f.name == ref:
                    spec = f
                    break
        if spec is None:
            raise NotFoundError("unknown-field", f"no field {ref!r} in table {self.name!r}", field=ref)
        return spec

    def created_time_field(self) -> FieldSpec:
        for f in self.fields:
            if f.kind == FieldKind.CREATED_TIME:
                return f
        raise ValidationError("missing-created-time", f"table {self.name!r} has no created-time field")


@dataclass
class Base:
    base_id: str
    name: str
    tables: list[TableSpec] = dc_field(default_factory=list)
    forms: list = dc_field(default_factory=list)  # list[FormSpec]
    grants: list[Grant] = dc_field(default_factory=list)
    form_tokens: list = dc_field(default_factory=list)  # list[FormToken]
    mru_seq: int = 0  # monotone counter stamped on option use

    def table_by_id(self, table_id: str) -> TableSpec | None:
        for t in self.tables:
            if t.table_id == table_id:
                return t
        return None

    def resolve_table(self, ref: str) -> TableSpec:
        table = self.table_by_id(ref)
        if table is None:
            for t in self.tables:
                if t.name == ref:
                    table = t
                    break
        if table is None:
            raise NotFoundError("unknown-table", f"no table {ref!r} in base {self.name!r}")
        return table


def create_base(name: str, owner: str) -> Base:
    if not name.strip():
        raise ValidationError("empty-name", "base name must not be empty")
    return Base(
        base_id=new_id("bas"),
        name=name,
        grants=[Grant(principal_id=owner, role=Role.OWNER)],
    )


def make_field(
    name: str,
    kind: FieldKind | str,
    unit_label: str | None = None,
    option_labels: Iterable[str] = (),
    field_id: str | None = None,
) -> FieldSpec:
    kind = FieldKind(kind)
    if not name.strip():
        raise ValidationError("empty-name", "field name must not be empty")
    options: list[Option] | None = None
    if kind in SELECT_KINDS:
        options = []
    elif list(option_labels):
        raise ValidationError("options-on-non-select", f"field {name!r} is not a select field")
    spec = FieldSpec(
        field_id=field_id or new_id("fld"),
        name=name,
        kind=kind,
        unit_label=unit_label,
        options=options,
    )
    for label in option_labels:
        add_option(spec, label)
    return spec


def make_table(name: str, fields: Iterable[FieldSpec] = (), table_id: str | None = None) -> TableSpec:
    """New table; a created-time column is appended if none was given."""
    table = TableSpec(table_id=table_id or new_id("tbl"), name=name)
    for spec in fields:
        add_field(table, spec)
    if not any(f.kind == FieldKind.CREATED_TIME for f in table.fields):
        add_field(table, make_field("created time", FieldKind.CREATED_TIME))
    return table


def check_new_field(table: TableSpec, spec: FieldSpec) -> None:
    """All add_field preconditions, without mutating; lets callers journal the
    change before applying it."""
    name = spec.name.strip()
    if not name:
        raise ValidationError("empty-name", "field name must not be empty")
    if any(f.name.strip() == name for f in table.fields):
        raise ValidationError("duplicate-name", f"table already has a field named {spec.name!r}", field=spec.name)
    if spec.kind == FieldKind.CREATED_TIME and any(
        f.kind == FieldKind.CREATED_TIME for f in table.fields
    ):
        raise ValidationError(
            "second-created-time-field", "a table has exactly one created-time field", field=spec.name
        )
    if spec.options is not None and spec.kind not in SELECT_KINDS:
        raise ValidationError("options-on-non-select", f"field {spec.name!r} is not a select field", field=spec.name)


def add_field(table: TableSpec, spec: FieldSpec) -> TableSpec:
    check_new_field(table, spec)
    if spec.kind in SELECT_KINDS and spec.options is None:
        spec.options = []
    table.fields.append(spec)
    return table


def find_option(spec: FieldSpec, ref: str) -> Option | None:
    """Match an option by id, then by label (case-insensitive, trimmed)."""
    for opt in spec.options or ():
        if opt.option_id == ref:
            return opt
    wanted = ref.strip().casefold()
    for opt in spec.options or ():
        if opt.label.casefold() == wanted:
            return opt
    return None


def add_option(spec: FieldSpec, label: str) -> Option:
    """Append a fresh option; re-adding an existing label is a no-op that
    returns the existing entry (labels are unique case-insensitively)."""
    if spec.kind not in SELECT_KINDS:
        raise ValidationError("non-select-field", f"field {spec.name!r} has no option list", field=spec.name)
    label = label.strip()
    if not label:
        raise ValidationError("empty-label", "option label must not be empty", field=spec.name)
    existing = find_option(spec, label)
    if existing is not None:
        return existing
    option = Option(option_id=new_id("opt"), label=label)
    spec.options.append(option)
    return option


_INT_RE = re.compile(r"^[+-]?\d+$")
_REAL_RE = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$")
_US_DATE_RE = re.compile(r"^(\d{1,2})/(\d{1,2})/(\d{4})$")
_US_DATETIME_RE = re.compile(r"^(\d{1,2})/(\d{1,2})/(\d{4})\s+(\d{1,2}):(\d{2})\s*(am|pm)$", re.IGNORECASE)


def parse_integer_text(text: str) -> int:
    text = text.strip()
    if not _INT_RE.match(text):
        raise ValidationError("type-mismatch", f"cannot read {text!r} as a whole number")
    return int(text)


def parse_real_text(text: str) -> float:
    text = text.strip()
    if not _REAL_RE.match(text):
        raise ValidationError("type-mismatch", f"cannot read {text!r} as a number")
    return float(text)


def parse_date_text(text: str) -> date:
    """Accept ISO yyyy-mm-dd or US m/d/yyyy."""
    try:
        return date.fromisoformat(text)
    except ValueError:
        pass
    m = _US_DATE_RE.match(text)
    if m:
        try:
            return date(int(m.group(3)), int(m.group(1)), int(m.group(2)))
        except ValueError:
            pass
    raise ValidationError("malformed-date", f"cannot read {text!r} as a date")


def parse_timestamp_text(text: str) -> datetime:
    """Accept ISO date-times and the US m/d/yyyy h:mmam form."""
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        pass
    m = _US_DATETIME_RE.match(text)
    if m:
        month, day, year, hour, minute = (int(m.group(i)) for i in range(1, 6))
        meridiem = m.group(6).lower()
        if 1 <= hour <= 12:
            hour = hour % 12 + (12 if meridiem == "pm" else 0)
            try:
                return datetime(year, month, day, hour, minute)
            except ValueError:
                pass
    raise ValidationError("malformed-date", f"cannot read {text!r} as a date-time")


def validate_cell(spec: FieldSpec, raw) -> CellValue:
    """Turn raw form/CSV input into a typed cell value or raise.

    Empty (or whitespace-only) input is the empty cell. Select input may be an
    option id or an option label; multi-select accepts a list of those.
    """
    if spec.kind == FieldKind.CREATED_TIME:
        raise ValidationError(
            "client-set-created-time", "created time is assigned by the server", field=spec.name
        )

    if raw is None:
        return EMPTY
    if isinstance(raw, bool):
        raise ValidationError("type-mismatch", f"{spec.name!r} cannot take a boolean", field=spec.name)
    if isinstance(raw, (int, float)):
        raw = repr(raw)

    if spec.kind == FieldKind.MULTI_SELECT:
        if isinstance(raw, str):
            raw = [raw] if raw.strip() else []
        if not isinstance(raw, (list, tuple)):
            raise ValidationError("type-mismatch", f"{spec.name!r} takes a list of options", field=spec.name)
        refs: list[str] = []
        for item in raw:
            if not isinstance(item, str) or not item.strip():
                continue
            option = find_option(spec, item)
            if option is None:
                raise ValidationError("unknown-option", f"{spec.name!r} has no option {item!r}", field=spec.name)
            if option.option_id not in refs:
                refs.append(option.option_id)
        if not refs:
            return EMPTY
        return CellValue("option-ref-list", tuple(refs))

    if not isinstance(raw, str):
        raise ValidationError("type-mismatch", f"{spec.name!r} takes text input", field=spec.name)
    text = raw.strip()
    if not text:
        return EMPTY

    if spec.kind == FieldKind.SINGLE_SELECT:
        option = find_option(spec, raw)
        if option is None:
            raise ValidationError("unknown-option", f"{spec.name!r} has no option {raw!r}", field=spec.name)
        return CellValue("option-ref", option.option_id)
    if spec.kind == FieldKind.INTEGER:
        try:
            return CellValue("integer", parse_integer_text(text))
        except ValidationError:
            raise ValidationError(
                "type-mismatch", f"{spec.name!r} needs a whole number, got {raw!r}", field=spec.name
            ) from None
    if spec.kind == FieldKind.REAL:
        try:
            return CellValue("real", parse_real_text(text))
        except ValidationError:
            raise ValidationError(
                "type-mismatch", f"{spec.name!r} needs a number, got {raw!r}", field=spec.name
            ) from None
    if spec.kind == FieldKind.DATE:
        try:
            return CellValue("date", parse_date_text(text))
        except ValidationError as err:
            err.field = spec.name
            raise
    if spec.kind == FieldKind.DATETIME:
        try:
            return CellValue("timestamp", parse_timestamp_text(text))
        except ValidationError as err:
            err.field = spec.name
            raise
    if spec.kind == FieldKind.URL:
        parts = urlsplit(text)
        if parts.scheme not in ("http", "https") or not parts.netloc:
            raise ValidationError("malformed-url", f"{spec.name!r} needs an http(s) link, got {raw!r}", field=spec.name)
        return CellValue("url", text)
    if spec.kind == FieldKind.ATTACHMENT_REF:
        return CellValue("attachment-ref", text)
    # short-text / long-text store the input as typed, untrimmed
    return CellValue("text", raw)


def format_real(value: float) -> str:
    """Shortest round-tripping decimal; integral values drop the '.0'."""
    text = repr(value)
    return text[:-2] if text.endswith(".0") else text


def render_raw(spec: FieldSpec, cell: CellValue) -> str:
    """Canonical text form of a cell, re-parseable by validate_cell."""
    if cell.is_empty:
        return ""
    if cell.kind == "date":
        return cell.value.isoformat()
    if cell.kind == "timestamp":
        return cell.value.isoformat(sep=" ")
    if cell.kind == "integer":
        return str(cell.value)
    if cell.kind == "real":
        return format_real(cell.value)
    if cell.kind == "option-ref":
        option = find_option(spec, cell.value)
        return option.label if option else cell.value
    if cell.kind == "option-ref-list":
        labels = []
        for ref in cell.value:
            option = find_option(spec, ref)
            labels.append(option.label if option else ref)
        return "; ".join(labels)
    return str(cell.value)
