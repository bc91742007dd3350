"""Tidy CSV in and out.

Export writes the grid exactly as stored: header = display names in column
order, rows in created-time order, minimal standard quoting, CRLF line ends,
UTF-8 without BOM unless asked. Import is the inverse and exists so the CSV
path can be round-tripped; it never touches created time (a fresh one is
assigned, file order preserved). Inference builds a workable schema from a
bare CSV for people starting from a spreadsheet.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from datetime import date, datetime
from typing import Callable

from .errors import ValidationError
from .ids import new_id
from .records import Record, RecordStore
from .schema import (
    CellValue,
    FieldKind,
    FieldSpec,
    Option,
    TableSpec,
    add_option,
    find_option,
    format_real,
    make_field,
    parse_date_text,
    parse_integer_text,
    parse_real_text,
    parse_timestamp_text,
    validate_cell,
)

DATETIME_FORMATS = ("iso", "table1")


@dataclass(frozen=True)
class ExportConfig:
    datetime_format: str = "iso"
    multi_value_joiner: str = "; "
    line_ending: str = "\r\n"
    include_header: bool = True
    bom: bool = False

    def __post_init__(self):
        if not self.multi_value_joiner:
            raise ValidationError("empty-joiner", "multi-value joiner must not be empty")
        if self.datetime_format not in DATETIME_FORMATS:
            raise ValidationError("unknown-datetime-format", f"datetime format must be one of {DATETIME_FORMATS}")


def format_timestamp(value: datetime, fmt: str) -> str:
    if fmt == "table1":
        # month/day/year hour:minute, 12-hour clock, lowercase am/pm,
        # no leading zeros on month/day/hour.
        hour = value.hour % 12 or 12
        meridiem = "am" if value.hour < 12 else "pm"
        return f"{value.month}/{value.day}/{value.year} {hour}:{value.minute:02d}{meridiem}"
    return value.isoformat(sep=" ")


def format_date(value: date, fmt: str) -> str:
    if fmt == "table1":
        return f"{value.month}/{value.day}/{value.year}"
    return value.isoformat()


def format_cell(spec: FieldSpec, cell: CellValue | None, config: ExportConfig) -> str:
    if cell is None or cell.is_empty:
        return ""
    if cell.kind == "date":
        return format_date(cell.value, config.datetime_format)
    if cell.kind == "timestamp":
        return format_timestamp(cell.value, config.datetime_format)
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
        return config.multi_value_joiner.join(labels)
    return str(cell.value)


def export_csv(table: TableSpec, records: list[Record], config: ExportConfig | None = None) -> bytes:
    config = config or ExportConfig()
    out = io.StringIO()
    writer = csv.writer(out, lineterminator=config.line_ending, quoting=csv.QUOTE_MINIMAL)
    if config.include_header:
        writer.writerow([f.name for f in table.fields])
    for record in sorted(records, key=lambda r: (r.created_time, r.seq)):
        row = []
        for spec in table.fields:
            if spec.kind == FieldKind.CREATED_TIME:
                row.append(format_timestamp(record.created_time, config.datetime_format))
            else:
                row.append(format_cell(spec, record.cells.get(spec.field_id), config))
        writer.writerow(row)
    data = out.getvalue().encode("utf-8")
    if config.bom:
        data = b"\xef\xbb\xbf" + data
    return data


@dataclass
class ImportResult:
    inserted: int
    errors: list[tuple[int, str, str]]  # (data row number, field name, error code)


@dataclass
class ImportPlan:
    columns: list[FieldSpec | None]  # None marks the ignored created-time column
    new_options: list[tuple[str, Option]]
    rows: list[dict[str, CellValue]]  # by field id; only valid rows in lenient mode
    errors: list[tuple[int, str, str]]


def _decode(data: bytes) -> str:
    if data.startswith(b"\xef\xbb\xbf"):
        data = data[3:]
    return data.decode("utf-8")


def plan_import(
    table: TableSpec,
    data: bytes,
    mode: str = "strict",
    config: ExportConfig | None = None,
) -> ImportPlan:
    """Parse, match the header, and validate every row without mutating.

    In lenient mode unknown select labels become planned options (shared
    across rows); in strict mode they are row errors like any other.
    """
    if mode not in ("strict", "lenient"):
        raise ValidationError("bad-mode", f"import mode must be strict or lenient, got {mode!r}")
    config = config or ExportConfig()
    reader = csv.reader(io.StringIO(_decode(data), newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("empty-input", "no header row") from None

    expected_full = [f.name for f in table.fields]
    expected_user = [f.name for f in table.fields if f.kind != FieldKind.CREATED_TIME]
    if header == expected_full:
        columns: list[FieldSpec | None] = [
            None if f.kind == FieldKind.CREATED_TIME else f for f in table.fields
        ]
    elif header == expected_user:
        columns = [f for f in table.fields if f.kind != FieldKind.CREATED_TIME]
    else:
        raise ValidationError(
            "header-mismatch",
            f"header {header!r} does not match table columns {expected_full!r}",
        )

    # Scratch copies of select fields so planned options apply to later rows
    # but nothing real changes until the caller commits.
    scratch: dict[str, FieldSpec] = {}

    def effective(spec: FieldSpec) -> FieldSpec:
        found = scratch.get(spec.field_id)
        if found is None:
            found = FieldSpec(
                field_id=spec.field_id,
                name=spec.name,
                kind=spec.kind,
                unit_label=spec.unit_label,
                options=list(spec.options) if spec.options is not None else None,
            )
            scratch[spec.field_id] = found
        return found

    new_options: list[tuple[str, Option]] = []
    rows: list[dict[str, CellValue]] = []
    errors: list[tuple[int, str, str]] = []

    for row_number, raw_row in enumerate(reader, start=1):
        if len(raw_row) != len(columns):
            errors.append((row_number, "", "row-width-mismatch"))
            continue
        cells: dict[str, CellValue] = {}
        row_errors: list[tuple[int, str, str]] = []
        pending: list[tuple[str, Option]] = []
        for spec, text in zip(columns, raw_row):
            if spec is None:
                continue  # created-time values coming back in are ignored
            live = effective(spec)
            raw: object = text
            if spec.kind == FieldKind.MULTI_SELECT:
                raw = [part for part in text.split(config.multi_value_joiner) if part.strip()]
            if mode == "lenient" and spec.kind in (FieldKind.SINGLE_SELECT, FieldKind.MULTI_SELECT):
                labels = raw if isinstance(raw, list) else ([raw] if str(raw).strip() else [])
                for label in labels:
                    if find_option(live, str(label)) is None:
                        option = add_option(live, str(label))
                        pending.append((spec.field_id, option))
            try:
                value = validate_cell(live, raw)
            except ValidationError as err:
                row_errors.append((row_number, spec.name, err.code))
                continue
            if not value.is_empty:
                cells[spec.field_id] = value
        if row_errors:
            errors.extend(row_errors)
        else:
            new_options.extend(pending)
            rows.append(cells)

    return ImportPlan(columns=columns, new_options=new_options, rows=rows, errors=errors)


def import_csv(
    table: TableSpec,
    store: RecordStore,
    data: bytes,
    mode: str = "strict",
    config: ExportConfig | None = None,
    now: Callable[[], datetime] = datetime.now,
) -> ImportResult:
    """Apply an import plan directly to a store (the in-process path; the
    service wraps plan_import with journaling instead)."""
    plan = plan_import(table, data, mode=mode, config=config)
    if mode == "strict" and plan.errors:
        return ImportResult(inserted=0, errors=plan.errors)
    for field_id, option in plan.new_options:
        spec = table.field_by_id(field_id)
        if find_option(spec, option.label) is None:
            spec.options.append(option)
    for cells in plan.rows:
        store.apply_insert(store.prepare_insert(cells, now()))
    return ImportResult(inserted=len(plan.rows), errors=plan.errors)


# --- schema inference --------------------------------------------------------

_URL_RE = re.compile(r"^https?://\S+$")


def _all_parse(values: list[str], parser: Callable[[str], object]) -> bool:
    for v in values:
        try:
            parser(v)
        except (ValueError, ValidationError):
            return False
    return True


def _looks_select(values: list[str]) -> bool:
    """Select-worthy: few distinct values AND at least one repeat. A column
    where every value is unique (notes, descriptions) stays text."""
    distinct = {v.strip().casefold() for v in values}
    if len(distinct) >= len(values):
        return False
    return len(distinct) <= max(10, 0.2 * len(values))


def infer_schema(data: bytes, table_name: str = "Imported table") -> TableSpec:
    """Narrowest kind per column over its non-empty cells, in the fixed order
    integer, real, date, datetime, url, single-select, text."""
    reader = csv.reader(io.StringIO(_decode(data), newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("empty-input", "no header row") from None
    if not header or all(not h.strip() for h in header):
        raise ValidationError("empty-input", "no header row")
    trimmed = [h.strip() for h in header]
    seen: set[str] = set()
    for name in trimmed:
        if name in seen:
            raise ValidationError("duplicate-header", f"header {name!r} appears twice")
        seen.add(name)

    columns: list[list[str]] = [[] for _ in header]
    for row in reader:
        for i in range(len(header)):
            value = row[i] if i < len(row) else ""
            if value.strip():
                columns[i].append(value)

    table = TableSpec(table_id=new_id("tbl"), name=table_name)
    for name, values in zip(header, columns):
        kind = _infer_kind(values)
        option_labels: list[str] = []
        if kind == FieldKind.SINGLE_SELECT:
            for v in values:  # seed options in first-appearance order
                if not any(o.casefold() == v.strip().casefold() for o in option_labels):
                    option_labels.append(v.strip())
        table.fields.append(make_field(name, kind, option_labels=option_labels))

    ct_name = "created time"
    suffix = 2
    while any(f.name.strip() == ct_name for f in table.fields):
        ct_name = f"created time {suffix}"
        suffix += 1
    table.fields.append(make_field(ct_name, FieldKind.CREATED_TIME))
    return table


def _infer_kind(values: list[str]) -> FieldKind:
    if not values:
        return FieldKind.SHORT_TEXT
    if _all_parse(values, parse_integer_text):
        return FieldKind.INTEGER
    if _all_parse(values, parse_real_text):
        return FieldKind.REAL
    if _all_parse(values, parse_date_text):
        return FieldKind.DATE
    if _all_parse(values, parse_timestamp_text):
        return FieldKind.DATETIME
    if all(_URL_RE.match(v.strip()) for v in values):
        return FieldKind.URL
    if _looks_select(values):
        return FieldKind.SINGLE_SELECT
    if any("\n" in v for v in values):
        return FieldKind.LONG_TEXT
    return FieldKind.SHORT_TEXT
