"""The tidy grid: one table's records, with filtering and sorting.

Records are observations; every cell went through validate_cell, so a full
table audit can re-check the grid is tidy at any time. created-time is
assigned by the server and ties are broken by a per-table sequence number,
making the insertion order total.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime
from typing import Mapping

from .errors import NotFoundError, ValidationError
from .ids import new_id
from .schema import (
    CellValue,
    FieldKind,
    FieldSpec,
    TableSpec,
    find_option,
    validate_cell,
)


@dataclass
class Record:
    record_id: str
    table_id: str
    cells: dict[str, CellValue]  # field-id -> value; empty cells are absent
    created_time: datetime
    seq: int


@dataclass
class Comment:
    """Append-only note a commenter can attach to a record."""

    comment_id: str
    record_id: str
    author: str
    text: str
    created_at: datetime


@dataclass(frozen=True)
class Filter:
    field: str  # id or display name
    op: str  # eq | contains | empty | notempty | gt | gte | lt | lte
    value: str | None = None


_NUMERIC_OPS = {"gt", "gte", "lt", "lte"}
_CONTAINS_KINDS = {
    FieldKind.SHORT_TEXT,
    FieldKind.LONG_TEXT,
    FieldKind.URL,
    FieldKind.ATTACHMENT_REF,
}


class RecordStore:
    """All mutations for one table funnel through a single writer (the owning
    engine holds the lock); reads work on plain lists and are safe."""

    def __init__(self, table: TableSpec):
        self.table = table
        self._records: dict[str, Record] = {}
        self._last_created: datetime | None = None
        self._next_seq = 1

    def __len__(self) -> int:
        return len(self._records)

    def get(self, record_id: str) -> Record:
        record = self._records.get(record_id)
        if record is None:
            raise NotFoundError("unknown-record", f"no record {record_id!r}")
        return record

    # -- validation ---------------------------------------------------------

    def validate_raw_cells(self, raw_cells: Mapping[str, object]) -> dict[str, CellValue]:
        """Resolve field refs and validate every raw value before any mutation."""
        cells: dict[str, CellValue] = {}
        for ref, raw in raw_cells.items():
            spec = self.table.resolve_field(ref)
            value = validate_cell(spec, raw)  # raises client-set-created-time for that column
            if not value.is_empty:
                cells[spec.field_id] = value
        return cells

    # -- mutation: prepare/apply pairs so the journal sees the final record --

    def prepare_insert(self, cells: dict[str, CellValue], now: datetime) -> Record:
        created = now if self._last_created is None else max(now, self._last_created)
        return Record(
            record_id=new_id("rec"),
            table_id=self.table.table_id,
            cells=dict(cells),
            created_time=created,
            seq=self._next_seq,
        )

    def apply_insert(self, record: Record) -> None:
        self._records[record.record_id] = record
        self._last_created = record.created_time
        self._next_seq = record.seq + 1

    def insert(self, raw_cells: Mapping[str, object], now: datetime) -> Record:
        record = self.prepare_insert(self.validate_raw_cells(raw_cells), now)
        self.apply_insert(record)
        return record

    def prepare_update(self, record_id: str, raw_cells: Mapping[str, object]) -> dict[str, CellValue]:
        self.get(record_id)
        updates: dict[str, CellValue] = {}
        for ref, raw in raw_cells.items():
            spec = self.table.resolve_field(ref)
            updates[spec.field_id] = validate_cell(spec, raw)
        return updates

    def apply_update(self, record_id: str, updates: Mapping[str, CellValue]) -> Record:
        record = self.get(record_id)
        for field_id, value in updates.items():
            if value.is_empty:
                record.cells.pop(field_id, None)
            else:
                record.cells[field_id] = value
        return record

    def update(self, record_id: str, raw_cells: Mapping[str, object]) -> Record:
        return self.apply_update(record_id, self.prepare_update(record_id, raw_cells))

    def delete(self, record_id: str) -> None:
        self.get(record_id)
        del self._records[record_id]

    # -- reads ---------------------------------------------------------------

    def all_records(self) -> list[Record]:
        return sorted(self._records.values(), key=lambda r: (r.created_time, r.seq))

    def query(
        self,
        filters: tuple[Filter, ...] | list[Filter] = (),
        sort: tuple[str, str] | None = None,
    ) -> list[Record]:
        matchers = [self._compile(f) for f in filters]
        rows = [r for r in self.all_records() if all(m(r) for m in matchers)]
        if sort is not None:
            field_ref, direction = sort
            if direction not in ("asc", "desc"):
                raise ValidationError("bad-sort", f"sort direction must be asc or desc, got {direction!r}")
            spec = self.table.resolve_field(field_ref)
            # Ascending puts empty cells first; descending reverses that. Ties
            # keep created-time order (stable sort over the pre-ordered rows).
            rows.sort(key=lambda r: self._sort_key(spec, r), reverse=(direction == "desc"))
        return rows

    def _sort_key(self, spec: FieldSpec, record: Record):
        if spec.kind == FieldKind.CREATED_TIME:
            return (1, record.created_time)
        cell = record.cells.get(spec.field_id)
        if cell is None:
            return (0, None)
        return (1, self._comparable(spec, cell))

    @staticmethod
    def _comparable(spec: FieldSpec, cell: CellValue):
        if cell.kind == "option-ref":
            option = find_option(spec, cell.value)
            return option.label if option else cell.value
        if cell.kind == "option-ref-list":
            labels = []
            for ref in cell.value:
                option = find_option(spec, ref)
                labels.append(option.label if option else ref)
            return "; ".join(labels)
        if cell.kind == "integer":
            return float(cell.value)
        return cell.value

    def _compile(self, filt: Filter):
        spec = self.table.resolve_field(filt.field)
        op = filt.op

        if op in ("empty", "notempty"):
            if spec.kind == FieldKind.CREATED_TIME:
                return (lambda r: False) if op == "empty" else (lambda r: True)
            want_empty = op == "empty"
            return lambda r: (spec.field_id not in r.cells) == want_empty

        if filt.value is None:
            raise ValidationError("predicate-kind-mismatch", f"filter {op!r} needs a value", field=spec.name)

        if op == "eq":
            return self._compile_eq(spec, filt.value)

        if op == "contains":
            if spec.kind not in _CONTAINS_KINDS:
                raise ValidationError(
                    "predicate-kind-mismatch", f"'contains' applies to text fields, not {spec.kind.value}", field=spec.name
                )
            needle = filt.value

            def contains(r: Record) -> bool:
                cell = r.cells.get(spec.field_id)
                return cell is not None and needle in str(cell.value)

            return contains

        if op in _NUMERIC_OPS:
            if spec.kind not in (FieldKind.INTEGER, FieldKind.REAL):
                raise ValidationError(
                    "predicate-kind-mismatch", f"numeric comparison needs a number column, not {spec.kind.value}", field=spec.name
                )
            try:
                bound = float(filt.value)
            except ValueError:
                raise ValidationError(
                    "predicate-kind-mismatch", f"cannot read {filt.value!r} as a number", field=spec.name
                ) from None

            def compare(r: Record) -> bool:
                cell = r.cells.get(spec.field_id)
                if cell is None:
                    return False
                having = float(cell.value)
                if op == "gt":
                    return having > bound
                if op == "gte":
                    return having >= bound
                if op == "lt":
                    return having < bound
                return having <= bound

            return compare

        raise ValidationError("predicate-kind-mismatch", f"unknown filter op {filt.op!r}", field=spec.name)

    def _compile_eq(self, spec: FieldSpec, value: str):
        if spec.kind == FieldKind.CREATED_TIME:
            from .schema import parse_timestamp_text

            wanted_ts = parse_timestamp_text(value)
            return lambda r: r.created_time == wanted_ts

        wanted = validate_cell(spec, value)

        def equals(r: Record) -> bool:
            cell = r.cells.get(spec.field_id)
            if cell is None:
                return wanted.is_empty
            if cell.kind == "option-ref-list":
                # equality against a multi-select matches any selected option
                return not wanted.is_empty and wanted.value[0] in cell.value
            return cell == wanted

        return equals

    # -- integrity ------------------------------------------------------------

    def audit(self) -> None:
        """Re-check the whole grid is tidy; raises on the first violation."""
        from .schema import CELL_KIND_FOR_FIELD

        for record in self._records.values():
            for field_id, cell in record.cells.items():
                spec = self.table.field_by_id(field_id)
                if spec is None:
                    raise ValidationError("unknown-field", f"record {record.record_id} has a stray cell {field_id!r}")
                if cell.is_empty:
                    raise ValidationError("type-mismatch", "empty cells must be absent, not stored")
                expected = CELL_KIND_FOR_FIELD[spec.kind]
                if cell.kind != expected:
                    raise ValidationError(
                        "type-mismatch",
                        f"cell {spec.name!r} of {record.record_id} holds {cell.kind}, column wants {expected}",
                    )
                if cell.kind == "option-ref" and find_option(spec, cell.value) is None:
                    raise ValidationError("unknown-option", f"dangling option ref in {spec.name!r}")
                if cell.kind == "option-ref-list":
                    for ref in cell.value:
                        if find_option(spec, ref) is None:
                            raise ValidationError("unknown-option", f"dangling option ref in {spec.name!r}")


def cell_to_doc(cell: CellValue) -> dict:
    value = cell.value
    if isinstance(value, datetime):
        value = value.isoformat()
    elif isinstance(value, date):
        value = value.isoformat()
    elif isinstance(value, tuple):
        value = list(value)
    return {"kind": cell.kind, "value": value}


def cell_from_doc(doc: dict) -> CellValue:
    kind = doc["kind"]
    value = doc["value"]
    if kind == "date":
        value = date.fromisoformat(value)
    elif kind == "timestamp":
        value = datetime.fromisoformat(value)
    elif kind == "option-ref-list":
        value = tuple(value)
    return CellValue(kind, value)


def record_to_doc(record: Record) -> dict:
    return {
        "id": record.record_id,
        "table_id": record.table_id,
        "cells": {fid: cell_to_doc(c) for fid, c in sorted(record.cells.items())},
        "created_time": record.created_time.isoformat(),
        "seq": record.seq,
    }


def record_from_doc(doc: dict) -> Record:
    return Record(
        record_id=doc["id"],
        table_id=doc["table_id"],
        cells={fid: cell_from_doc(c) for fid, c in doc["cells"].items()},
        created_time=datetime.fromisoformat(doc["created_time"]),
        seq=doc["seq"],
    )
