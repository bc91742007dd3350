from __future__ import annotations

import copy
import random
from datetime import datetime

import pytest

from conftest import GOLDEN_CSV
from fieldbook.errors import ValidationError
from fieldbook.records import RecordStore
from fieldbook.schema import FieldKind, make_field, make_table
from fieldbook.tidycsv import ExportConfig, export_csv, format_cell, import_csv, infer_schema
from tablegen import fill_store, random_table

NOW = datetime(2022, 12, 20, 11, 35)
TABLE1 = ExportConfig(datetime_format="table1")


# -- a strict RFC-4180-style reference parser, independent of the csv module ----


def parse_strict_csv(data: bytes) -> list[list[str]]:
    """Grammar: records end with CRLF; fields separated by commas; a field is
    either quote-free (no comma, quote, CR, LF) or quoted with doubled quotes.
    Raises ValueError on anything else."""
    text = data.decode("utf-8")
    rows: list[list[str]] = []
    row: list[str] = []
    buf: list[str] = []
    i, n = 0, len(text)
    START, PLAIN, QUOTED, AFTER_QUOTE = range(4)
    state = START

    def end_field():
        row.append("".join(buf))
        buf.clear()

    def end_row():
        nonlocal row
        end_field()
        rows.append(row)
        row = []

    while i < n:
        ch = text[i]
        if state == START:
            if ch == '"':
                state = QUOTED
            elif ch == ",":
                end_field()
            elif ch == "\r":
                if i + 1 >= n or text[i + 1] != "\n":
                    raise ValueError("lone CR")
                end_row()
                i += 1
            elif ch == "\n":
                raise ValueError("LF without CR")
            else:
                buf.append(ch)
                state = PLAIN
        elif state == PLAIN:
            if ch == ",":
                end_field()
                state = START
            elif ch == "\r":
                if i + 1 >= n or text[i + 1] != "\n":
                    raise ValueError("lone CR")
                end_row()
                state = START
                i += 1
            elif ch in ('"', "\n"):
                raise ValueError(f"illegal {ch!r} in unquoted field")
            else:
                buf.append(ch)
        elif state == QUOTED:
            if ch == '"':
                state = AFTER_QUOTE
            else:
                buf.append(ch)
        else:  # AFTER_QUOTE
            if ch == '"':
                buf.append('"')
                state = QUOTED
            elif ch == ",":
                end_field()
                state = START
            elif ch == "\r":
                if i + 1 >= n or text[i + 1] != "\n":
                    raise ValueError("lone CR")
                end_row()
                state = START
                i += 1
            else:
                raise ValueError("garbage after closing quote")
        i += 1
    if state == QUOTED:
        raise ValueError("unterminated quote")
    if state in (PLAIN, AFTER_QUOTE) or buf or row:
        end_row()  # final record without trailing CRLF
    return rows


# -- export ----------------------------------------------------------------------


def test_export_first_fixture_row_matches_table1_pattern(loaded_hort):
    base, table, form, store = loaded_hort
    data = export_csv(table, store.all_records(), TABLE1)
    lines = data.decode("utf-8").split("\r\n")
    assert lines[1] == (
        "Purdue Pete,Bed 72,Tillage,40,left disc needs adjustment,"
        "12/20/2022 11:35am,Tractor 2 JD X120,bed shaper,,,,,"
    )


def test_export_matches_checked_in_golden_fixture(loaded_hort):
    base, table, form, store = loaded_hort
    data = export_csv(table, store.all_records(), TABLE1)
    assert data == GOLDEN_CSV.read_bytes()


def test_export_empty_table_is_header_only():
    table = make_table("T", [make_field("A", FieldKind.SHORT_TEXT)])
    data = export_csv(table, [], ExportConfig())
    assert data == b"A,created time\r\n"


def test_export_quotes_embedded_separators_and_doubles_quotes():
    table = make_table("T", [make_field("A", FieldKind.SHORT_TEXT)])
    store = RecordStore(table)
    store.insert({"A": 'a,b "c"'}, NOW)
    data = export_csv(table, store.all_records(), ExportConfig())
    assert data.split(b"\r\n")[1].startswith(b'"a,b ""c""",')


def test_export_bom_flag():
    table = make_table("T", [make_field("A", FieldKind.SHORT_TEXT)])
    data = export_csv(table, [], ExportConfig(bom=True))
    assert data.startswith(b"\xef\xbb\xbf")


def test_joiner_must_not_be_empty():
    with pytest.raises(ValidationError) as exc:
        ExportConfig(multi_value_joiner="")
    assert exc.value.code == "empty-joiner"


# -- import ----------------------------------------------------------------------


def test_round_trip_of_golden_fixture(loaded_hort):
    base, table, form, store = loaded_hort
    data = export_csv(table, store.all_records(), TABLE1)
    clone_table = copy.deepcopy(table)
    clone = RecordStore(clone_table)
    result = import_csv(clone_table, clone, data, mode="strict", config=TABLE1, now=lambda: NOW)
    assert (result.inserted, result.errors) == (7, [])
    for orig, back in zip(store.all_records(), clone.all_records()):
        assert orig.cells == back.cells


def test_import_strict_inserts_nothing_on_any_error(loaded_hort):
    base, table, form, store = loaded_hort
    data = export_csv(table, store.all_records(), TABLE1)
    broken = data.replace(b"12/20/2022 11:50am,human powered", b"12/20/2022 11:50am,human powered").replace(b"Harvest,30", b"Harvest,n/a")
    clone_table = copy.deepcopy(table)
    clone = RecordStore(clone_table)
    result = import_csv(clone_table, clone, broken, mode="strict", config=TABLE1)
    assert result.inserted == 0
    assert len(clone) == 0
    assert [(row, field) for row, field, _ in result.errors] == [(6, "Duration")]
    assert result.errors[0][2] == "type-mismatch"


def test_import_lenient_inserts_valid_rows_and_reports_rest(loaded_hort):
    base, table, form, store = loaded_hort
    data = export_csv(table, store.all_records(), TABLE1).replace(b"Harvest,30", b"Harvest,n/a")
    clone_table = copy.deepcopy(table)
    clone = RecordStore(clone_table)
    result = import_csv(clone_table, clone, data, mode="lenient", config=TABLE1)
    assert result.inserted == 6
    assert len(result.errors) == 1


def test_import_lenient_creates_unknown_options(loaded_hort):
    base, table, form, store = loaded_hort
    power = table.resolve_field("Power Unit")
    data = export_csv(table, store.all_records(), TABLE1).replace(b"human powered", b"Skid steer")
    clone_table = copy.deepcopy(table)
    before = len(clone_table.resolve_field("Power Unit").options)
    clone = RecordStore(clone_table)
    result = import_csv(clone_table, clone, data, mode="lenient", config=TABLE1)
    assert (result.inserted, result.errors) == (7, [])
    after = [o.label for o in clone_table.resolve_field("Power Unit").options]
    assert len(after) == before + 1
    assert "Skid steer" in after


def test_import_strict_rejects_unknown_option(loaded_hort):
    base, table, form, store = loaded_hort
    data = export_csv(table, store.all_records(), TABLE1).replace(b"human powered", b"Skid steer")
    clone_table = copy.deepcopy(table)
    clone = RecordStore(clone_table)
    result = import_csv(clone_table, clone, data, mode="strict", config=TABLE1)
    assert result.inserted == 0
    assert ("unknown-option" in {code for _, _, code in result.errors})


def test_import_header_mismatch(loaded_hort):
    base, table, form, store = loaded_hort
    with pytest.raises(ValidationError) as exc:
        import_csv(table, RecordStore(table), b"Nope,Nah\r\n1,2\r\n")
    assert exc.value.code == "header-mismatch"


def test_import_without_created_time_column():
    table = make_table("T", [make_field("A", FieldKind.SHORT_TEXT)])
    store = RecordStore(table)
    result = import_csv(table, store, b"A\r\nhello\r\n", now=lambda: NOW)
    assert result.inserted == 1
    assert store.all_records()[0].created_time == NOW


# -- inference ---------------------------------------------------------------------


def test_infer_schema_on_table1_fixture():
    table = infer_schema(GOLDEN_CSV.read_bytes())
    kinds = {f.name: f.kind for f in table.fields}
    # oracle: the classification rule applied by hand to each fixture column
    assert kinds["Duration"] == FieldKind.INTEGER
    assert kinds["Seeding Rate (seeds/ac)"] == FieldKind.INTEGER
    assert kinds["created time"] == FieldKind.DATETIME
    for name in ("Who", "Where", "What", "Power Unit"):
        assert kinds[name] == FieldKind.SINGLE_SELECT, name
    assert kinds["Notes"] == FieldKind.SHORT_TEXT  # every note is unique: not a select
    assert kinds["Implement(s)"] == FieldKind.SHORT_TEXT
    assert table.fields[-1].kind == FieldKind.CREATED_TIME
    assert table.fields[-1].name == "created time 2"  # name dodges the datetime column
    # select columns seed their options from the data
    who = table.resolve_field("Who")
    assert [o.label for o in who.options] == ["Purdue Pete", "Suzie Jones"]


def test_infer_narrowest_common_kind_is_real():
    table = infer_schema(b"x\r\n1\r\n2.5\r\n")
    assert table.fields[0].kind == FieldKind.REAL


def test_infer_duplicate_header_and_empty_input():
    with pytest.raises(ValidationError) as exc:
        infer_schema(b"A,A\r\n1,2\r\n")
    assert exc.value.code == "duplicate-header"
    with pytest.raises(ValidationError) as exc:
        infer_schema(b"")
    assert exc.value.code == "empty-input"


def test_infer_never_produces_multi_select():
    table = infer_schema(b"tags\r\na; b\r\na; b\r\na; b\r\nc\r\n")
    assert table.fields[0].kind == FieldKind.SINGLE_SELECT  # repeats, few distinct
    data = b"tags\r\n" + b"\r\n".join(f"unique {i}".encode() for i in range(30)) + b"\r\n"
    assert infer_schema(data).fields[0].kind == FieldKind.SHORT_TEXT


def test_imported_inferred_table1_round_trips():
    """Inference + lenient import over the fixture file gives a working table."""
    data = GOLDEN_CSV.read_bytes()
    table = infer_schema(data)
    store = RecordStore(table)
    result = import_csv(table, store, data, mode="lenient", config=TABLE1, now=lambda: NOW)
    assert (result.inserted, result.errors) == (7, [])
    # the file's own "created time" column landed in the datetime field
    ct = table.resolve_field("created time")
    assert store.all_records()[0].cells[ct.field_id].value == datetime(2022, 12, 20, 11, 35)


# -- properties over random tables ---------------------------------------------------


def test_random_round_trips_and_reference_parse():
    rng = random.Random(20221220)
    for _ in range(60):
        table = random_table(rng)
        store = fill_store(rng, table)
        data = export_csv(table, store.all_records(), ExportConfig())

        grid = parse_strict_csv(data)
        widths = {len(row) for row in grid}
        assert widths == {len(table.fields)}
        assert grid[0] == [f.name for f in table.fields]
        config = ExportConfig()
        for row, record in zip(grid[1:], store.all_records()):
            for spec, got in zip(table.fields, row):
                if spec.kind == FieldKind.CREATED_TIME:
                    continue
                assert got == format_cell(spec, record.cells.get(spec.field_id), config)

        clone_table = copy.deepcopy(table)
        clone = RecordStore(clone_table)
        result = import_csv(clone_table, clone, data, mode="strict", now=lambda: NOW)
        assert (result.inserted, result.errors) == (len(store), [])
        for orig, back in zip(store.all_records(), clone.all_records()):
            assert orig.cells == back.cells


def test_export_injective_per_row():
    rng = random.Random(7)
    for _ in range(40):
        table = random_table(rng)
        store = fill_store(rng, table, rows=6)
        config = ExportConfig()
        seen: dict[tuple, dict] = {}
        for record in store.all_records():
            row = tuple(
                format_cell(spec, record.cells.get(spec.field_id), config)
                for spec in table.fields
                if spec.kind != FieldKind.CREATED_TIME
            )
            if row in seen:
                assert seen[row] == record.cells
            seen[row] = record.cells
