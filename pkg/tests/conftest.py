from __future__ import annotations

from pathlib import Path

import pytest

from fieldbook import forms
from fieldbook.demo import DEMO_ROWS
from fieldbook.records import RecordStore
from fieldbook.templates import instantiate

DATA_DIR = Path(__file__).parent / "data"
GOLDEN_CSV = DATA_DIR / "hort_activity_table1.csv"


@pytest.fixture
def hort_base():
    return instantiate("hort-activity", "ACME FARMS", "user-1")


@pytest.fixture
def hort_parts(hort_base):
    """(base, activities table, entry form, empty store) for module-level tests."""
    table = hort_base.resolve_table("Activities")
    form = hort_base.forms[0]
    return hort_base, table, form, RecordStore(table)


def submit_direct(base, form, store, answers, new_options=(), now=None):
    """Drive the form engine without the service layer (tests only)."""
    table = base.resolve_table(form.table_id)
    prepared = forms.prepare_submission(form, table, answers, list(new_options))
    forms.apply_new_options(table, prepared.new_options)
    record = store.prepare_insert(prepared.cells, now)
    store.apply_insert(record)
    base.mru_seq += 1
    forms.stamp_options_used(table, prepared.used_options, now, base.mru_seq)
    return record


@pytest.fixture
def loaded_hort(hort_parts):
    """The hort base with all seven sample rows submitted through the form."""
    base, table, form, store = hort_parts
    for at, answers, new_options in DEMO_ROWS:
        submit_direct(base, form, store, answers, new_options, now=at)
    return base, table, form, store
