from __future__ import annotations

import itertools
import json
import os
import signal
import subprocess
import sys
import threading
from datetime import datetime
from pathlib import Path

import pytest

from fieldbook.clock import SettableClock
from fieldbook.engine import Engine
from fieldbook.errors import ValidationError

NOW = datetime(2023, 1, 1, 8, 0)
DATA = Path(__file__).parent / "data"


@pytest.fixture
def engine(tmp_path):
    eng = Engine(tmp_path / "data", clock=SettableClock(NOW))
    yield eng
    eng.close()


@pytest.fixture
def pinned_ids(monkeypatch):
    counter = itertools.count(1)
    monkeypatch.setattr("fieldbook.ids._token_hex", lambda n: format(next(counter), f"0{2 * n}d")[-2 * n:])


def journal_lines(engine: Engine, base_id: str) -> list[dict]:
    path = engine.data_dir / base_id / "journal.ndjson"
    return [json.loads(line) for line in path.read_bytes().splitlines()]


def simple_base(engine: Engine) -> tuple[str, str]:
    doc = engine.create_base(engine.admin_actor(), "Journal test")
    base_id = doc["id"]
    engine.add_table(engine.admin_actor(), base_id, "Events", [{"name": "Count", "kind": "integer"}])
    return base_id, "Events"


def test_insert_appends_exactly_one_record_event(engine):
    base_id, table = simple_base(engine)
    before = len(journal_lines(engine, base_id))
    engine.insert_record(engine.admin_actor(), base_id, table, {"Count": "1"})
    lines = journal_lines(engine, base_id)
    assert len(lines) == before + 1
    assert lines[-1]["kind"] == "record-inserted"


def test_failed_validation_appends_nothing(engine):
    base_id, table = simple_base(engine)
    before = journal_lines(engine, base_id)
    with pytest.raises(ValidationError):
        engine.insert_record(engine.admin_actor(), base_id, table, {"Count": "one"})
    assert journal_lines(engine, base_id) == before


def test_sequence_numbers_gap_free_under_concurrency(engine):
    base_id, table = simple_base(engine)
    errors = []

    def worker():
        for i in range(20):
            try:
                engine.insert_record(engine.admin_actor(), base_id, table, {"Count": str(i)})
            except Exception as err:  # pragma: no cover
                errors.append(err)

    threads = [threading.Thread(target=worker) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    seqs = [line["seq"] for line in journal_lines(engine, base_id)]
    assert seqs == list(range(1, len(seqs) + 1))


def test_recover_on_empty_directory_is_empty_state(tmp_path):
    eng = Engine(tmp_path / "fresh")
    assert eng._bases == {}
    assert eng.recovery_warnings == []
    eng.close()


def test_recover_reproduces_state_exactly(engine, tmp_path):
    base_id, table = simple_base(engine)
    for i in range(5):
        engine.insert_record(engine.admin_actor(), base_id, table, {"Count": str(i)})
    fp = engine.state_fingerprint(base_id)
    engine.close()
    second = Engine(engine.data_dir)
    assert second.state_fingerprint(base_id) == fp
    second.close()
    third = Engine(engine.data_dir)
    assert third.state_fingerprint(base_id) == fp
    third.close()


def test_snapshot_plus_tail_equals_full_replay(engine):
    base_id, table = simple_base(engine)
    for i in range(3):
        engine.insert_record(engine.admin_actor(), base_id, table, {"Count": str(i)})
    engine.snapshot_base(base_id)
    for i in range(3, 6):
        engine.insert_record(engine.admin_actor(), base_id, table, {"Count": str(i)})
    fp = engine.state_fingerprint(base_id)
    engine.close()
    recovered = Engine(engine.data_dir)
    assert recovered.state_fingerprint(base_id) == fp
    assert recovered.recovery_warnings == []
    recovered.close()


def test_corrupt_journal_tail_truncates_with_warning(engine):
    base_id, table = simple_base(engine)
    for i in range(4):
        engine.insert_record(engine.admin_actor(), base_id, table, {"Count": str(i)})
    engine.close()
    path = engine.data_dir / base_id / "journal.ndjson"
    data = bytearray(path.read_bytes())
    data[-10] ^= 0x04  # flip one bit inside the last line
    path.write_bytes(bytes(data))

    recovered = Engine(engine.data_dir)
    assert any("journal tail corrupt" in w for w in recovered.recovery_warnings)
    table_id = recovered._bases[base_id].base.resolve_table(table).table_id
    assert len(recovered._bases[base_id].stores[table_id]) == 3
    # the corrupt bytes are physically gone; appends continue cleanly
    recovered.insert_record(recovered.admin_actor(), base_id, table, {"Count": "9"})
    seqs = [line["seq"] for line in journal_lines(recovered, base_id)]
    assert seqs == list(range(1, len(seqs) + 1))
    recovered.close()


def test_corrupt_snapshot_falls_back_to_full_replay(engine):
    base_id, table = simple_base(engine)
    for i in range(4):
        engine.insert_record(engine.admin_actor(), base_id, table, {"Count": str(i)})
    engine.snapshot_base(base_id)
    fp = engine.state_fingerprint(base_id)
    engine.close()
    snap = engine.data_dir / base_id / "snapshot.json"
    data = bytearray(snap.read_bytes())
    data[len(data) // 2] ^= 0x01
    snap.write_bytes(bytes(data))

    recovered = Engine(engine.data_dir)
    assert any("snapshot unreadable" in w for w in recovered.recovery_warnings)
    assert recovered.state_fingerprint(base_id) == fp
    recovered.close()


def test_journal_line_layout_is_stable(engine):
    base_id, _ = simple_base(engine)
    for line in journal_lines(engine, base_id):
        assert set(line) == {"seq", "ts", "kind", "payload", "crc"}


def test_golden_on_disk_layout(tmp_path, pinned_ids):
    """Byte-for-byte stable journal for a fixed scenario (ids and clock pinned)."""
    eng = Engine(tmp_path / "data", clock=SettableClock(NOW))
    doc = eng.create_base(eng.admin_actor(), "Golden base")
    eng.add_table(eng.admin_actor(), doc["id"], "Events", [{"name": "Count", "kind": "integer"}])
    eng.insert_record(eng.admin_actor(), doc["id"], "Events", {"Count": "1"})
    produced = (eng.data_dir / doc["id"] / "journal.ndjson").read_bytes()
    eng.close()
    golden = DATA / "golden_journal.ndjson"
    assert produced == golden.read_bytes()


def test_kill_after_ack_preserves_acknowledged_prefix(tmp_path):
    data_dir = tmp_path / "crash"
    for expected in (1, 2, 3):
        child = subprocess.Popen(
            [sys.executable, str(Path(__file__).parent / "crash_child.py"), str(data_dir)],
            stdout=subprocess.PIPE,
            text=True,
        )
        ack = child.stdout.readline().strip()
        os.kill(child.pid, signal.SIGKILL)
        child.wait()
        assert ack == f"ACK {expected}"
        eng = Engine(data_dir)
        base_id = next(iter(eng._bases))
        table_id = eng._bases[base_id].base.resolve_table("Events").table_id
        assert len(eng._bases[base_id].stores[table_id]) == expected
        eng.close()
