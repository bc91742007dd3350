"""Crash-safe storage: an append-only journal plus periodic snapshots.

Layout is one directory per base holding ``journal.ndjson`` and
``snapshot.json``. Journal lines are canonical JSON, one event each, with a
CRC so a flipped bit is detected even when the line still parses. Events are
flushed and fsynced before the mutating call returns, and sequence numbers are
gap-free, so recovery = snapshot + replay of the tail reproduces exactly the
acknowledged state. The files are deliberately plain text: the people running
this on a farm server should be able to read their own data.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .document import canonical_json
from .errors import StorageError

JOURNAL_NAME = "journal.ndjson"
SNAPSHOT_NAME = "snapshot.json"


@dataclass(frozen=True)
class JournalEvent:
    seq: int
    ts: str
    kind: str
    payload: dict


def _crc(seq: int, ts: str, kind: str, payload: dict) -> str:
    body = canonical_json([seq, ts, kind, payload]).encode("utf-8")
    return format(zlib.crc32(body), "08x")


def encode_event(event: JournalEvent) -> str:
    return canonical_json(
        {
            "seq": event.seq,
            "ts": event.ts,
            "kind": event.kind,
            "payload": event.payload,
            "crc": _crc(event.seq, event.ts, event.kind, event.payload),
        }
    )


def decode_event(line: str) -> JournalEvent | None:
    """None for anything corrupt; the caller truncates there."""
    try:
        doc = json.loads(line)
        seq, ts, kind, payload, crc = doc["seq"], doc["ts"], doc["kind"], doc["payload"], doc["crc"]
    except (ValueError, KeyError, TypeError):
        return None
    if not isinstance(seq, int) or not isinstance(payload, dict):
        return None
    if crc != _crc(seq, ts, kind, payload):
        return None
    return JournalEvent(seq=seq, ts=ts, kind=kind, payload=payload)


@dataclass
class RecoveryReport:
    snapshot_used: bool
    snapshot_corrupt: bool
    events_replayed: int
    truncated_at: int | None  # byte offset of a corrupt tail, if any

    @property
    def clean(self) -> bool:
        return not self.snapshot_corrupt and self.truncated_at is None


class Journal:
    """Single appender per base; the owning engine serializes callers."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.path = self.directory / JOURNAL_NAME
        self.snapshot_path = self.directory / SNAPSHOT_NAME
        self.last_seq = 0
        self._fh = None

    def _handle(self):
        if self._fh is None:
            self._fh = open(self.path, "ab")
        return self._fh

    def append(self, kind: str, payload: dict, ts: datetime) -> int:
        event = JournalEvent(seq=self.last_seq + 1, ts=ts.isoformat(), kind=kind, payload=payload)
        line = encode_event(event).encode("utf-8") + b"\n"
        try:
            fh = self._handle()
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        except OSError as err:
            code = "storage-full" if err.errno == 28 else "io-failure"
            raise StorageError(code, f"journal append failed: {err}") from err
        self.last_seq = event.seq
        return event.seq

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    # -- snapshots -------------------------------------------------------------

    def write_snapshot(self, state: dict) -> None:
        doc = {
            "last_seq": self.last_seq,
            "state": state,
        }
        doc["crc"] = format(zlib.crc32(canonical_json(doc).encode("utf-8")), "08x")
        tmp = self.snapshot_path.with_suffix(".json.tmp")
        data = canonical_json(doc).encode("utf-8")
        try:
            with open(tmp, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.snapshot_path)
        except OSError as err:
            raise StorageError("io-failure", f"snapshot write failed: {err}") from err

    def _load_snapshot(self) -> tuple[dict | None, bool]:
        """(snapshot doc, corrupt?) — a missing snapshot is not corruption."""
        if not self.snapshot_path.exists():
            return None, False
        try:
            doc = json.loads(self.snapshot_path.read_text("utf-8"))
            crc = doc.pop("crc")
        except (OSError, ValueError, KeyError):
            return None, True
        if crc != format(zlib.crc32(canonical_json(doc).encode("utf-8")), "08x"):
            return None, True
        if "last_seq" not in doc or "state" not in doc:
            return None, True
        return doc, False

    def recover(self) -> tuple[dict | None, list[JournalEvent], RecoveryReport]:
        """Load the snapshot (if intact) and the journal tail after it.

        A corrupt snapshot falls back to full journal replay; a corrupt
        journal tail is physically truncated at the last valid event.
        """
        snapshot, corrupt_snapshot = self._load_snapshot()
        after_seq = snapshot["last_seq"] if snapshot else 0

        events: list[JournalEvent] = []
        truncated_at: int | None = None
        last_seen = 0
        if self.path.exists():
            offset = 0
            with open(self.path, "rb") as fh:
                for raw in fh:
                    line = raw.decode("utf-8", errors="replace").rstrip("\n")
                    event = decode_event(line)
                    if event is None or event.seq != last_seen + 1 or not raw.endswith(b"\n"):
                        truncated_at = offset
                        break
                    last_seen = event.seq
                    offset += len(raw)
                    if event.seq > after_seq:
                        events.append(event)
            if truncated_at is not None:
                self.close()
                with open(self.path, "r+b") as fh:
                    fh.truncate(truncated_at)
                    fh.flush()
                    os.fsync(fh.fileno())
        # The journal is never pruned, so it normally covers the snapshot;
        # take the max defensively so sequence numbers stay gap-free.
        self.last_seq = max(last_seen, after_seq)

        report = RecoveryReport(
            snapshot_used=snapshot is not None,
            snapshot_corrupt=corrupt_snapshot,
            events_replayed=len(events),
            truncated_at=truncated_at,
        )
        return (snapshot["state"] if snapshot else None), events, report
