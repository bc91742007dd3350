"""The service core: bases, principals, authorization, and durable mutation.

Every public method authorizes exactly once, validates fully, journals the
resulting event, and only then applies it to in-memory state; the same
apply-event code replays the journal at startup, so recovery and live
operation cannot drift apart. Mutations to one base are serialized by its
lock (single writer); different bases never block each other.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

from . import access, forms, schema, templates, tidycsv
from .access import Actor, FormToken, Grant, Role
from .clock import SystemClock
from .document import (
    base_from_doc,
    base_to_doc,
    canonical_json,
    field_from_doc,
    field_to_doc,
    form_from_doc,
    form_to_doc,
    form_view_to_doc,
    grant_to_doc,
    table_from_doc,
    table_to_doc,
    token_to_doc,
)
from .errors import AuthRequired, NotFoundError, PermissionDenied, ValidationError
from .ids import new_id, new_secret_token
from .journal import Journal, RecoveryReport
from .records import Comment, RecordStore, cell_from_doc, cell_to_doc, record_from_doc, record_to_doc
from .schema import Base, Option, TableSpec

PRINCIPALS_FILE = "principals.json"
IDEMPOTENCY_RETENTION = timedelta(hours=24)


@dataclass
class Principal:
    principal_id: str
    name: str
    token: str


class BaseState:
    """One base plus its record stores, comments, and journal."""

    def __init__(self, journal: Journal):
        self.base: Base | None = None
        self.stores: dict[str, RecordStore] = {}
        self.comments: list[Comment] = []
        self.idempotency: dict[tuple[str, str], tuple[dict, datetime]] = {}
        self.journal = journal
        self.lock = threading.RLock()
        self.events_since_snapshot = 0


class Engine:
    def __init__(self, data_dir: str | Path, clock=None, snapshot_every: int = 200):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.clock = clock or SystemClock()
        self.snapshot_every = snapshot_every
        self._registry_lock = threading.RLock()
        self._bases: dict[str, BaseState] = {}
        self._principals: dict[str, Principal] = {}
        self._bearer_index: dict[str, str] = {}
        self._form_index: dict[str, str] = {}
        self._form_token_index: dict[str, str] = {}
        self.recovery_warnings: list[str] = []
        self._load_principals()
        self.ensure_principal("admin", name="admin")
        self._recover_all()

    # -- principals -----------------------------------------------------------

    def _principals_path(self) -> Path:
        return self.data_dir / PRINCIPALS_FILE

    def _load_principals(self) -> None:
        path = self._principals_path()
        if not path.exists():
            return
        doc = json.loads(path.read_text("utf-8"))
        for entry in doc.get("principals", ()):
            p = Principal(principal_id=entry["id"], name=entry.get("name", entry["id"]), token=entry["token"])
            self._principals[p.principal_id] = p
            self._bearer_index[p.token] = p.principal_id

    def _save_principals(self) -> None:
        doc = {
            "principals": [
                {"id": p.principal_id, "name": p.name, "token": p.token}
                for p in sorted(self._principals.values(), key=lambda p: p.principal_id)
            ]
        }
        tmp = self._principals_path().with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", "utf-8")
        os.replace(tmp, self._principals_path())

    def ensure_principal(self, principal_id: str, name: str | None = None) -> tuple[bool, str]:
        """Register a locally managed principal; returns (created, bearer token)."""
        with self._registry_lock:
            existing = self._principals.get(principal_id)
            if existing is not None:
                return False, existing.token
            p = Principal(principal_id=principal_id, name=name or principal_id, token=new_secret_token())
            self._principals[principal_id] = p
            self._bearer_index[p.token] = principal_id
            self._save_principals()
            return True, p.token

    def admin_actor(self) -> Actor:
        return Actor(principal_id="admin")

    # -- authentication --------------------------------------------------------

    def authenticate(self, bearer: str | None) -> Actor:
        if not bearer:
            raise AuthRequired()
        principal_id = self._bearer_index.get(bearer)
        if principal_id is not None:
            return Actor(principal_id=principal_id)
        base_id = self._form_token_index.get(bearer)
        if base_id is not None:
            state = self._bases.get(base_id)
            if state is not None:
                for tok in state.base.form_tokens:
                    if tok.token == bearer:
                        return Actor(form_token=tok)
        raise AuthRequired()

    # -- recovery ---------------------------------------------------------------

    def _recover_all(self) -> None:
        for child in sorted(self.data_dir.iterdir()) if self.data_dir.exists() else ():
            if not child.is_dir():
                continue
            journal = Journal(child)
            snapshot_state, events, report = journal.recover()
            state = BaseState(journal)
            if snapshot_state is not None:
                self._state_from_doc(state, snapshot_state)
            for event in events:
                self._apply_event(state, event.kind, event.payload)
            self._note_recovery(child.name, report)
            if state.base is None:
                continue  # empty directory, nothing committed yet
            self._bases[state.base.base_id] = state
            self._index_base(state)

    def _note_recovery(self, name: str, report: RecoveryReport) -> None:
        if report.snapshot_corrupt:
            self.recovery_warnings.append(f"{name}: snapshot unreadable, replayed the full journal")
        if report.truncated_at is not None:
            self.recovery_warnings.append(
                f"{name}: journal tail corrupt, truncated at byte {report.truncated_at}"
            )

    def _index_base(self, state: BaseState) -> None:
        for form in state.base.forms:
            self._form_index[form.form_id] = state.base.base_id
        for tok in state.base.form_tokens:
            self._form_token_index[tok.token] = state.base.base_id

    # -- state (de)serialization -------------------------------------------------

    def _state_to_doc(self, state: BaseState) -> dict:
        records = {}
        counters = {}
        for table_id, store in state.stores.items():
            records[table_id] = [record_to_doc(r) for r in store.all_records()]
            counters[table_id] = {
                "next_seq": store._next_seq,
                "last_created": store._last_created.isoformat() if store._last_created else None,
            }
        return {
            "base": base_to_doc(state.base),
            "records": records,
            "counters": counters,
            "comments": [
                {
                    "id": c.comment_id,
                    "record_id": c.record_id,
                    "author": c.author,
                    "text": c.text,
                    "created_at": c.created_at.isoformat(),
                }
                for c in state.comments
            ],
            "idempotency": [
                {"form_id": fid, "key": key, "record": doc, "ts": ts.isoformat()}
                for (fid, key), (doc, ts) in sorted(state.idempotency.items())
            ],
        }

    def _state_from_doc(self, state: BaseState, doc: dict) -> None:
        state.base = base_from_doc(doc["base"])
        for table in state.base.tables:
            store = RecordStore(table)
            for record_doc in doc["records"].get(table.table_id, ()):
                store.apply_insert(record_from_doc(record_doc))
            counter = doc["counters"].get(table.table_id)
            if counter:
                store._next_seq = counter["next_seq"]
                store._last_created = (
                    datetime.fromisoformat(counter["last_created"]) if counter["last_created"] else None
                )
            state.stores[table.table_id] = store
        state.comments = [
            Comment(
                comment_id=c["id"],
                record_id=c["record_id"],
                author=c["author"],
                text=c["text"],
                created_at=datetime.fromisoformat(c["created_at"]),
            )
            for c in doc.get("comments", ())
        ]
        state.idempotency = {
            (e["form_id"], e["key"]): (e["record"], datetime.fromisoformat(e["ts"]))
            for e in doc.get("idempotency", ())
        }

    def state_fingerprint(self, base_id: str) -> str:
        """Canonical serialization of one base's full state (tests compare these)."""
        state = self._state(base_id)
        with state.lock:
            return canonical_json(self._state_to_doc(state))

    # -- event application (the single mutation path) ----------------------------

    def _apply_event(self, state: BaseState, kind: str, payload: dict) -> None:
        if kind == "base-created":
            state.base = base_from_doc(payload["base"])
            state.stores = {t.table_id: RecordStore(t) for t in state.base.tables}
            return
        base = state.base
        if kind == "table-added":
            table = table_from_doc(payload["table"])
            base.tables.append(table)
            state.stores[table.table_id] = RecordStore(table)
        elif kind == "field-added":
            table = base.table_by_id(payload["table_id"])
            table.fields.append(field_from_doc(payload["field"]))
        elif kind == "option-added":
            table = base.table_by_id(payload["table_id"])
            spec = table.field_by_id(payload["field_id"])
            opt = payload["option"]
            spec.options.append(Option(option_id=opt["id"], label=opt["label"]))
        elif kind == "form-added":
            form = form_from_doc(payload["form"])
            base.forms.append(form)
            self._form_index[form.form_id] = base.base_id
        elif kind == "grant-set":
            grant = access.grant_for(base.grants, payload["principal_id"])
            if grant is None:
                base.grants.append(Grant(principal_id=payload["principal_id"], role=Role(payload["role"])))
            else:
                grant.role = Role(payload["role"])
        elif kind == "grant-revoked":
            grant = access.grant_for(base.grants, payload["principal_id"])
            if grant is not None:
                base.grants.remove(grant)
        elif kind == "token-minted":
            tok = FormToken(
                token=payload["token"]["token"],
                form_id=payload["token"]["form_id"],
                revoked=payload["token"].get("revoked", False),
            )
            base.form_tokens.append(tok)
            self._form_token_index[tok.token] = base.base_id
        elif kind == "token-revoked":
            for tok in base.form_tokens:
                if tok.token == payload["token"]:
                    tok.revoked = True
        elif kind == "record-inserted":
            record = record_from_doc(payload["record"])
            store = state.stores[record.table_id]
            store.apply_insert(record)
            if payload.get("mru"):
                used = [(u["field_id"], u["option_id"]) for u in payload["mru"]]
                forms.stamp_options_used(
                    store.table,
                    used,
                    datetime.fromisoformat(payload["mru_ts"]),
                    payload["mru_seq"],
                )
                base.mru_seq = payload["mru_seq"]
            key = payload.get("idempotency_key")
            if key:
                state.idempotency[(payload["form_id"], key)] = (
                    payload["record"],
                    datetime.fromisoformat(payload["record"]["created_time"]),
                )
        elif kind == "record-updated":
            store = state.stores[payload["table_id"]]
            updates = {fid: cell_from_doc(doc) for fid, doc in payload["cells"].items()}
            store.apply_update(payload["record_id"], updates)
        elif kind == "record-deleted":
            store = state.stores[payload["table_id"]]
            store.delete(payload["record_id"])
            state.comments = [c for c in state.comments if c.record_id != payload["record_id"]]
        elif kind == "comment-added":
            c = payload["comment"]
            state.comments.append(
                Comment(
                    comment_id=c["id"],
                    record_id=c["record_id"],
                    author=c["author"],
                    text=c["text"],
                    created_at=datetime.fromisoformat(c["created_at"]),
                )
            )
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def _commit(self, state: BaseState, kind: str, payload: dict) -> None:
        state.journal.append(kind, payload, ts=self.clock.now())
        self._apply_event(state, kind, payload)
        state.events_since_snapshot += 1
        if state.events_since_snapshot >= self.snapshot_every:
            state.journal.write_snapshot(self._state_to_doc(state))
            state.events_since_snapshot = 0

    def snapshot_base(self, base_id: str) -> None:
        state = self._state(base_id)
        with state.lock:
            state.journal.write_snapshot(self._state_to_doc(state))
            state.events_since_snapshot = 0

    # -- lookup helpers -----------------------------------------------------------

    def _state(self, base_id: str) -> BaseState:
        state = self._bases.get(base_id)
        if state is None:
            raise NotFoundError("unknown-base", f"no base {base_id!r}")
        return state

    def _state_for_form(self, form_id: str):
        base_id = self._form_index.get(form_id)
        if base_id is None:
            raise NotFoundError("unknown-form", f"no form {form_id!r}")
        state = self._state(base_id)
        for form in state.base.forms:
            if form.form_id == form_id:
                return state, form
        raise NotFoundError("unknown-form", f"no form {form_id!r}")

    def _require_principal(self, actor: Actor) -> None:
        if actor.is_token:
            raise PermissionDenied("form tokens cannot access the database itself")
        if actor.principal_id not in self._principals:
            raise AuthRequired()

    def _require(self, actor: Actor, action: str, state: BaseState, form_id: str | None = None) -> None:
        if not access.authorize(actor, action, state.base.grants, form_id=form_id):
            raise PermissionDenied(f"action '{action}' denied")

    # -- templates ------------------------------------------------------------------

    def list_templates(self, actor: Actor) -> list[dict]:
        self._require_principal(actor)
        return [templates.template_to_doc(t) for t in templates.list_templates()]

    # -- bases ------------------------------------------------------------------------

    def create_base(self, actor: Actor, name: str, template: str | None = None) -> dict:
        self._require_principal(actor)
        if template is not None:
            base = templates.instantiate(template, name, owner=actor.principal_id)
        else:
            base = schema.create_base(name, owner=actor.principal_id)
        with self._registry_lock:
            journal = Journal(self.data_dir / base.base_id)
            state = BaseState(journal)
            with state.lock:
                self._commit(state, "base-created", {"base": base_to_doc(base)})
                self._bases[state.base.base_id] = state
                self._index_base(state)
        return self.describe_base(actor, state.base.base_id)

    def describe_base(self, actor: Actor, base_id: str) -> dict:
        state = self._state(base_id)
        self._require(actor, "read-grid", state)
        with state.lock:
            doc = base_to_doc(state.base)
        if not access.authorize(actor, "manage-grants", state.base.grants):
            doc.pop("grants", None)
        grant = access.grant_for(state.base.grants, actor.principal_id) if not actor.is_token else None
        if grant is None or grant.role not in access.TOKEN_ADMIN_ROLES:
            doc.pop("form_tokens", None)
        # Clients size their UI (edit affordances etc.) off the caller's role;
        # the server still authorizes every call regardless.
        doc["your_role"] = grant.role.value if grant else None
        return doc

    def add_table(self, actor: Actor, base_id: str, name: str, field_docs: list[dict] | None = None) -> dict:
        state = self._state(base_id)
        with state.lock:
            self._require(actor, "edit-schema", state)
            if not name.strip():
                raise ValidationError("empty-name", "table name must not be empty")
            if any(t.name.strip() == name.strip() for t in state.base.tables):
                raise ValidationError("duplicate-name", f"base already has a table named {name!r}")
            fields = [self._field_from_body(doc) for doc in field_docs or ()]
            table = schema.make_table(name, fields)
            self._commit(state, "table-added", {"table": table_to_doc(table)})
        return table_to_doc(state.base.table_by_id(table.table_id))

    @staticmethod
    def _field_from_body(doc: dict):
        return schema.make_field(
            name=doc.get("name", ""),
            kind=doc.get("kind", ""),
            unit_label=doc.get("unit_label"),
            option_labels=doc.get("options", ()),
        )

    def add_field(self, actor: Actor, base_id: str, table_ref: str, field_doc: dict) -> dict:
        state = self._state(base_id)
        with state.lock:
            self._require(actor, "edit-schema", state)
            table = state.base.resolve_table(table_ref)
            try:
                spec = self._field_from_body(field_doc)
            except ValueError:
                raise ValidationError("unknown-kind", f"unknown field kind {field_doc.get('kind')!r}") from None
            schema.check_new_field(table, spec)
            if spec.kind in schema.SELECT_KINDS and spec.options is None:
                spec.options = []
            self._commit(state, "field-added", {"table_id": table.table_id, "field": field_to_doc(spec)})
        return table_to_doc(table)

    def add_form(self, actor: Actor, base_id: str, form_doc: dict) -> dict:
        state = self._state(base_id)
        with state.lock:
            self._require(actor, "edit-form", state)
            table = state.base.resolve_table(form_doc.get("table_id", ""))
            form = forms.make_form(
                table,
                title=form_doc.get("title", "Entry form"),
                description=form_doc.get("description", ""),
                entries=[
                    forms.FormField(
                        field_id=table.resolve_field(e["field"]).field_id,
                        prompt=e.get("prompt"),
                        required=e.get("required", False),
                        visibility=self._visibility_from_body(table, e.get("visibility")),
                        allow_add_option=e.get("allow_add_option", False),
                    )
                    for e in form_doc.get("entries", ())
                ],
            )
            self._commit(state, "form-added", {"form": form_to_doc(form)})
        return form_to_doc(form)

    @staticmethod
    def _visibility_from_body(table: TableSpec, doc: dict | None) -> forms.VisibilityRule:
        if not doc or doc.get("kind", "always") == "always":
            return forms.VisibilityRule()
        controller = table.resolve_field(doc.get("field", doc.get("field_id", "")))
        labels = doc.get("options", doc.get("option_ids", ()))
        option_ids = []
        for label in labels:
            option = schema.find_option(controller, str(label))
            if option is None:
                raise ValidationError("unknown-option", f"{controller.name!r} has no option {label!r}")
            option_ids.append(option.option_id)
        kind = forms.WHEN_EQUALS if doc.get("kind") == "when-equals" else forms.WHEN_ONE_OF
        return forms.VisibilityRule(kind=kind, field_id=controller.field_id, option_ids=tuple(option_ids))

    # -- grants and tokens ---------------------------------------------------------

    def set_grant(self, actor: Actor, base_id: str, principal_id: str, role: str) -> dict:
        state = self._state(base_id)
        with state.lock:
            if not access.authorize(actor, "manage-grants", state.base.grants):
                raise PermissionDenied("only an owner may manage sharing", code="not-owner")
            parsed = access.parse_role(role)
            rehearsal = [Grant(g.principal_id, g.role) for g in state.base.grants]
            access.set_grant(rehearsal, principal_id, parsed)  # raises last-owner-removal
            self._commit(state, "grant-set", {"principal_id": principal_id, "role": parsed.value})
        return {"principal_id": principal_id, "role": parsed.value}

    def revoke_grant(self, actor: Actor, base_id: str, principal_id: str) -> None:
        state = self._state(base_id)
        with state.lock:
            if not access.authorize(actor, "manage-grants", state.base.grants):
                raise PermissionDenied("only an owner may manage sharing", code="not-owner")
            rehearsal = [Grant(g.principal_id, g.role) for g in state.base.grants]
            access.revoke_grant(rehearsal, principal_id)
            self._commit(state, "grant-revoked", {"principal_id": principal_id})

    def grants_doc(self, actor: Actor, base_id: str) -> list[dict]:
        state = self._state(base_id)
        self._require(actor, "manage-grants", state)
        with state.lock:
            return [grant_to_doc(g) for g in state.base.grants]

    def mint_form_token(self, actor: Actor, form_id: str) -> dict:
        state, form = self._state_for_form(form_id)
        with state.lock:
            self._require_token_admin(actor, state)
            token = access.mint_form_token(form.form_id)
            self._commit(state, "token-minted", {"token": token_to_doc(token)})
        return token_to_doc(token)

    def revoke_form_token(self, actor: Actor, token_value: str) -> None:
        base_id = self._form_token_index.get(token_value)
        if base_id is None:
            raise NotFoundError("unknown-token", "no such form token")
        state = self._state(base_id)
        with state.lock:
            self._require_token_admin(actor, state)
            self._commit(state, "token-revoked", {"token": token_value})

    def _require_token_admin(self, actor: Actor, state: BaseState) -> None:
        if actor.is_token:
            raise PermissionDenied("form tokens cannot mint or revoke tokens")
        grant = access.grant_for(state.base.grants, actor.principal_id)
        if grant is None or grant.role not in access.TOKEN_ADMIN_ROLES:
            raise PermissionDenied("only owners and editors manage form tokens")

    # -- records -----------------------------------------------------------------

    def _store(self, state: BaseState, table_ref: str) -> RecordStore:
        table = state.base.resolve_table(table_ref)
        return state.stores[table.table_id]

    def insert_record(self, actor: Actor, base_id: str, table_ref: str, raw_cells: dict) -> dict:
        state = self._state(base_id)
        with state.lock:
            self._require(actor, "create-record", state)
            store = self._store(state, table_ref)
            cells = store.validate_raw_cells(raw_cells)
            record = store.prepare_insert(cells, self.clock.now())
            self._commit(state, "record-inserted", {"record": record_to_doc(record)})
        return record_to_doc(record)

    def update_record(self, actor: Actor, base_id: str, table_ref: str, record_id: str, raw_cells: dict) -> dict:
        state = self._state(base_id)
        with state.lock:
            self._require(actor, "edit-record", state)
            store = self._store(state, table_ref)
            updates = store.prepare_update(record_id, raw_cells)
            payload = {
                "table_id": store.table.table_id,
                "record_id": record_id,
                "cells": {fid: cell_to_doc(v) for fid, v in updates.items()},
            }
            self._commit(state, "record-updated", payload)
            return record_to_doc(store.get(record_id))

    def delete_record(self, actor: Actor, base_id: str, table_ref: str, record_id: str) -> None:
        state = self._state(base_id)
        with state.lock:
            self._require(actor, "delete-record", state)
            store = self._store(state, table_ref)
            store.get(record_id)
            self._commit(state, "record-deleted", {"table_id": store.table.table_id, "record_id": record_id})

    def query_records(
        self,
        actor: Actor,
        base_id: str,
        table_ref: str,
        filters=(),
        sort: tuple[str, str] | None = None,
    ) -> list[dict]:
        state = self._state(base_id)
        self._require(actor, "read-grid", state)
        with state.lock:
            store = self._store(state, table_ref)
            return [record_to_doc(r) for r in store.query(filters, sort)]

    # -- comments -----------------------------------------------------------------

    def add_comment(self, actor: Actor, base_id: str, table_ref: str, record_id: str, text: str) -> dict:
        state = self._state(base_id)
        with state.lock:
            self._require(actor, "comment", state)
            store = self._store(state, table_ref)
            store.get(record_id)
            if not text.strip():
                raise ValidationError("empty-comment", "comment text must not be empty")
            comment = {
                "id": new_id("com"),
                "record_id": record_id,
                "author": actor.principal_id,
                "text": text,
                "created_at": self.clock.now().isoformat(),
            }
            self._commit(state, "comment-added", {"comment": comment})
        return comment

    def list_comments(self, actor: Actor, base_id: str, table_ref: str, record_id: str) -> list[dict]:
        state = self._state(base_id)
        self._require(actor, "read-grid", state)
        with state.lock:
            store = self._store(state, table_ref)
            store.get(record_id)
            return [
                {
                    "id": c.comment_id,
                    "record_id": c.record_id,
                    "author": c.author,
                    "text": c.text,
                    "created_at": c.created_at.isoformat(),
                }
                for c in state.comments
                if c.record_id == record_id
            ]

    # -- forms ----------------------------------------------------------------------

    def render_form(self, actor: Actor, form_id: str, draft: dict | None = None) -> dict:
        state, form = self._state_for_form(form_id)
        self._require(actor, "render-form", state, form_id=form_id)
        with state.lock:
            table = state.base.resolve_table(form.table_id)
            view = forms.render_form(form, table, draft or {})
            doc = form_view_to_doc(view)
            # The full spec plus a per-field catalog ride along so clients can
            # re-evaluate visibility and draw newly revealed fields offline,
            # with the same rules the server uses.
            doc["spec"] = form_to_doc(form)
            doc["fields"] = {}
            for entry in form.entries:
                spec = table.field_by_id(entry.field_id)
                options = None
                if spec.options is not None:
                    options = [
                        {"id": o.option_id, "label": o.label} for o in forms.mru_ordered(spec.options)
                    ]
                doc["fields"][spec.field_id] = {
                    "name": spec.name,
                    "kind": spec.kind.value,
                    "unit_label": spec.unit_label,
                    "options": options,
                }
            doc["base_name"] = state.base.name
        return doc

    def submit_form(
        self,
        actor: Actor,
        form_id: str,
        answers: dict,
        new_options: list[tuple[str, str]] | None = None,
        idempotency_key: str | None = None,
    ) -> dict:
        state, form = self._state_for_form(form_id)
        with state.lock:
            self._require(actor, "submit-form", state, form_id=form_id)
            now = self.clock.now()
            if idempotency_key:
                self._prune_idempotency(state, now)
                cached = state.idempotency.get((form_id, idempotency_key))
                if cached is not None:
                    return dict(cached[0], replayed=True)
            table = state.base.resolve_table(form.table_id)
            store = state.stores[table.table_id]
            prepared = forms.prepare_submission(form, table, answers, new_options)
            for field_id, option in prepared.new_options:
                self._commit(
                    state,
                    "option-added",
                    {
                        "table_id": table.table_id,
                        "field_id": field_id,
                        "option": {"id": option.option_id, "label": option.label},
                    },
                )
            record = store.prepare_insert(prepared.cells, now)
            payload = {
                "record": record_to_doc(record),
                "form_id": form_id,
                "mru": [{"field_id": f, "option_id": o} for f, o in prepared.used_options],
                "mru_ts": now.isoformat(),
                "mru_seq": state.base.mru_seq + 1,
            }
            if idempotency_key:
                payload["idempotency_key"] = idempotency_key
            self._commit(state, "record-inserted", payload)
        return record_to_doc(record)

    def _prune_idempotency(self, state: BaseState, now: datetime) -> None:
        cutoff = now - IDEMPOTENCY_RETENTION
        stale = [k for k, (_, ts) in state.idempotency.items() if ts < cutoff]
        for k in stale:
            del state.idempotency[k]

    # -- CSV ---------------------------------------------------------------------------

    def export_table(self, actor: Actor, base_id: str, table_ref: str, config=None) -> bytes:
        state = self._state(base_id)
        self._require(actor, "export", state)
        with state.lock:
            store = self._store(state, table_ref)
            return tidycsv.export_csv(store.table, store.all_records(), config)

    def import_table(self, actor: Actor, base_id: str, table_ref: str, data: bytes, mode: str = "strict", config=None):
        state = self._state(base_id)
        with state.lock:
            self._require(actor, "create-record", state)
            store = self._store(state, table_ref)
            plan = tidycsv.plan_import(store.table, data, mode=mode, config=config)
            if mode == "strict" and plan.errors:
                return tidycsv.ImportResult(inserted=0, errors=plan.errors)
            for field_id, option in plan.new_options:
                self._commit(
                    state,
                    "option-added",
                    {
                        "table_id": store.table.table_id,
                        "field_id": field_id,
                        "option": {"id": option.option_id, "label": option.label},
                    },
                )
            for cells in plan.rows:
                record = store.prepare_insert(cells, self.clock.now())
                self._commit(state, "record-inserted", {"record": record_to_doc(record)})
            return tidycsv.ImportResult(inserted=len(plan.rows), errors=plan.errors)

    # -- misc ----------------------------------------------------------------------------

    def list_bases(self, actor: Actor) -> list[dict]:
        self._require_principal(actor)
        out = []
        for state in self._bases.values():
            if access.authorize(actor, "read-grid", state.base.grants):
                out.append({"id": state.base.base_id, "name": state.base.name})
        return sorted(out, key=lambda d: d["id"])

    def close(self) -> None:
        for state in self._bases.values():
            state.journal.close()
