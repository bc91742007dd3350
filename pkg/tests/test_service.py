from __future__ import annotations

import json
from datetime import datetime
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from conftest import GOLDEN_CSV
from fieldbook.demo import demo_clock, load_demo
from fieldbook.engine import Engine
from fieldbook.service import create_app


@pytest.fixture
def rig(tmp_path):
    """Engine + demo base + one principal per role + a form token."""
    engine = Engine(tmp_path / "data", clock=demo_clock())
    admin = engine.admin_actor()
    base_doc = load_demo(engine, admin)
    base_id = base_doc["id"]
    form_id = base_doc["forms"][0]["id"]
    tokens = {"admin": engine.ensure_principal("admin")[1]}
    for role in ("editor", "commenter", "readonly"):
        principal = f"{role}-user"
        tokens[role] = engine.ensure_principal(principal)[1]
        engine.set_grant(admin, base_id, principal, role)
    engine.clock.set(datetime(2022, 12, 20, 13, 0))
    form_token = engine.mint_form_token(admin, form_id)["token"]
    client = TestClient(create_app(engine), raise_server_exceptions=False)
    return {
        "engine": engine,
        "client": client,
        "base": base_id,
        "form": form_id,
        "tokens": tokens,
        "form_token": form_token,
        "record_ids": [r["id"] for r in engine.query_records(admin, base_id, "Activities")],
    }


def auth(rig, who):
    value = rig["form_token"] if who == "form-token" else rig["tokens"][who]
    return {"Authorization": f"Bearer {value}"}


def journal_bytes(rig) -> bytes:
    out = b""
    for path in sorted(Path(rig["engine"].data_dir).glob("*/journal.ndjson")):
        out += path.read_bytes()
    return out


# -- authentication ----------------------------------------------------------------


def test_every_route_denies_unauthenticated_with_no_side_effect(rig):
    before = journal_bytes(rig)
    app = rig["client"].app
    tried = 0
    for route in app.routes:
        methods = getattr(route, "methods", None)
        if not methods:
            continue
        path = route.path
        if not path.startswith(("/bases", "/forms", "/templates", "/f/")):
            continue
        concrete = (
            path.replace("{base_id}", rig["base"])
            .replace("{table_ref}", "Activities")
            .replace("{record_id}", rig["record_ids"][0])
            .replace("{form_id}", rig["form"])
            .replace("{principal_id}", "editor-user")
            .replace("{token}", "bogus-token-value")
        )
        for method in methods:
            tried += 1
            response = rig["client"].request(method, concrete, json={})
            assert response.status_code == 401, (method, concrete, response.status_code)
    assert tried >= 20
    assert journal_bytes(rig) == before


def test_wrong_bearer_is_401(rig):
    response = rig["client"].get(f"/bases/{rig['base']}", headers={"Authorization": "Bearer nonsense"})
    assert response.status_code == 401


def test_auth_precedes_not_found(rig):
    assert rig["client"].get("/bases/bas-missing").status_code == 401
    assert rig["client"].get("/bases/bas-missing", headers=auth(rig, "admin")).status_code == 404


# -- roles over HTTP -----------------------------------------------------------------


def test_readonly_can_read_and_export_but_not_write(rig):
    headers = auth(rig, "readonly")
    assert rig["client"].get(f"/bases/{rig['base']}", headers=headers).status_code == 200
    assert rig["client"].get(f"/bases/{rig['base']}/tables/Activities/export.csv", headers=headers).status_code == 200
    before = journal_bytes(rig)
    post = rig["client"].post(
        f"/bases/{rig['base']}/tables/Activities/records", json={"cells": {"Duration": "5"}}, headers=headers
    )
    assert post.status_code == 403
    assert rig["client"].get(f"/forms/{rig['form']}", headers=headers).status_code == 403
    assert journal_bytes(rig) == before


def test_commenter_can_comment_but_not_edit(rig):
    headers = auth(rig, "commenter")
    record = rig["record_ids"][0]
    url = f"/bases/{rig['base']}/tables/Activities/records/{record}/comments"
    created = rig["client"].post(url, json={"text": "needs a second look"}, headers=headers)
    assert created.status_code == 201
    listing = rig["client"].get(url, headers=auth(rig, "readonly"))
    assert [c["text"] for c in listing.json()] == ["needs a second look"]
    patch = rig["client"].patch(
        f"/bases/{rig['base']}/tables/Activities/records/{record}", json={"cells": {"Duration": "1"}}, headers=headers
    )
    assert patch.status_code == 403
    deny = rig["client"].post(url.replace("/comments", "") + "/comments", json={"text": "x"}, headers=auth(rig, "form-token"))
    assert deny.status_code == 403


def test_editor_edits_records_but_not_schema_or_grants(rig):
    headers = auth(rig, "editor")
    record = rig["record_ids"][0]
    patch = rig["client"].patch(
        f"/bases/{rig['base']}/tables/Activities/records/{record}",
        json={"cells": {"Notes": "rechecked"}},
        headers=headers,
    )
    assert patch.status_code == 200
    assert rig["client"].post(
        f"/bases/{rig['base']}/tables/Activities/fields",
        json={"name": "Extra", "kind": "short-text"},
        headers=headers,
    ).status_code == 403
    assert rig["client"].post(
        f"/bases/{rig['base']}/grants", json={"principal": "x", "role": "editor"}, headers=headers
    ).status_code == 403
    assert rig["client"].post(f"/forms/{rig['form']}/tokens", headers=headers).status_code == 201


def test_owner_manages_schema_forms_grants(rig):
    headers = auth(rig, "admin")
    assert rig["client"].post(
        f"/bases/{rig['base']}/tables/Activities/fields",
        json={"name": "Soil temp (F)", "kind": "integer", "unit_label": "F"},
        headers=headers,
    ).status_code == 201
    assert rig["client"].post(
        f"/bases/{rig['base']}/grants", json={"principal": "new-user", "role": "readonly"}, headers=headers
    ).status_code == 201
    grants = rig["client"].get(f"/bases/{rig['base']}/grants", headers=headers)
    assert {g["principal_id"] for g in grants.json()} >= {"admin", "new-user"}


def test_last_owner_removal_is_422(rig):
    headers = auth(rig, "admin")
    response = rig["client"].delete(f"/bases/{rig['base']}/grants/admin", headers=headers)
    assert response.status_code == 422
    assert response.json()["error"]["code"] == "last-owner-removal"


# -- form tokens ------------------------------------------------------------------------


def test_form_token_renders_and_submits_but_never_reads_grid(rig):
    headers = auth(rig, "form-token")
    view = rig["client"].get(f"/forms/{rig['form']}", headers=headers)
    assert view.status_code == 200
    assert rig["client"].get(f"/bases/{rig['base']}", headers=headers).status_code == 403
    assert rig["client"].get(
        f"/bases/{rig['base']}/tables/Activities/export.csv", headers=headers
    ).status_code == 403

    submission = rig["client"].post(
        f"/forms/{rig['form']}/submissions",
        json={"answers": {"Who": "Purdue Pete", "Where": "Bed 72", "What": "Scout"}},
        headers=headers,
    )
    assert submission.status_code == 201
    assert submission.json()["id"].startswith("rec")


def test_shareable_token_path_segment(rig):
    token = rig["form_token"]
    view = rig["client"].get(f"/f/{token}")
    assert view.status_code == 200
    assert view.json()["form_id"] == rig["form"]
    submission = rig["client"].post(
        f"/f/{token}/submissions",
        json={"answers": {"Who": "Suzie Jones", "Where": "Zone D", "What": "Scout"}},
    )
    assert submission.status_code == 201


def test_revoked_token_denies(rig):
    headers = auth(rig, "admin")
    token = rig["client"].post(f"/forms/{rig['form']}/tokens", headers=headers).json()["token"]
    assert rig["client"].get(f"/f/{token}").status_code == 200
    assert rig["client"].delete(f"/forms/{rig['form']}/tokens/{token}", headers=headers).status_code == 204
    assert rig["client"].get(f"/f/{token}").status_code == 403
    assert rig["client"].post(
        f"/f/{token}/submissions", json={"answers": {"Who": "Purdue Pete", "Where": "Bed 72", "What": "Scout"}}
    ).status_code == 403


# -- records, filters, rendering ------------------------------------------------------


def test_records_filter_and_sort_query_params(rig):
    headers = auth(rig, "admin")
    url = f"/bases/{rig['base']}/tables/Activities/records"
    all_rows = rig["client"].get(url, headers=headers).json()
    assert len(all_rows) == 7
    field1 = rig["client"].get(url, params={"filter": "Where:eq:Field 1"}, headers=headers).json()
    assert len(field1) == 3
    heavy = rig["client"].get(url, params={"filter": "Duration:gt:100"}, headers=headers).json()
    assert len(heavy) == 1
    ordered = rig["client"].get(url, params={"sort": "Duration:desc"}, headers=headers).json()
    assert ordered[0]["id"] == heavy[0]["id"]
    bad = rig["client"].get(url, params={"filter": "Duration:contains:4"}, headers=headers)
    assert bad.status_code == 422
    assert bad.json()["error"]["code"] == "predicate-kind-mismatch"


def test_render_with_draft_query_parameter(rig):
    headers = auth(rig, "admin")
    empty = rig["client"].get(f"/forms/{rig['form']}", headers=headers).json()
    prompts = [e["prompt"] for e in empty["entries"]]
    assert "Seeding Rate (seeds/ac)" not in prompts
    draft = rig["client"].get(f"/forms/{rig['form']}", params={"What": "Plant/Transplant"}, headers=headers).json()
    prompts = [e["prompt"] for e in draft["entries"]]
    assert "Seeding Rate (seeds/ac)" in prompts and "Seeds planted" in prompts


def test_submission_idempotency_key_replays_original(rig):
    headers = {**auth(rig, "form-token"), "Idempotency-Key": "queue-0001"}
    body = {"answers": {"Who": "Purdue Pete", "Where": "Bed 72", "What": "Tillage", "Duration": "15"}}
    first = rig["client"].post(f"/forms/{rig['form']}/submissions", json=body, headers=headers)
    again = rig["client"].post(f"/forms/{rig['form']}/submissions", json=body, headers=headers)
    assert first.status_code == 201 and again.status_code == 201
    assert first.json()["id"] == again.json()["id"]
    rows = rig["client"].get(
        f"/bases/{rig['base']}/tables/Activities/records",
        params={"filter": "Duration:eq:15"},
        headers=auth(rig, "admin"),
    ).json()
    assert len(rows) == 1


def test_submission_validation_errors_carry_field(rig):
    response = rig["client"].post(
        f"/forms/{rig['form']}/submissions",
        json={"answers": {"Where": "Bed 72"}},
        headers=auth(rig, "form-token"),
    )
    assert response.status_code == 422
    error = response.json()["error"]
    assert error["code"] == "missing-required"
    assert error["field"] == "Who"


def test_export_csv_content_type_and_golden_bytes(rig):
    response = rig["client"].get(
        f"/bases/{rig['base']}/tables/Activities/export.csv",
        params={"datetime_format": "table1"},
        headers=auth(rig, "readonly"),
    )
    assert response.status_code == 200
    assert response.headers["content-type"].startswith("text/csv")
    assert response.content == GOLDEN_CSV.read_bytes()


def test_import_endpoint_round_trip(rig):
    headers = auth(rig, "admin")
    created = rig["client"].post("/bases", json={"name": "Clone", "template": "hort-activity"}, headers=headers)
    clone_id = created.json()["id"]
    response = rig["client"].post(
        f"/bases/{clone_id}/tables/Activities/import",
        params={"mode": "lenient", "datetime_format": "table1"},
        content=GOLDEN_CSV.read_bytes(),
        headers=headers,
    )
    assert response.json() == {"inserted": 7, "errors": []}
    rows = rig["client"].get(f"/bases/{clone_id}/tables/Activities/records", headers=headers).json()
    assert len(rows) == 7


def test_templates_endpoint(rig):
    docs = rig["client"].get("/templates", headers=auth(rig, "readonly")).json()
    assert [d["template_id"] for d in docs] == ["field-records", "hort-activity", "fsma", "marketing-delivery"]


def test_responses_deterministic_given_state(rig):
    headers = auth(rig, "admin")
    url = f"/bases/{rig['base']}/tables/Activities/records"
    assert rig["client"].get(url, headers=headers).content == rig["client"].get(url, headers=headers).content
    form_url = f"/forms/{rig['form']}"
    assert rig["client"].get(form_url, headers=headers).content == rig["client"].get(form_url, headers=headers).content


def test_base_doc_hides_tokens_and_grants_from_weak_roles(rig):
    readonly_doc = rig["client"].get(f"/bases/{rig['base']}", headers=auth(rig, "readonly")).json()
    assert "grants" not in readonly_doc and "form_tokens" not in readonly_doc
    admin_doc = rig["client"].get(f"/bases/{rig['base']}", headers=auth(rig, "admin")).json()
    assert "grants" in admin_doc and "form_tokens" in admin_doc


def test_forms_are_authored_via_api(rig):
    headers = auth(rig, "admin")
    base = rig["client"].post("/bases", json={"name": "Scouting"}, headers=headers).json()
    table = rig["client"].post(
        f"/bases/{base['id']}/tables",
        json={
            "name": "Walks",
            "fields": [
                {"name": "Crop", "kind": "single-select", "options": ["corn", "beans"]},
                {"name": "Pressure", "kind": "single-select", "options": ["low", "high"]},
                {"name": "Notes", "kind": "long-text"},
            ],
        },
        headers=headers,
    ).json()
    form = rig["client"].post(
        f"/bases/{base['id']}/forms",
        json={
            "table_id": table["id"],
            "title": "Scout walk",
            "entries": [
                {"field": "Crop", "required": True, "allow_add_option": True},
                {"field": "Pressure", "visibility": {"kind": "when-equals", "field": "Crop", "options": ["corn"]}},
                {"field": "Notes"},
            ],
        },
        headers=headers,
    )
    assert form.status_code == 201
    form_id = form.json()["id"]
    view = rig["client"].get(f"/forms/{form_id}", params={"Crop": "corn"}, headers=headers).json()
    assert [e["prompt"] for e in view["entries"]] == ["Crop", "Pressure", "Notes"]
    view = rig["client"].get(f"/forms/{form_id}", params={"Crop": "beans"}, headers=headers).json()
    assert [e["prompt"] for e in view["entries"]] == ["Crop", "Notes"]
    bad = rig["client"].post(
        f"/bases/{base['id']}/forms",
        json={"table_id": table["id"], "entries": [{"field": "created time"}]},
        headers=headers,
    )
    assert bad.status_code == 422
    assert bad.json()["error"]["code"] == "invalid-form"


def test_openapi_document_matches_repo_copy(rig):
    produced = rig["client"].get("/openapi.json").json()
    committed = json.loads((Path(__file__).parent.parent / "openapi.json").read_text("utf-8"))
    assert produced == committed
