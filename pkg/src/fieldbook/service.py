"""HTTP API over the engine.

Bearer auth everywhere: principal tokens for database access, form tokens for
the two form endpoints (also reachable through the shareable ``/f/{token}``
path). Every handler authenticates, then hands the actor to exactly one
engine call, which authorizes before any side effect; errors map to a JSON
body with a machine-readable code.
"""

from __future__ import annotations

from typing import Any

from fastapi import Depends, FastAPI, Header, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .engine import Engine
from .errors import AuthRequired, FieldbookError, ValidationError
from .records import Filter
from .tidycsv import ExportConfig

API_TITLE = "Fieldbook API"
API_VERSION = "0.1.0"


class CreateBaseBody(BaseModel):
    name: str
    template: str | None = None


class AddTableBody(BaseModel):
    name: str
    fields: list[dict] | None = None


class AddFieldBody(BaseModel):
    name: str
    kind: str
    unit_label: str | None = None
    options: list[str] = Field(default_factory=list)


class RecordBody(BaseModel):
    cells: dict[str, Any] = Field(default_factory=dict)


class NewOptionBody(BaseModel):
    field: str
    label: str


class SubmissionBody(BaseModel):
    answers: dict[str, Any] = Field(default_factory=dict)
    new_options: list[NewOptionBody] = Field(default_factory=list)


class GrantBody(BaseModel):
    principal: str
    role: str


class CommentBody(BaseModel):
    text: str


class FormBody(BaseModel):
    table_id: str
    title: str = "Entry form"
    description: str = ""
    entries: list[dict] = Field(default_factory=list)


def _bearer(authorization: str | None) -> str | None:
    if not authorization:
        return None
    if authorization.lower().startswith("bearer "):
        return authorization[7:].strip()
    return authorization.strip()


def _parse_filters(raw: list[str]) -> list[Filter]:
    filters = []
    for item in raw:
        parts = item.split(":", 2)
        if len(parts) < 2:
            raise ValidationError("bad-filter", f"filter {item!r} is not field:op[:value]")
        field, op = parts[0], parts[1]
        value = parts[2] if len(parts) == 3 else None
        filters.append(Filter(field=field, op=op, value=value))
    return filters


def _parse_sort(raw: str | None) -> tuple[str, str] | None:
    if raw is None:
        return None
    field, sep, direction = raw.rpartition(":")
    if not sep or direction not in ("asc", "desc"):
        raise ValidationError("bad-sort", f"sort {raw!r} is not field:asc|desc")
    return field, direction


def _export_config(
    datetime_format: str = "iso",
    joiner: str = "; ",
    bom: bool = False,
    header: bool = True,
) -> ExportConfig:
    return ExportConfig(
        datetime_format=datetime_format,
        multi_value_joiner=joiner,
        bom=bom,
        include_header=header,
    )


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title=API_TITLE, version=API_VERSION)
    # Bearer-token auth (no cookies), so a permissive CORS policy is safe and
    # lets the web client be served from anywhere.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["*"],
    )

    def actor_dep(authorization: str | None = Header(default=None)):
        return engine.authenticate(_bearer(authorization))

    @app.exception_handler(FieldbookError)
    async def fieldbook_error(request: Request, err: FieldbookError):
        return JSONResponse(status_code=err.status, content={"error": err.to_doc()})

    @app.get("/templates")
    def list_templates(actor=Depends(actor_dep)):
        return engine.list_templates(actor)

    @app.post("/bases", status_code=201)
    def create_base(body: CreateBaseBody, actor=Depends(actor_dep)):
        return engine.create_base(actor, body.name, template=body.template)

    @app.get("/bases")
    def list_bases(actor=Depends(actor_dep)):
        return engine.list_bases(actor)

    @app.get("/bases/{base_id}")
    def get_base(base_id: str, actor=Depends(actor_dep)):
        return engine.describe_base(actor, base_id)

    @app.post("/bases/{base_id}/tables", status_code=201)
    def add_table(base_id: str, body: AddTableBody, actor=Depends(actor_dep)):
        return engine.add_table(actor, base_id, body.name, body.fields)

    @app.post("/bases/{base_id}/tables/{table_ref}/fields", status_code=201)
    def add_field(base_id: str, table_ref: str, body: AddFieldBody, actor=Depends(actor_dep)):
        return engine.add_field(actor, base_id, table_ref, body.model_dump())

    @app.get("/bases/{base_id}/tables/{table_ref}/records")
    def list_records(
        base_id: str,
        table_ref: str,
        filter: list[str] = Query(default=[]),
        sort: str | None = Query(default=None),
        actor=Depends(actor_dep),
    ):
        return engine.query_records(actor, base_id, table_ref, _parse_filters(filter), _parse_sort(sort))

    @app.post("/bases/{base_id}/tables/{table_ref}/records", status_code=201)
    def insert_record(base_id: str, table_ref: str, body: RecordBody, actor=Depends(actor_dep)):
        return engine.insert_record(actor, base_id, table_ref, body.cells)

    @app.patch("/bases/{base_id}/tables/{table_ref}/records/{record_id}")
    def update_record(base_id: str, table_ref: str, record_id: str, body: RecordBody, actor=Depends(actor_dep)):
        return engine.update_record(actor, base_id, table_ref, record_id, body.cells)

    @app.delete("/bases/{base_id}/tables/{table_ref}/records/{record_id}", status_code=204)
    def delete_record(base_id: str, table_ref: str, record_id: str, actor=Depends(actor_dep)):
        engine.delete_record(actor, base_id, table_ref, record_id)
        return Response(status_code=204)

    @app.post("/bases/{base_id}/tables/{table_ref}/records/{record_id}/comments", status_code=201)
    def add_comment(base_id: str, table_ref: str, record_id: str, body: CommentBody, actor=Depends(actor_dep)):
        return engine.add_comment(actor, base_id, table_ref, record_id, body.text)

    @app.get("/bases/{base_id}/tables/{table_ref}/records/{record_id}/comments")
    def list_comments(base_id: str, table_ref: str, record_id: str, actor=Depends(actor_dep)):
        return engine.list_comments(actor, base_id, table_ref, record_id)

    @app.get("/bases/{base_id}/tables/{table_ref}/export.csv")
    def export_csv(
        base_id: str,
        table_ref: str,
        datetime_format: str = Query(default="iso"),
        joiner: str = Query(default="; "),
        bom: bool = Query(default=False),
        header: bool = Query(default=True),
        actor=Depends(actor_dep),
    ):
        data = engine.export_table(
            actor, base_id, table_ref, _export_config(datetime_format, joiner, bom, header)
        )
        return Response(content=data, media_type="text/csv; charset=utf-8")

    @app.post("/bases/{base_id}/tables/{table_ref}/import")
    async def import_csv(
        base_id: str,
        table_ref: str,
        request: Request,
        mode: str = Query(default="strict"),
        datetime_format: str = Query(default="iso"),
        joiner: str = Query(default="; "),
        actor=Depends(actor_dep),
    ):
        data = await request.body()
        result = engine.import_table(
            actor, base_id, table_ref, data, mode=mode, config=_export_config(datetime_format, joiner)
        )
        return {
            "inserted": result.inserted,
            "errors": [{"row": r, "field": f, "code": c} for r, f, c in result.errors],
        }

    @app.post("/bases/{base_id}/grants", status_code=201)
    def set_grant(base_id: str, body: GrantBody, actor=Depends(actor_dep)):
        return engine.set_grant(actor, base_id, body.principal, body.role)

    @app.get("/bases/{base_id}/grants")
    def list_grants(base_id: str, actor=Depends(actor_dep)):
        return engine.grants_doc(actor, base_id)

    @app.delete("/bases/{base_id}/grants/{principal_id}", status_code=204)
    def revoke_grant(base_id: str, principal_id: str, actor=Depends(actor_dep)):
        engine.revoke_grant(actor, base_id, principal_id)
        return Response(status_code=204)

    @app.post("/bases/{base_id}/forms", status_code=201)
    def add_form(base_id: str, body: FormBody, actor=Depends(actor_dep)):
        return engine.add_form(actor, base_id, body.model_dump())

    def _render(actor, form_id: str, request: Request):
        draft: dict[str, Any] = {}
        for key in request.query_params.keys():
            values = request.query_params.getlist(key)
            draft[key] = values if len(values) > 1 else values[0]
        return engine.render_form(actor, form_id, draft)

    @app.get("/forms/{form_id}")
    def render_form(form_id: str, request: Request, actor=Depends(actor_dep)):
        return _render(actor, form_id, request)

    @app.post("/forms/{form_id}/submissions", status_code=201)
    def submit_form(
        form_id: str,
        body: SubmissionBody,
        actor=Depends(actor_dep),
        idempotency_key: str | None = Header(default=None),
    ):
        return engine.submit_form(
            actor,
            form_id,
            body.answers,
            [(o.field, o.label) for o in body.new_options],
            idempotency_key=idempotency_key,
        )

    @app.post("/forms/{form_id}/tokens", status_code=201)
    def mint_token(form_id: str, actor=Depends(actor_dep)):
        return engine.mint_form_token(actor, form_id)

    @app.delete("/forms/{form_id}/tokens/{token}", status_code=204)
    def revoke_token(form_id: str, token: str, actor=Depends(actor_dep)):
        engine.revoke_form_token(actor, token)
        return Response(status_code=204)

    # Shareable form links: the token itself is the path segment, so a worker
    # only needs the URL.
    @app.get("/f/{token}")
    def render_shared(token: str, request: Request):
        actor = engine.authenticate(token)
        if actor.form_token is None:
            raise AuthRequired()
        return _render(actor, actor.form_token.form_id, request)

    @app.post("/f/{token}/submissions", status_code=201)
    def submit_shared(
        token: str,
        body: SubmissionBody,
        idempotency_key: str | None = Header(default=None),
    ):
        actor = engine.authenticate(token)
        if actor.form_token is None:
            raise AuthRequired()
        return engine.submit_form(
            actor,
            actor.form_token.form_id,
            body.answers,
            [(o.field, o.label) for o in body.new_options],
            idempotency_key=idempotency_key,
        )

    return app
