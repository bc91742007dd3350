"""Administrative command line.

The CLI drives the same engine the HTTP service uses (in process, as the
local admin principal), so there is no second validation path: init bases
from templates, load the demo rows, import/export CSV, manage sharing, and
run the server.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .demo import demo_clock, load_demo
from .engine import Engine
from .errors import FieldbookError
from .tidycsv import ExportConfig


@click.group()
@click.option(
    "--data-dir",
    envvar="FIELDBOOK_DATA_DIR",
    default="./fieldbook-data",
    type=click.Path(path_type=Path),
    help="Directory holding all bases (journals, snapshots, principals).",
)
@click.option("--json", "json_output", is_flag=True, help="Machine-readable output.")
@click.pass_context
def main(ctx, data_dir: Path, json_output: bool):
    """Self-hosted farm activity records."""
    ctx.ensure_object(dict)
    ctx.obj["data_dir"] = data_dir
    ctx.obj["json"] = json_output


def _fails_cleanly(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FieldbookError as err:
            click.echo(f"{err.code}: {err.message}", err=True)
            sys.exit(1)

    return wrapper


def _emit(ctx, doc: dict, lines: list[str]) -> None:
    if ctx.obj["json"]:
        click.echo(json.dumps(doc, indent=2, sort_keys=True))
    else:
        for line in lines:
            click.echo(line)


@main.command()
@click.option("--listen", default="127.0.0.1:8675", help="host:port to bind.")
@click.pass_context
@_fails_cleanly
def serve(ctx, listen: str):
    """Run the HTTP API server."""
    import uvicorn

    from .service import create_app

    engine = Engine(ctx.obj["data_dir"])
    for warning in engine.recovery_warnings:
        click.echo(f"recovery: {warning}", err=True)
    host, _, port = listen.rpartition(":")
    uvicorn.run(create_app(engine), host=host or "127.0.0.1", port=int(port or 8675))


@main.command()
@click.option("--template", default=None, help="Template id (see `fieldbook templates`).")
@click.option("--name", default="ACME FARMS", help="Name of the new base.")
@click.pass_context
@_fails_cleanly
def init(ctx, template: str | None, name: str):
    """Create a base, optionally from a built-in template."""
    engine = Engine(ctx.obj["data_dir"])
    try:
        _, admin_token = engine.ensure_principal("admin")
        doc = engine.create_base(engine.admin_actor(), name, template=template)
    finally:
        engine.close()
    lines = [f"base {doc['id']} ({doc['name']})"]
    lines += [f"  table {t['id']} ({t['name']})" for t in doc["tables"]]
    lines += [f"  form {f['id']} ({f['title']})" for f in doc["forms"]]
    lines.append(f"admin bearer token: {admin_token}")
    _emit(ctx, dict(doc, admin_token=admin_token), lines)


@main.command()
@click.pass_context
@_fails_cleanly
def templates(ctx):
    """List the built-in templates."""
    engine = Engine(ctx.obj["data_dir"])
    try:
        docs = engine.list_templates(engine.admin_actor())
    finally:
        engine.close()
    _emit(ctx, {"templates": docs}, [f"{d['template_id']}: {d['title']}" for d in docs])


@main.command()
@click.option("--base", "base_id", default=None, help="Existing base to load into (default: create one).")
@click.pass_context
@_fails_cleanly
def demo(ctx, base_id: str | None):
    """Load seven sample activity records through the entry form."""
    engine = Engine(ctx.obj["data_dir"], clock=demo_clock())
    try:
        doc = load_demo(engine, engine.admin_actor(), base_id)
    finally:
        engine.close()
    _emit(
        ctx,
        {"base": doc["id"], "table": doc["tables"][0]["id"], "form": doc["forms"][0]["id"]},
        [f"loaded 7 records into base {doc['id']} table {doc['tables'][0]['name']!r}"],
    )


@main.command()
@click.option("--base", "base_id", required=True)
@click.option("--table", "table_ref", required=True, help="Table id or name.")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--datetime-format", type=click.Choice(["iso", "table1"]), default="iso")
@click.option("--joiner", default="; ", help="Separator inside multi-select cells.")
@click.option("--bom", is_flag=True, help="Prefix a UTF-8 BOM for spreadsheet apps.")
@click.pass_context
@_fails_cleanly
def export(ctx, base_id: str, table_ref: str, out_path: Path, datetime_format: str, joiner: str, bom: bool):
    """Export a table as tidy CSV."""
    engine = Engine(ctx.obj["data_dir"])
    try:
        config = ExportConfig(datetime_format=datetime_format, multi_value_joiner=joiner, bom=bom)
        data = engine.export_table(engine.admin_actor(), base_id, table_ref, config)
    finally:
        engine.close()
    out_path.write_bytes(data)
    _emit(ctx, {"written": str(out_path), "bytes": len(data)}, [f"wrote {len(data)} bytes to {out_path}"])


@main.command(name="import")
@click.option("--base", "base_id", required=True)
@click.option("--table", "table_ref", required=True)
@click.option("--in", "in_path", required=True, type=click.Path(path_type=Path, exists=True))
@click.option("--mode", type=click.Choice(["strict", "lenient"]), default="strict")
@click.pass_context
@_fails_cleanly
def import_cmd(ctx, base_id: str, table_ref: str, in_path: Path, mode: str):
    """Import CSV rows into a table."""
    engine = Engine(ctx.obj["data_dir"])
    try:
        result = engine.import_table(engine.admin_actor(), base_id, table_ref, in_path.read_bytes(), mode=mode)
    finally:
        engine.close()
    lines = [f"{result.inserted} inserted, {len(result.errors)} errors"]
    lines += [f"  row {row} field {field!r}: {code}" for row, field, code in result.errors]
    _emit(
        ctx,
        {"inserted": result.inserted, "errors": [{"row": r, "field": f, "code": c} for r, f, c in result.errors]},
        lines,
    )
    if mode == "strict" and result.errors:
        sys.exit(1)


@main.command()
@click.option("--base", "base_id", required=True)
@click.option("--user", "principal_id", required=True)
@click.option("--role", required=True, type=click.Choice(["owner", "editor", "commenter", "readonly"]))
@click.pass_context
@_fails_cleanly
def grant(ctx, base_id: str, principal_id: str, role: str):
    """Share a base with a locally managed principal."""
    engine = Engine(ctx.obj["data_dir"])
    try:
        created, token = engine.ensure_principal(principal_id)
        engine.set_grant(engine.admin_actor(), base_id, principal_id, role)
    finally:
        engine.close()
    lines = [f"granted {role} on {base_id} to {principal_id}"]
    if created:
        lines.append(f"new principal; bearer token: {token}")
    _emit(ctx, {"principal": principal_id, "role": role, "token": token, "created": created}, lines)


@main.command()
@click.option("--form", "form_id", required=True)
@click.pass_context
@_fails_cleanly
def token(ctx, form_id: str):
    """Mint a submit-only form token (share it as /f/<token>)."""
    engine = Engine(ctx.obj["data_dir"])
    try:
        doc = engine.mint_form_token(engine.admin_actor(), form_id)
    finally:
        engine.close()
    _emit(ctx, doc, [f"form token: {doc['token']}", f"share link path: /f/{doc['token']}"])


if __name__ == "__main__":
    main()
