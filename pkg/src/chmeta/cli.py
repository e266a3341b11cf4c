"""Command line interface.

Exit codes: 0 clean, 1 refused operation, 2 validation errors found,
3 I/O or format failure, 4 configuration error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import export as exp
from .check import annotate, check_unit
from .diagnostics import has_errors
from .errors import ChmetaError, ConfigError, WorkbookError
from .ingest import import_xlsx, save_unit_workbook
from .pipeline import (
    CustodyEvent,
    Store,
    append_custody,
    create_batch,
    load_batch,
    mark_exported,
    record_coverage,
    state_after_validation,
    sync_once,
)
from .sec import apply_proposal, load_proposals, save_catalog, save_proposals
from .semantic import render_report, validate_sec, validate_unit, write_report

EXIT_OK, EXIT_REFUSED, EXIT_INVALID, EXIT_IO, EXIT_CONFIG = 0, 1, 2, 3, 4


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ConfigError as exc:
            click.echo(f"configuration error: {exc}", err=True)
            ctx.exit(EXIT_CONFIG)
        except (WorkbookError, OSError) as exc:
            click.echo(f"I/O error: {exc}", err=True)
            ctx.exit(EXIT_IO)
        except ChmetaError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_REFUSED)


def _store(ctx: click.Context) -> Store:
    return ctx.obj["store"]


def _unit_id(store: Store, unit: str) -> str:
    p = Path(unit)
    if (p / "manifest.json").is_file():
        if p.resolve().parent != store.units_dir.resolve():
            raise click.UsageError(f"{unit} is not inside {store.units_dir}")
        return p.name
    if not (store.unit_dir(unit) / "manifest.json").is_file():
        raise WorkbookError("no such unit", path=store.unit_dir(unit))
    return unit


@click.group(cls=_Group)
@click.option("--root", type=click.Path(file_okay=False, path_type=Path), default=Path("."),
              show_default=True, help="Store root directory.")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def main(ctx: click.Context, root: Path, verbose: bool) -> None:
    """Metadata acquisition, validation and export for manuscript digitization."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj["store"] = Store(root)


@main.command("new-unit")
@click.argument("shelfmark")
@click.option("--title", default="")
@click.pass_context
def new_unit_cmd(ctx, shelfmark, title):
    """Create an empty unit workbook for SHELFMARK (e.g. 'SA, Keppler, Johannes')."""
    try:
        w = _store(ctx).create_unit(shelfmark, title)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="SHELFMARK") from exc
    click.echo(str(_store(ctx).unit_dir(w.unit_id)))


@main.command("import-xlsx")
@click.argument("xlsx", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.pass_context
def import_xlsx_cmd(ctx, xlsx):
    """Import a spreadsheet workbook into the store as a unit directory."""
    store = _store(ctx)
    w = import_xlsx(xlsx, store.schema())
    save_unit_workbook(w, store.unit_dir(w.unit_id))
    click.echo(str(store.unit_dir(w.unit_id)))


@main.command("check")
@click.argument("unit")
@click.pass_context
def check_cmd(ctx, unit):
    """Run the incremental checks and write diagnostics files."""
    store = _store(ctx)
    uid = _unit_id(store, unit)
    schema = store.schema()
    w = store.load_unit(uid, schema)
    ds = check_unit(w, schema)
    annotate(w, ds, store.unit_dir(uid))
    click.echo((store.unit_dir(uid) / "diagnostics.txt").read_text(encoding="utf-8"), nl=False)
    ctx.exit(EXIT_INVALID if has_errors(ds) else EXIT_OK)


def _validate_one(store: Store, uid: str, sec, schema) -> bool:
    w = store.load_unit(uid, schema)
    report = validate_unit(w, sec, schema)
    if report.workbook is not w:
        save_unit_workbook(report.workbook, store.unit_dir(uid))
    write_report(report, store.unit_dir(uid))
    data = store.read_state(uid)
    for event in state_after_validation(store.state(uid), w, check_unit(w, schema), report):
        store.advance(uid, event, data)
    click.echo(render_report(report), nl=False)
    return report.accepted


@main.command("validate")
@click.argument("unit", required=False)
@click.option("--all", "all_units", is_flag=True, help="Validate every unit in the store.")
@click.pass_context
def validate_cmd(ctx, unit, all_units):
    """Run full validation against the catalog and write report.txt/report.json."""
    store = _store(ctx)
    if bool(unit) == all_units:
        raise click.UsageError("give either UNIT or --all")
    schema, sec = store.schema(), store.load_sec()
    uids = store.unit_ids() if all_units else [_unit_id(store, unit)]
    results = [_validate_one(store, u, sec, schema) for u in uids]
    ctx.exit(EXIT_OK if all(results) else EXIT_INVALID)


@main.command("approve")
@click.argument("unit")
@click.pass_context
def approve_cmd(ctx, unit):
    """Record curator approval of a validated unit."""
    store = _store(ctx)
    uid = _unit_id(store, unit)
    click.echo(store.advance(uid, "curator-approval").value)


@main.group("sec", cls=_Group)
def sec_group():
    """Authority catalog maintenance."""


@sec_group.command("lint")
@click.pass_context
def sec_lint_cmd(ctx):
    """Validate the catalog and write sec/report.txt."""
    store = _store(ctx)
    report = validate_sec(store.load_sec())
    write_report(report, store.sec_dir)
    click.echo(render_report(report), nl=False)
    ctx.exit(EXIT_OK if report.accepted else EXIT_INVALID)


@sec_group.command("apply-proposals")
@click.option("--kind", type=click.Choice(["person", "place"]), required=True)
@click.option("--accept", "accept_rows", multiple=True, type=int, help="Proposal number to accept (1-based).")
@click.option("--reject", "reject_rows", multiple=True, type=int, help="Proposal number to reject (1-based).")
@click.option("--accept-all", is_flag=True, help="Accept every pending proposal.")
@click.pass_context
def sec_apply_cmd(ctx, kind, accept_rows, reject_rows, accept_all):
    """Apply coordinator decisions to pending proposals, in file order."""
    store = _store(ctx)
    catalog = store.load_sec()
    proposals = load_proposals(store.sec_dir, kind)
    decisions = {n: "accept" for n in accept_rows}
    decisions.update({n: "reject" for n in reject_rows})
    for i, p in enumerate(proposals, start=1):
        decision = decisions.get(i, "accept" if accept_all and p.status == "pending" else None)
        if decision is None:
            continue
        catalog, proposals[i - 1] = apply_proposal(catalog, p, decision)
        click.echo(f"proposal {i}: {proposals[i - 1].status}")
    save_catalog(catalog, store.sec_dir)
    save_proposals(store.sec_dir, kind, proposals)


@main.group("map", cls=_Group)
def map_group():
    """Scan mapping."""


@map_group.command("check")
@click.argument("unit")
@click.option("--scan-root", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.pass_context
def map_check_cmd(ctx, unit, scan_root):
    """Compare the map sheet with the files in the unit's scan folder."""
    store = _store(ctx)
    uid = _unit_id(store, unit)
    ds = record_coverage(store, uid, scan_root)
    for d in ds:
        click.echo(d.line())
    if not ds:
        click.echo("OK (0 findings)")
    ctx.exit(EXIT_INVALID if has_errors(ds) else EXIT_OK)


@main.group("batch", cls=_Group)
def batch_group():
    """Batch assembly."""


@batch_group.command("create")
@click.option("--min", "min_units", type=click.IntRange(min=1), default=1, show_default=True)
@click.pass_context
def batch_create_cmd(ctx, min_units):
    """Collect all accepted units into a new batch."""
    batch = create_batch(_store(ctx), min_units)
    click.echo(json.dumps(batch.to_dict(), indent=2))


@main.command("export")
@click.argument("target")
@click.option("--format", "fmt", type=click.Choice(["edm", "cidoc", "ead", "dc"]), required=True)
@click.option("--base-iri", default=exp.IriPolicy.base, show_default=True)
@click.pass_context
def export_cmd(ctx, target, fmt, base_iri):
    """Export a unit (or every unit of a batch id) to unit/export/ or batches/<id>/."""
    store = _store(ctx)
    schema, sec = store.schema(), store.load_sec()
    mapping = exp.load_mapping(store.mapping_path())
    policy = exp.IriPolicy(base_iri)
    if (store.batches_dir / f"{target}.json").is_file():
        uids = list(load_batch(store, target).unit_ids)
        out_dir = store.batches_dir / target
    else:
        uids = [_unit_id(store, target)]
        out_dir = store.unit_dir(uids[0]) / "export"
    units = [store.load_unit(u, schema) for u in uids]
    if fmt == "ead":
        meta = {"id": target, "title": target if len(units) > 1 else units[0].metric.title}
        path = out_dir / "ead.xml"
        exp.write_text(path, exp.export_ead(units, meta, sec, schema))
        click.echo(str(path))
    for w in units:
        udir = store.unit_dir(w.unit_id) / "export"
        if fmt == "edm":
            path = udir / "edm.ttl"
            exp.write_text(path, exp.serialize_turtle(exp.export_edm(w, sec, policy, schema, mapping)))
        elif fmt == "cidoc":
            path = udir / "cidoc.ttl"
            exp.write_text(path, exp.serialize_turtle(exp.export_cidoc(w, sec, policy, schema, mapping)))
        elif fmt == "dc":
            path = udir / "dc.csv"
            exp.write_dc(path, exp.export_dc(w, mapping))
        else:
            mark_exported(store, w.unit_id)
            continue
        click.echo(str(path))
        mark_exported(store, w.unit_id)


@main.command("sync-once")
@click.option("--root", "sync_root", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Store root (overrides the global --root).")
@click.pass_context
def sync_once_cmd(ctx, sync_root):
    """Validate every unit changed since its last report."""
    root = sync_root if sync_root is not None else _store(ctx).root
    summary = sync_once(root)
    click.echo(json.dumps(summary.to_dict(), indent=2))
    if summary.failed:
        ctx.exit(EXIT_IO)
    ctx.exit(EXIT_INVALID if summary.rejected else EXIT_OK)


@main.group("custody", cls=_Group)
def custody_group():
    """Custody of original manuscripts."""


@custody_group.command("log")
@click.argument("unit")
@click.option("--from", "from_party", required=True)
@click.option("--to", "to_party", required=True)
@click.option("--note", default="")
@click.pass_context
def custody_log_cmd(ctx, unit, from_party, to_party, note):
    """Record a handover of a unit's originals."""
    store = _store(ctx)
    uid = _unit_id(store, unit)
    ledger = append_custody(store.custody_path, CustodyEvent(uid, from_party, to_party, note=note))
    click.echo(f"{uid} held by {ledger.holder(uid)}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
