"""Unit lifecycle, batches, custody of originals and the sync sweep.

A store is a directory tree::

    <root>/schema.toml           optional schema extension
    <root>/mapping.toml          optional export mapping override
    <root>/sec/                  authority catalog
    <root>/units/<unit_id>/      unit workbooks (+ state.json, reports, export/)
    <root>/batches/<id>.json     batches
    <root>/custody.csv           append-only custody ledger
"""

from __future__ import annotations

import datetime as _dt
import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from . import csvio
from .check import check_unit
from .diagnostics import Diagnostic, has_errors
from .errors import ChmetaError, HolderMismatch, IllegalTransition, NotEnoughUnits, WorkbookError
from .ingest import SHEET_FILES, UnitWorkbook, load_unit_workbook, migrate_workbook, new_unit, save_unit_workbook
from .model import DEFAULT_SCHEMA, SchemaConfig, load_schema
from .scanmap import check_coverage, list_scan_files, resolve_scan_folder
from .sec import SecCatalog, load_catalog
from .semantic import ValidationReport, validate_sec, validate_unit, write_report

log = logging.getLogger(__name__)


class UnitState(str, enum.Enum):
    CREATED = "Created"
    METRIC_FILLED = "MetricFilled"
    IN_DESCRIPTION = "InDescription"
    CHECKED = "Checked"
    VALIDATED = "Validated"
    ACCEPTED = "Accepted"
    BATCHED = "Batched"
    SCANNED = "Scanned"
    MAPPED = "Mapped"
    EXPORTED = "Exported"


S = UnitState
EVENTS = (
    "metric-complete",
    "rows-added",
    "program1-clean",
    "program1-failed",
    "program2-accepted",
    "program2-rejected",
    "curator-approval",
    "batch-inclusion",
    "scans-arrived",
    "coverage-clean",
    "export-done",
)
_FAILURES = ("program1-failed", "program2-rejected")
_DESCRIBING = (S.METRIC_FILLED, S.IN_DESCRIPTION, S.CHECKED, S.VALIDATED, S.ACCEPTED)

TRANSITIONS: dict[tuple[UnitState, str], UnitState] = {
    (S.CREATED, "metric-complete"): S.METRIC_FILLED,
    (S.METRIC_FILLED, "rows-added"): S.IN_DESCRIPTION,
    (S.IN_DESCRIPTION, "rows-added"): S.IN_DESCRIPTION,
    (S.IN_DESCRIPTION, "program1-clean"): S.CHECKED,
    (S.CHECKED, "program2-accepted"): S.VALIDATED,
    (S.VALIDATED, "curator-approval"): S.ACCEPTED,
    (S.ACCEPTED, "batch-inclusion"): S.BATCHED,
    (S.BATCHED, "scans-arrived"): S.SCANNED,
    (S.SCANNED, "coverage-clean"): S.MAPPED,
    (S.MAPPED, "export-done"): S.EXPORTED,
    **{(s, e): S.IN_DESCRIPTION for s in _DESCRIBING for e in _FAILURES},
}


def advance(state: UnitState, event: str) -> UnitState:
    try:
        return TRANSITIONS[(UnitState(state), event)]
    except KeyError:
        raise IllegalTransition(f"event {event!r} is not allowed in state {UnitState(state).value}") from None


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def _write_json(path: Path, data: object) -> None:
    text = json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    csvio.write_bytes_atomic(path, text.encode("utf-8"))


def file_stamp(directory: Path, names: Iterable[str]) -> list[list]:
    """(name, mtime_ns, size) of each present file; the change-detection key."""
    out = []
    for name in names:
        try:
            st = (directory / name).stat()
        except FileNotFoundError:
            continue
        out.append([name, st.st_mtime_ns, st.st_size])
    return out


# -- store -----------------------------------------------------------------


class Store:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.units_dir = self.root / "units"
        self.sec_dir = self.root / "sec"
        self.batches_dir = self.root / "batches"
        self.custody_path = self.root / "custody.csv"

    def schema(self) -> SchemaConfig:
        path = self.root / "schema.toml"
        return load_schema(path) if path.exists() else DEFAULT_SCHEMA

    def mapping_path(self) -> Path | None:
        path = self.root / "mapping.toml"
        return path if path.exists() else None

    def load_sec(self) -> SecCatalog:
        return load_catalog(self.sec_dir)

    def unit_dir(self, unit_id: str) -> Path:
        return self.units_dir / unit_id

    def unit_ids(self) -> list[str]:
        if not self.units_dir.is_dir():
            return []
        return sorted(p.name for p in self.units_dir.iterdir() if (p / "manifest.json").is_file())

    def load_unit(self, unit_id: str, schema: SchemaConfig | None = None) -> UnitWorkbook:
        return load_unit_workbook(self.unit_dir(unit_id), schema)

    def read_state(self, unit_id: str) -> dict:
        path = self.unit_dir(unit_id) / "state.json"
        if not path.exists():
            return {"unit_id": unit_id, "state": S.CREATED.value, "history": []}
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            raise WorkbookError(f"bad state file: {exc}", path=path) from exc

    def write_state(self, unit_id: str, data: dict) -> None:
        _write_json(self.unit_dir(unit_id) / "state.json", data)

    def state(self, unit_id: str) -> UnitState:
        return UnitState(self.read_state(unit_id)["state"])

    def advance(self, unit_id: str, event: str, data: dict | None = None) -> UnitState:
        data = data if data is not None else self.read_state(unit_id)
        old = UnitState(data["state"])
        new = advance(old, event)
        data["state"] = new.value
        data.setdefault("history", []).append({"event": event, "from": old.value, "to": new.value, "at": _now()})
        self.write_state(unit_id, data)
        return new

    def create_unit(self, shelfmark: str, title: str = "") -> UnitWorkbook:
        w = new_unit(shelfmark, self.schema(), title)
        d = self.unit_dir(w.unit_id)
        if (d / "manifest.json").exists():
            raise WorkbookError("unit already exists", path=d)
        save_unit_workbook(w, d)
        self.write_state(w.unit_id, {"unit_id": w.unit_id, "state": S.CREATED.value, "history": []})
        return w


# -- state updates from validation -----------------------------------------


def _try(state: UnitState, event: str) -> UnitState:
    return TRANSITIONS.get((state, event), state)


def state_after_validation(state: UnitState, w: UnitWorkbook, program1: list[Diagnostic],
                           report: ValidationReport) -> list[str]:
    """Events to fire, in order, given what a validation run established."""
    events = []
    s = state

    def fire(e: str) -> None:
        nonlocal s
        if (s, e) in TRANSITIONS:
            events.append(e)
            s = TRANSITIONS[(s, e)]

    if w.metric.is_complete:
        fire("metric-complete")
    if w.documents:
        if s == S.METRIC_FILLED:
            fire("rows-added")
    if report.accepted:
        if s == S.IN_DESCRIPTION and w.documents:
            fire("program1-clean")
        fire("program2-accepted")
    else:
        fire("program1-failed" if has_errors(program1) else "program2-rejected")
    return events


# -- batches ---------------------------------------------------------------


@dataclass(frozen=True)
class Batch:
    batch_id: str
    unit_ids: tuple[str, ...]
    created_at: str
    status: str = "open"

    def to_dict(self) -> dict:
        return {"batch_id": self.batch_id, "unit_ids": list(self.unit_ids),
                "created_at": self.created_at, "status": self.status}


BATCH_STATUSES = ("open", "processing", "done")


def load_batch(store: Store, batch_id: str) -> Batch:
    data = json.loads((store.batches_dir / f"{batch_id}.json").read_text(encoding="utf-8"))
    return Batch(data["batch_id"], tuple(data["unit_ids"]), data["created_at"], data["status"])


def list_batches(store: Store) -> list[str]:
    if not store.batches_dir.is_dir():
        return []
    return sorted(p.stem for p in store.batches_dir.glob("batch-*.json"))


def create_batch(store: Store, min_units: int = 1) -> Batch:
    """Gather every Accepted unit into a new batch, or refuse if too few."""
    if min_units < 1:
        raise ValueError("min_units must be >= 1")
    ready = [u for u in store.unit_ids() if store.state(u) == S.ACCEPTED]
    if len(ready) < min_units:
        raise NotEnoughUnits(f"{len(ready)} accepted unit(s), batch needs {min_units}")
    numbers = [int(b.split("-", 1)[1]) for b in list_batches(store)]
    batch = Batch(f"batch-{max(numbers, default=0) + 1:04d}", tuple(ready), _now())
    store.batches_dir.mkdir(parents=True, exist_ok=True)
    _write_json(store.batches_dir / f"{batch.batch_id}.json", batch.to_dict())
    for u in ready:
        store.advance(u, "batch-inclusion")
    return batch


def set_batch_status(store: Store, batch_id: str, status: str) -> Batch:
    b = load_batch(store, batch_id)
    if BATCH_STATUSES.index(status) < BATCH_STATUSES.index(b.status):
        raise IllegalTransition(f"batch {batch_id} cannot go from {b.status} to {status}")
    b = Batch(b.batch_id, b.unit_ids, b.created_at, status)
    _write_json(store.batches_dir / f"{batch_id}.json", b.to_dict())
    return b


# -- custody ---------------------------------------------------------------

CUSTODY_COLUMNS = ("unit_id", "from_party", "to_party", "timestamp", "note")


@dataclass(frozen=True)
class CustodyEvent:
    unit_id: str
    from_party: str
    to_party: str
    timestamp: str = field(default_factory=_now)
    note: str = ""

    def row(self) -> list[str]:
        return [self.unit_id, self.from_party, self.to_party, self.timestamp, self.note]


@dataclass(frozen=True)
class CustodyLedger:
    events: tuple[CustodyEvent, ...] = ()

    def holders(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for e in self.events:
            out[e.unit_id] = e.to_party
        return out

    def holder(self, unit_id: str) -> str | None:
        return self.holders().get(unit_id)


def record_custody(ledger: CustodyLedger, e: CustodyEvent) -> CustodyLedger:
    """Append a handover. The first handover of a unit establishes its holder."""
    if not e.from_party or not e.to_party:
        raise HolderMismatch("both parties must be named")
    if e.from_party == e.to_party:
        raise HolderMismatch(f"{e.from_party} cannot hand {e.unit_id} to themselves")
    current = ledger.holder(e.unit_id)
    if current is not None and current != e.from_party:
        raise HolderMismatch(f"{e.unit_id} is held by {current!r}, not {e.from_party!r}")
    return CustodyLedger(ledger.events + (e,))


def load_custody(path: str | Path) -> CustodyLedger:
    path = Path(path)
    if not path.exists():
        return CustodyLedger()
    rows = csvio.read_rows(path)
    ledger = CustodyLedger()
    for n, r in enumerate(rows[1:], start=2):
        if len(r) != len(CUSTODY_COLUMNS):
            raise WorkbookError("malformed custody row", path=path, row=n)
        ledger = record_custody(ledger, CustodyEvent(*r))
    return ledger


def append_custody(path: str | Path, e: CustodyEvent) -> CustodyLedger:
    path = Path(path)
    ledger = record_custody(load_custody(path), e)
    data = csvio.dump_rows(CUSTODY_COLUMNS, [e.row()])
    if path.exists():
        data = data.split(b"\r\n", 1)[1]
    with open(path, "ab") as fh:
        fh.write(data)
    return ledger


# -- coverage and export bookkeeping ---------------------------------------


def record_coverage(store: Store, unit_id: str, scan_root: str | Path) -> list[Diagnostic]:
    """Check scan coverage for a unit, write ``coverage.*`` and advance its state."""
    w = store.load_unit(unit_id)
    files = list_scan_files(resolve_scan_folder(unit_id, scan_root))
    ds = check_coverage(w, files)
    write_report(ValidationReport(unit_id, tuple(ds)), store.unit_dir(unit_id), stem="coverage")
    state = store.state(unit_id)
    if state == S.BATCHED and files:
        state = store.advance(unit_id, "scans-arrived")
    if state == S.SCANNED and not has_errors(ds):
        store.advance(unit_id, "coverage-clean")
    return ds


def mark_exported(store: Store, unit_id: str) -> None:
    if store.state(unit_id) == S.MAPPED:
        store.advance(unit_id, "export-done")


# -- sync ------------------------------------------------------------------


@dataclass
class SyncSummary:
    processed: int = 0
    skipped: int = 0
    accepted: int = 0
    rejected: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)
    sec_validated: bool = False

    @property
    def failed(self) -> int:
        return len(self.failures)

    def to_dict(self) -> dict:
        return {"processed": self.processed, "skipped": self.skipped, "accepted": self.accepted,
                "rejected": self.rejected, "failed": self.failed,
                "failures": [list(f) for f in self.failures], "sec_validated": self.sec_validated}


SEC_FILES = ("persons.csv", "places.csv", "tombstones.txt")


def _sync_sec(store: Store, sec: SecCatalog) -> bool:
    if not store.sec_dir.is_dir():
        return False
    stamp_path = store.sec_dir / "state.json"
    stamp = file_stamp(store.sec_dir, SEC_FILES)
    old = json.loads(stamp_path.read_text(encoding="utf-8")).get("stamp") if stamp_path.exists() else None
    if old == stamp:
        return False
    write_report(validate_sec(sec), store.sec_dir)
    _write_json(stamp_path, {"stamp": stamp})
    return True


def _sync_unit(store: Store, unit_id: str, sec: SecCatalog, schema: SchemaConfig) -> ValidationReport:
    d = store.unit_dir(unit_id)
    loaded = load_unit_workbook(d, schema)
    w = migrate_workbook(loaded, schema)
    report = validate_unit(w, sec, schema)
    if report.workbook is not loaded:
        save_unit_workbook(report.workbook, d)
    write_report(report, d)
    data = store.read_state(unit_id)
    state = UnitState(data["state"])
    for event in state_after_validation(state, w, check_unit(w, schema), report):
        store.advance(unit_id, event, data)
    return report


def sync_once(root: str | Path, sec: SecCatalog | None = None,
              schema: SchemaConfig | None = None) -> SyncSummary:
    """Validate every unit changed since its last report.

    Units whose sheet files are unchanged since the stamp recorded at the
    end of their previous run are skipped, so an immediate second run does
    nothing. The stamp also covers the catalog and schema files, since a
    change there can change a unit's verdict. A failing unit is recorded
    and the sweep continues.
    """
    store = Store(root)
    schema = schema if schema is not None else store.schema()
    sec = sec if sec is not None else store.load_sec()
    summary = SyncSummary()
    summary.sec_validated = _sync_sec(store, sec)
    shared = file_stamp(store.sec_dir, SEC_FILES) + file_stamp(store.root, ["schema.toml"])
    for unit_id in store.unit_ids():
        d = store.unit_dir(unit_id)
        try:
            previous = store.read_state(unit_id).get("stamp")
        except WorkbookError:
            previous = None
        if previous is not None and previous == file_stamp(d, SHEET_FILES) + shared:
            summary.skipped += 1
            continue
        try:
            report = _sync_unit(store, unit_id, sec, schema)
        except (ChmetaError, OSError) as exc:
            log.warning("sync: %s failed: %s", unit_id, exc)
            summary.failures.append((unit_id, str(exc)))
        else:
            summary.processed += 1
            if report.accepted:
                summary.accepted += 1
            else:
                summary.rejected += 1
        try:
            data = store.read_state(unit_id)
        except WorkbookError:
            data = {"unit_id": unit_id, "state": S.CREATED.value, "history": []}
        data["stamp"] = file_stamp(d, SHEET_FILES) + shared
        store.write_state(unit_id, data)
    return summary
