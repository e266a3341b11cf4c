"""Full-workbook validation against the authority catalog, with reports."""

from __future__ import annotations

import datetime as _dt
import json
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import csvio
from .check import check_metric, check_row, check_unit, duplicate_docnos
from .diagnostics import SHEETS, Diagnostic, count_severities, diag, has_errors
from .errors import PreconditionViolated
from .ingest import UnitWorkbook
from .model import DEFAULT_SCHEMA, SchemaConfig, compare_partial, parse_date_expression
from .scanmap import ScanBinding, cards_of, parse_card_range
from .sec import (
    SecCatalog,
    SecPersonEntry,
    SecPlaceEntry,
    lint_authority_url,
    parse_sec_id,
    resolve_ref,
)

MAX_LIFESPAN_YEARS = 110
SEED_ROLE = "recto"


@dataclass(frozen=True)
class ValidationReport:
    subject: str
    findings: tuple[Diagnostic, ...]
    generated_at: _dt.datetime = field(
        default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0))
    # workbook after a successful run (map sheet ensured); not serialized
    workbook: UnitWorkbook | None = field(default=None, compare=False, repr=False)

    @property
    def summary(self) -> dict[str, int]:
        return count_severities(self.findings)

    @property
    def verdict(self) -> str:
        return "rejected" if has_errors(self.findings) else "accepted"

    @property
    def accepted(self) -> bool:
        return self.verdict == "accepted"

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "generated_at": self.generated_at.isoformat(),
            "verdict": self.verdict,
            "summary": self.summary,
            "findings": [d.to_dict() for d in self.findings],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ValidationReport":
        return cls(
            data["subject"],
            tuple(Diagnostic.from_dict(d) for d in data["findings"]),
            _dt.datetime.fromisoformat(data["generated_at"]),
        )


# -- individual rules ------------------------------------------------------

_REF_KINDS = {"sec-person-ref": "person", "sec-place-ref": "place"}


def check_refs(w: UnitWorkbook, sec: SecCatalog, schema: SchemaConfig = DEFAULT_SCHEMA) -> list[Diagnostic]:
    """Every catalog reference must exist and be of the column's kind."""
    ref_fields = [(f.id, _REF_KINDS[f.value_kind]) for f in schema.fields if f.value_kind in _REF_KINDS]
    ds = []
    for i, rec in enumerate(w.documents):
        for fid, kind in ref_fields:
            value = rec.get(fid)
            if not value:
                continue
            try:
                ref = parse_sec_id(value)
            except ValueError:
                continue  # reported as SECREF_SYNTAX by the row check
            if ref.kind == kind:
                if resolve_ref(sec, ref) is None:
                    ds.append(diag("SECREF_UNKNOWN", "documents", i + 2, fid,
                                   f"{ref} is not in the {kind} catalog"))
            elif resolve_ref(sec, ref) is not None:
                ds.append(diag("SECREF_KIND_MISMATCH", "documents", i + 2, fid,
                               f"{ref} is a {ref.kind} entry, {fid} expects a {kind}"))
            else:
                ds.append(diag("SECREF_UNKNOWN", "documents", i + 2, fid,
                               f"{ref} is not in the catalog (and is not a {kind} id)"))
    return ds


def check_sequencing(w: UnitWorkbook, mode: str = "per-category") -> list[Diagnostic]:
    """Sequences within each group must be exactly 1..n.

    Groups are categories in ``per-category`` mode and the whole unit in
    ``per-unit`` mode. Repeats are errors, missing numbers a warning.
    """
    groups: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for i, rec in enumerate(w.documents):
        d = rec.doc_no
        if d is None:
            continue
        key = int(d.category) if mode == "per-category" else 0
        groups[key].append((i + 2, d.sequence))
    ds = []
    for key in sorted(groups):
        label = f"category {key}" if mode == "per-category" else "unit"
        seen: set[int] = set()
        for row, seq in groups[key]:
            if seq in seen:
                ds.append(diag("SEQ_DUPLICATE", "documents", row, "doc_no",
                               f"{label}: sequence {seq} used more than once"))
            seen.add(seq)
        missing = sorted(set(range(1, max(seen) + 1)) - seen)
        if missing:
            ds.append(diag("SEQ_GAP", "documents", 1, "doc_no",
                           f"{label}: missing sequence numbers {', '.join(map(str, missing))}"))
    return ds


def check_lifespan(p: SecPersonEntry, *, row: int = 1, sheet: str = "persons") -> list[Diagnostic]:
    try:
        birth = parse_date_expression(p.birth).start if p.birth else None
        death = parse_date_expression(p.death).start if p.death else None
    except ValueError:
        return []
    if birth is None or death is None:
        return []
    if compare_partial(death, birth) < 0:
        return [diag("LIFESPAN_NEGATIVE", sheet, row, "death",
                     f"{p.id}: death {p.death} precedes birth {p.birth}")]
    span = death.year - birth.year
    if span > MAX_LIFESPAN_YEARS:
        return [diag("LIFESPAN_EXCEEDED", sheet, row, "death",
                     f"{p.id}: life span of {span} years exceeds {MAX_LIFESPAN_YEARS}")]
    return []


def _entry_findings(e: SecPersonEntry | SecPlaceEntry, sheet: str, row: int, seen: dict) -> list[Diagnostic]:
    ds = []
    if e.id in seen:
        ds.append(diag("SEC_DUPLICATE_ID", sheet, row, "id", f"{e.id} already used on row {seen[e.id]}"))
    else:
        seen[e.id] = row
    if not e.preferred_name.strip():
        ds.append(diag("SEC_EMPTY_NAME", sheet, row, "preferred_name", f"{e.id} has no preferred name"))
    if isinstance(e, SecPersonEntry):
        bad_date = False
        for col in ("birth", "death"):
            raw = getattr(e, col)
            if not raw:
                continue
            try:
                parsed = parse_date_expression(raw)
            except ValueError as exc:
                ds.append(diag("SEC_DATE_INVALID", sheet, row, col, f"{e.id}: {exc}"))
                bad_date = True
                continue
            if parsed.kind != "single":
                ds.append(diag("SEC_DATE_INVALID", sheet, row, col, f"{e.id}: {raw!r} is not a single date"))
                bad_date = True
        if not bad_date:
            ds.extend(check_lifespan(e, row=row, sheet=sheet))
    for u in e.external_urls:
        ds.extend(lint_authority_url(u, sheet=sheet, row=row, column="external_urls"))
    return ds


def validate_sec(sec: SecCatalog) -> ValidationReport:
    ds: list[Diagnostic] = []
    seen: dict = {}
    for i, p in enumerate(sec.persons):
        ds.extend(_entry_findings(p, "persons", i + 2, seen))
    for i, p in enumerate(sec.places):
        ds.extend(_entry_findings(p, "places", i + 2, seen))
    return ValidationReport("SEC", tuple(ds))


# -- map sheet -------------------------------------------------------------


def seed_map(w: UnitWorkbook) -> tuple[ScanBinding, ...]:
    cards: set[int] = set()
    for rec in w.documents:
        if rec.get("cards"):
            cards |= cards_of(parse_card_range(rec.get("cards")))
    return tuple(ScanBinding(c, SEED_ROLE, "") for c in sorted(cards))


def ensure_map_sheet(w: UnitWorkbook, *, report: ValidationReport | None = None,
                     schema: SchemaConfig = DEFAULT_SCHEMA) -> UnitWorkbook:
    """Add a map sheet seeded with one blank row per declared card.

    The unit must be free of errors: according to ``report`` when given,
    otherwise according to the incremental checks.
    """
    if report is not None:
        if not report.accepted:
            raise PreconditionViolated(f"{w.unit_id}: report verdict is {report.verdict}")
    elif has_errors(check_unit(w, schema)):
        raise PreconditionViolated(f"{w.unit_id}: unit has validation errors")
    if w.map is not None:
        return w
    return replace(w, map=seed_map(w))


# -- whole unit ------------------------------------------------------------


def validate_unit(w: UnitWorkbook, sec: SecCatalog, schema: SchemaConfig = DEFAULT_SCHEMA) -> ValidationReport:
    """Incremental checks plus catalog references and sequencing.

    When the metric-first rule fires, rows are still checked here so the
    report covers the whole sheet. On zero errors the returned report's
    ``workbook`` carries the map sheet.
    """
    ds = check_unit(w, schema)
    if any(d.code == "METRIC_FIRST" for d in ds):
        ds += check_metric(w)
        for i, rec in enumerate(w.documents):
            ds += check_row(rec, schema, i + 2)
        ds += duplicate_docnos(w)
    if not w.documents:
        if w.metric.is_complete:
            ds.append(diag("NO_DOCUMENTS", "documents", 1, "row", "unit has no documents yet"))
        else:
            ds.append(diag("METRIC_INCOMPLETE", "metric", 1, "row", "metric title or shelfmark missing"))
    ds += check_refs(w, sec, schema)
    ds += check_sequencing(w, schema.sequencing_mode)
    out = w
    if not has_errors(ds):
        out = ensure_map_sheet(w, schema=schema, report=ValidationReport(w.unit_id, tuple(ds)))
        if out.map is not w.map:
            ds.append(diag("MAP_CREATED", "map", 1, "row",
                           f"map sheet created with {len(out.map)} seeded card rows"))
    return ValidationReport(w.unit_id, tuple(ds), workbook=out)


# -- rendering -------------------------------------------------------------


def _plural(n: int, word: str) -> str:
    return f"{n} {word}" if n == 1 or word == "info" else f"{n} {word}s"


def summary_line(r: ValidationReport) -> str:
    s = r.summary
    return f"{_plural(s['error'], 'error')}, {_plural(s['warning'], 'warning')}, {_plural(s['info'], 'info')}"


def render_report(r: ValidationReport) -> str:
    lines = [
        f"Validation report: {r.subject}",
        f"generated_at: {r.generated_at.isoformat()}",
        f"verdict: {r.verdict}",
        f"summary: {summary_line(r)}",
    ]
    grouped: dict[str, list[Diagnostic]] = defaultdict(list)
    for d in r.findings:
        grouped[d.sheet].append(d)
    if not grouped:
        lines.append("findings: none")
    for sheet in SHEETS:
        if sheet not in grouped:
            continue
        lines.append("")
        lines.append(f"[{sheet}]")
        for d in sorted(grouped[sheet], key=lambda d: d.row):
            lines.append(f"  R{d.row} {d.column}: {d.severity} {d.code} {d.message}")
    return "\n".join(lines) + "\n"


def write_report(r: ValidationReport, directory: str | Path, stem: str = "report") -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    csvio.write_bytes_atomic(d / f"{stem}.txt", render_report(r).encode("utf-8"))
    payload = json.dumps(r.to_dict(), indent=2, ensure_ascii=False) + "\n"
    csvio.write_bytes_atomic(d / f"{stem}.json", payload.encode("utf-8"))


def read_report(path: str | Path) -> ValidationReport:
    return ValidationReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

