"""Incremental row and workbook checks.

These are the checks that run while a unit is being described: syntax of
each value, mandatory fields, fields blocked by the document's category,
metric-first ordering and duplicate document numbers. Findings are data;
nothing here raises for bad metadata.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import replace
from pathlib import Path
from typing import Callable

from . import csvio
from .diagnostics import Diagnostic, by_severity, diag
from .errors import CalendarInvalid, RangeReversed
from .ingest import UnitWorkbook
from .model import (
    DEFAULT_SCHEMA,
    DocumentRecord,
    SchemaConfig,
    applicable_fields,
    parse_date_expression,
    parse_document_number,
)
from .scanmap import parse_card_range
from .sec import lint_authority_url, parse_sec_id


def _parse_integer(s: str) -> int:
    body = s[1:] if s[:1] in "+-" else s
    if not (body.isascii() and body.isdigit()):
        raise ValueError(f"{s!r} is not an integer")
    return int(s)


_PARSERS: dict[str, tuple[Callable[[str], object], str]] = {
    "document-number": (parse_document_number, "DOCNO_INVALID"),
    "date-expression": (parse_date_expression, "DATE_SYNTAX"),
    "sec-person-ref": (parse_sec_id, "SECREF_SYNTAX"),
    "sec-place-ref": (parse_sec_id, "SECREF_SYNTAX"),
    "card-range": (parse_card_range, "CARDS_INVALID"),
    "integer": (_parse_integer, "INTEGER_INVALID"),
}


def _parse_value(kind: str, field_id: str, value: str, row: int) -> tuple[object, Diagnostic | None]:
    if kind == "text":
        return value, None
    if kind == "url":
        found = [d for d in lint_authority_url(value, sheet="documents", row=row, column=field_id)
                 if d.severity == "error"]
        return (None, found[0]) if found else (value, None)
    parser, code = _PARSERS[kind]
    try:
        return parser(value), None
    except CalendarInvalid as exc:
        return None, diag("DATE_INVALID", "documents", row, field_id, str(exc))
    except RangeReversed as exc:
        if kind == "date-expression":
            return None, diag("DATE_RANGE_REVERSED", "documents", row, field_id, str(exc))
        return None, diag(code, "documents", row, field_id, str(exc))
    except ValueError as exc:
        return None, diag(code, "documents", row, field_id, str(exc))


def _check_row(r: DocumentRecord, schema: SchemaConfig, row: int) -> tuple[list[Diagnostic], dict]:
    ds: list[Diagnostic] = []
    parsed: dict[str, object] = {}
    category = r.category
    applicable = applicable_fields(category, schema) if category is not None else None
    for spec in schema.fields:
        value = r.get(spec.id)
        blocked = applicable is not None and spec.id not in applicable
        if blocked:
            if value:
                ds.append(diag("BLOCKED_FIELD", "documents", row, spec.id,
                               f"{spec.label!r} is not used for category {int(category)} "
                               f"({category.label})"))
            continue
        if not value:
            if spec.mandatory:
                ds.append(diag("MANDATORY_MISSING", "documents", row, spec.id,
                               f"{spec.label!r} is mandatory"))
            continue
        typed, finding = _parse_value(spec.value_kind, spec.id, value, row)
        if finding is not None:
            ds.append(finding)
        else:
            parsed[spec.id] = typed
    return ds, parsed


def check_row(r: DocumentRecord, schema: SchemaConfig = DEFAULT_SCHEMA, row: int = 2) -> list[Diagnostic]:
    """Findings for one documents-sheet row, in schema field order.

    The row's category comes from its document number; if that number does
    not parse, category blocking is skipped and only the number is reported.
    """
    return _check_row(r, schema, row)[0]


def parse_record(r: DocumentRecord, schema: SchemaConfig = DEFAULT_SCHEMA) -> DocumentRecord:
    """Copy of ``r`` with ``parsed`` holding every value that checked cleanly."""
    return replace(r, parsed=_check_row(r, schema, 2)[1])


def check_metric(w: UnitWorkbook) -> list[Diagnostic]:
    ds = []
    m = w.metric
    if m.shelfmark and m.parsed_shelfmark() is None:
        ds.append(diag("SHELFMARK_INVALID", "metric", 3, "shelfmark",
                       f"{m.shelfmark!r} is not of the form 'SA, <name>'"))
    if m.card_count and m.parsed_card_count() is None:
        ds.append(diag("CARD_COUNT_INVALID", "metric", 4, "card_count",
                       f"{m.card_count!r} is not a non-negative integer"))
    return ds


def duplicate_docnos(w: UnitWorkbook) -> list[Diagnostic]:
    seen: dict[str, int] = {}
    ds = []
    for i, rec in enumerate(w.documents):
        doc_no = rec.get("doc_no")
        if not doc_no or rec.doc_no is None:
            continue
        if doc_no in seen:
            ds.append(diag("DUPLICATE_DOCNO", "documents", i + 2, "doc_no",
                           f"{doc_no} already used on row {seen[doc_no]}"))
        else:
            seen[doc_no] = i + 2
    return ds


def check_unit(w: UnitWorkbook, schema: SchemaConfig = DEFAULT_SCHEMA) -> list[Diagnostic]:
    if w.documents and not w.metric.is_complete:
        return [diag("METRIC_FIRST", "metric", 1, "row",
                     "fill in the metric sheet (title and shelfmark) before describing documents")]
    ds = check_metric(w)
    for i, rec in enumerate(w.documents):
        ds.extend(check_row(rec, schema, i + 2))
    ds.extend(duplicate_docnos(w))
    return ds


# -- annotation output -----------------------------------------------------


def column_a(ds: list[Diagnostic]) -> dict[tuple[str, int], str]:
    """Per-row message text, the equivalent of the spreadsheet's message column."""
    grouped: dict[tuple[str, int], list[str]] = defaultdict(list)
    for d in by_severity(ds):
        grouped[(d.sheet, d.row)].append(f"{d.code} {d.column}: {d.message}")
    return {k: "; ".join(v) for k, v in sorted(grouped.items())}


def render_diagnostics(ds: list[Diagnostic]) -> str:
    if not ds:
        return "OK (0 findings)\n"
    return "".join(d.line() + "\n" for d in by_severity(ds))


def annotate(w: UnitWorkbook, ds: list[Diagnostic], path: str | Path) -> dict[tuple[str, int], str]:
    """Write ``diagnostics.json``, ``diagnostics.txt`` and ``column_a.csv`` into ``path``.

    Returns the per-row message map that ``column_a.csv`` holds.
    """
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    ordered = by_severity(ds)
    payload = json.dumps([x.to_dict() for x in ordered], indent=2, ensure_ascii=False) + "\n"
    csvio.write_bytes_atomic(d / "diagnostics.json", payload.encode("utf-8"))
    csvio.write_bytes_atomic(d / "diagnostics.txt", render_diagnostics(ordered).encode("utf-8"))
    messages = column_a(ordered)
    worst: dict[tuple[str, int], str] = {}
    for x in ordered:
        worst.setdefault((x.sheet, x.row), x.severity)
    csvio.write_rows(d / "column_a.csv", ("sheet", "row", "severity", "messages"),
                     ([s, str(r), worst[(s, r)], text] for (s, r), text in messages.items()))
    return messages


def read_diagnostics(path: str | Path) -> list[Diagnostic]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [Diagnostic.from_dict(x) for x in data]

