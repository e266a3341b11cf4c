"""Unit workbooks on disk.

A unit workbook is a directory::

    manifest.json    unit_id, shelfmark, schema_version, sheets
    metric.csv       key,value rows
    documents.csv    header of field ids, one row per document
    map.csv          card_no,role,scan_file (present once the unit is mapped)

Cell values are kept as raw text; typing happens during validation.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from . import csvio
from .errors import (
    DuplicateHeader,
    HeaderUnknownField,
    MapSheetError,
    MissingManifest,
    MissingSheet,
    SchemaDowngrade,
    UnreadableFile,
    WorkbookError,
)
from .model import (
    DEFAULT_SCHEMA,
    DocumentRecord,
    MetricRecord,
    SchemaConfig,
    parse_shelfmark,
    slugify,
)
from .scanmap import ROLE_RE, ScanBinding

MANIFEST = "manifest.json"
METRIC = "metric.csv"
DOCUMENTS = "documents.csv"
MAP = "map.csv"
MAP_COLUMNS = ("card_no", "role", "scan_file")
SHEET_FILES = (MANIFEST, METRIC, DOCUMENTS, MAP)


@dataclass(frozen=True)
class UnitWorkbook:
    unit_id: str
    shelfmark: str
    metric: MetricRecord
    columns: tuple[str, ...]
    documents: tuple[DocumentRecord, ...] = ()
    map: tuple[ScanBinding, ...] | None = None
    schema_version: int = 1

    @property
    def sheets(self) -> list[str]:
        return ["metric", "documents"] + (["map"] if self.map is not None else [])

    def manifest(self) -> dict:
        return {
            "unit_id": self.unit_id,
            "shelfmark": self.shelfmark,
            "schema_version": self.schema_version,
            "sheets": self.sheets,
        }


def unit_id_for(shelfmark: str) -> str:
    return slugify(shelfmark)


def new_unit(shelfmark: str, schema: SchemaConfig = DEFAULT_SCHEMA, title: str = "") -> UnitWorkbook:
    parse_shelfmark(shelfmark)
    return UnitWorkbook(
        unit_id=unit_id_for(shelfmark),
        shelfmark=shelfmark,
        metric=MetricRecord(title=title, shelfmark=shelfmark),
        columns=schema.field_ids,
        schema_version=schema.version,
    )


def _documents_from_rows(header: Sequence[str], rows: Sequence[Sequence[str]], path: Path,
                         schema: SchemaConfig | None) -> tuple[tuple[str, ...], tuple[DocumentRecord, ...]]:
    seen: set[str] = set()
    for h in header:
        if h in seen:
            raise DuplicateHeader(f"column {h!r} appears twice", path=path, row=1)
        seen.add(h)
    if schema is not None:
        unknown = [h for h in header if h not in schema]
        if unknown:
            raise HeaderUnknownField(f"unknown field ids {unknown}", path=path, row=1)
    docs = []
    for n, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise WorkbookError(f"expected {len(header)} cells, got {len(r)}", path=path, row=n)
        docs.append(DocumentRecord(dict(zip(header, r))))
    return tuple(header), tuple(docs)


def _metric_from_rows(rows: Sequence[Sequence[str]], path: Path) -> MetricRecord:
    if rows and list(rows[0]) == ["key", "value"]:
        rows = rows[1:]
    seen: set[str] = set()
    items = []
    for n, r in enumerate(rows, start=2):
        if len(r) != 2:
            raise WorkbookError("metric rows must have exactly 2 cells", path=path, row=n)
        if r[0] in seen:
            raise DuplicateHeader(f"metric key {r[0]!r} repeated", path=path, row=n)
        seen.add(r[0])
        items.append((r[0], r[1]))
    return MetricRecord.from_items(items)


def _map_from_rows(rows: Sequence[Sequence[str]], path: Path) -> tuple[ScanBinding, ...]:
    if not rows or tuple(rows[0]) != MAP_COLUMNS:
        raise MapSheetError(f"header must be {','.join(MAP_COLUMNS)}", path=path, row=1)
    out = []
    seen: dict[tuple[int, str], int] = {}
    for n, r in enumerate(rows[1:], start=2):
        if len(r) != 3:
            raise MapSheetError("expected 3 cells", path=path, row=n)
        card, role, scan_file = r
        if not (card.isascii() and card.isdigit() and int(card) >= 1 and card[0] != "0"):
            raise MapSheetError(f"card_no {card!r} is not a positive integer", path=path, row=n)
        if not ROLE_RE.fullmatch(role):
            raise MapSheetError(f"role {role!r} is not a token", path=path, row=n)
        key = (int(card), role)
        if key in seen:
            raise MapSheetError(f"card {card} role {role!r} already bound on row {seen[key]}",
                                path=path, row=n)
        seen[key] = n
        out.append(ScanBinding(int(card), role, scan_file))
    return tuple(out)


def load_unit_workbook(path: str | Path, schema: SchemaConfig | None = None) -> UnitWorkbook:
    """Read a workbook directory.

    With ``schema`` given, header fields must all belong to it and the
    workbook may not be newer than it.
    """
    d = Path(path)
    mpath = d / MANIFEST
    if not mpath.is_file():
        raise MissingManifest("manifest.json not found", path=d)
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
        unit_id = manifest["unit_id"]
        shelfmark = manifest.get("shelfmark", "")
        version = int(manifest["schema_version"])
    except UnicodeDecodeError as exc:
        raise UnreadableFile(f"manifest is not UTF-8: {exc}", path=mpath) from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise UnreadableFile(f"bad manifest: {exc}", path=mpath) from exc
    if schema is not None and version > schema.version:
        raise SchemaDowngrade(f"{d}: workbook schema {version} is newer than {schema.version}")

    for name in (METRIC, DOCUMENTS):
        if not (d / name).is_file():
            raise MissingSheet(f"{name} not found", path=d)
    metric = _metric_from_rows(csvio.read_rows(d / METRIC), d / METRIC)
    doc_rows = csvio.read_rows(d / DOCUMENTS)
    if not doc_rows:
        raise WorkbookError("documents sheet has no header row", path=d / DOCUMENTS)
    columns, documents = _documents_from_rows(doc_rows[0], doc_rows[1:], d / DOCUMENTS, schema)
    bindings = None
    if (d / MAP).is_file():
        bindings = _map_from_rows(csvio.read_rows(d / MAP), d / MAP)
    elif "map" in manifest.get("sheets", []):
        raise MissingSheet("manifest lists a map sheet but map.csv is absent", path=d)
    return UnitWorkbook(unit_id, shelfmark, metric, columns, documents, bindings, version)


def save_unit_workbook(w: UnitWorkbook, path: str | Path) -> None:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    manifest = json.dumps(w.manifest(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    csvio.write_bytes_atomic(d / MANIFEST, manifest.encode("utf-8"))
    csvio.write_rows(d / METRIC, ("key", "value"), w.metric.items())
    csvio.write_rows(d / DOCUMENTS, w.columns,
                     ([rec.get(c) for c in w.columns] for rec in w.documents))
    if w.map is not None:
        csvio.write_rows(d / MAP, MAP_COLUMNS,
                         ([str(b.card_no), b.role, b.scan_file] for b in w.map))
    elif (d / MAP).exists():
        (d / MAP).unlink()


def migrate_workbook(w: UnitWorkbook, schema: SchemaConfig) -> UnitWorkbook:
    """Add the schema's missing columns (empty cells) and bump the version."""
    if w.schema_version > schema.version:
        raise SchemaDowngrade(f"workbook schema {w.schema_version} is newer than {schema.version}")
    missing = tuple(f for f in schema.field_ids if f not in w.columns)
    if not missing and w.schema_version == schema.version:
        return w
    docs = tuple(DocumentRecord({**rec.values, **{f: "" for f in missing}}) for rec in w.documents)
    return replace(w, columns=w.columns + missing, documents=docs, schema_version=schema.version)


# -- spreadsheet import ----------------------------------------------------


def _cell_text(v: object) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, float):
        return str(int(v)) if v.is_integer() else repr(v)
    if isinstance(v, _dt.datetime):
        return v.date().isoformat() if v.time() == _dt.time() else v.isoformat()
    if isinstance(v, (_dt.date, _dt.time)):
        return v.isoformat()
    return str(v)


def _sheet_rows(ws) -> list[list[str]]:
    rows = [[_cell_text(v) for v in r] for r in ws.iter_rows(values_only=True)]
    return [r for r in rows if any(c != "" for c in r)]


def _strip_trailing_blank_columns(rows: list[list[str]]) -> list[list[str]]:
    width = max((len(r) for r in rows), default=0)
    while width and all(len(r) < width or r[width - 1] == "" for r in rows):
        width -= 1
    return [(r + [""] * width)[:width] for r in rows]


def import_xlsx(path: str | Path, schema: SchemaConfig = DEFAULT_SCHEMA) -> UnitWorkbook:
    """Read an Office Open XML workbook with sheets Metric, Documents and optionally MAP.

    Styling is ignored. A Documents column with a blank header in column A
    is the message column written by in-sheet checking and is dropped.
    """
    import zipfile

    import openpyxl

    p = Path(path)
    try:
        book = openpyxl.load_workbook(p, read_only=True, data_only=True)
    except (OSError, zipfile.BadZipFile, KeyError, ValueError) as exc:
        raise UnreadableFile(f"cannot open spreadsheet: {exc}", path=p) from exc
    try:
        sheets = {name.lower(): book[name] for name in book.sheetnames}
        for required in ("metric", "documents"):
            if required not in sheets:
                raise MissingSheet(f"sheet {required!r} not found", path=p)
        metric_rows = [r[:2] + [""] * (2 - len(r[:2])) for r in _sheet_rows(sheets["metric"])]
        metric = _metric_from_rows(metric_rows, p)

        table = _strip_trailing_blank_columns(_sheet_rows(sheets["documents"]))
        if not table:
            raise MissingSheet("Documents sheet has no header row", path=p)
        header, body = table[0], table[1:]
        if header and header[0] == "":
            header, body = header[1:], [r[1:] for r in body]
            body = [r for r in body if any(c != "" for c in r)]
        if "" in header:
            raise HeaderUnknownField("blank column header in Documents sheet", path=p, row=1)
        columns, documents = _documents_from_rows(header, body, p, schema)

        bindings = None
        if "map" in sheets:
            map_rows = _strip_trailing_blank_columns(_sheet_rows(sheets["map"]))
            bindings = _map_from_rows(map_rows, p)
    finally:
        book.close()
    shelfmark = metric.shelfmark
    unit_id = unit_id_for(shelfmark) if shelfmark else slugify(p.stem)
    return UnitWorkbook(unit_id, shelfmark, metric, columns, documents, bindings, schema.version)
