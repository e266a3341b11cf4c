"""Structured metadata acquisition, two-stage validation, scan mapping and
knowledge-graph export for manuscript digitization projects."""

from .check import annotate, check_row, check_unit
from .diagnostics import Diagnostic
from .ingest import UnitWorkbook, import_xlsx, load_unit_workbook, migrate_workbook, save_unit_workbook
from .model import (
    DEFAULT_SCHEMA,
    Category,
    DateExpression,
    DocumentNumber,
    DocumentRecord,
    FieldSpec,
    MetricRecord,
    PartialDate,
    SchemaConfig,
    Shelfmark,
    applicable_fields,
    blocked_fields,
    load_schema,
    parse_date_expression,
    parse_document_number,
    parse_shelfmark,
)
from .pipeline import UnitState, advance, create_batch, record_custody, sync_once
from .scanmap import CardRange, ScanBinding, check_coverage, parse_card_range, resolve_scan_folder
from .sec import SecCatalog, SecId, allocate_id, apply_proposal, lint_authority_url, resolve_ref
from .semantic import (
    ValidationReport,
    check_lifespan,
    check_refs,
    check_sequencing,
    ensure_map_sheet,
    render_report,
    validate_sec,
    validate_unit,
)

__version__ = "0.1.0"
