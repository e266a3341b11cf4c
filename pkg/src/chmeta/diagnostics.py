"""Cell-addressed validation findings and the registry of finding codes."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable

SEVERITIES = ("error", "warning", "info")
SHEETS = (
    "metric",
    "documents",
    "map",
    "persons",
    "places",
    "proposals_persons",
    "proposals_places",
)

# code -> (default severity, short description)
REGISTRY: dict[str, tuple[str, str]] = {
    # incremental checks
    "METRIC_FIRST": ("error", "documents entered before the metric sheet was complete"),
    "METRIC_INCOMPLETE": ("error", "metric title or shelfmark missing"),
    "SHELFMARK_INVALID": ("error", "shelfmark is not of the form 'SA, <name>'"),
    "CARD_COUNT_INVALID": ("error", "card count is not a non-negative integer"),
    "MANDATORY_MISSING": ("error", "mandatory field is empty"),
    "BLOCKED_FIELD": ("error", "field is not used for the document's category"),
    "DOCNO_INVALID": ("error", "document number is not '<category>.<sequence>'"),
    "DUPLICATE_DOCNO": ("error", "document number repeated within the unit"),
    "DATE_SYNTAX": ("error", "date does not match an accepted date format"),
    "DATE_INVALID": ("error", "date does not exist in the calendar"),
    "DATE_RANGE_REVERSED": ("error", "date range ends before it starts"),
    "CARDS_INVALID": ("error", "card range is malformed"),
    "SECREF_SYNTAX": ("error", "catalog reference is not a valid entry id"),
    "INTEGER_INVALID": ("error", "value is not an integer"),
    "URL_MALFORMED": ("error", "URL is not an absolute URL"),
    "URL_SCHEME": ("error", "URL scheme is not http or https"),
    # batch checks
    "NO_DOCUMENTS": ("info", "unit has no documents"),
    "SECREF_UNKNOWN": ("error", "catalog reference does not exist"),
    "SECREF_KIND_MISMATCH": ("error", "catalog reference points at the wrong kind of entry"),
    "SEQ_DUPLICATE": ("error", "sequence number used more than once"),
    "SEQ_GAP": ("warning", "sequence numbers are not contiguous"),
    "MAP_CREATED": ("info", "map sheet was created"),
    # catalog checks
    "LIFESPAN_EXCEEDED": ("error", "life span longer than 110 years"),
    "LIFESPAN_NEGATIVE": ("error", "death precedes birth"),
    "SEC_DUPLICATE_ID": ("error", "entry id used more than once"),
    "SEC_EMPTY_NAME": ("error", "preferred name is empty"),
    "SEC_DATE_INVALID": ("error", "birth or death date is malformed"),
    "URL_UNRECOGNIZED_AUTHORITY": ("warning", "URL host is not a known authority file"),
    # scan coverage
    "SCAN_MISSING": ("error", "bound scan file does not exist"),
    "SCAN_UNMAPPED": ("warning", "scan file is not bound to any card"),
    "CARD_UNBOUND": ("error", "card has no scan bound to it"),
}


@dataclass(frozen=True)
class Diagnostic:
    """One finding, addressed like a spreadsheet cell.

    ``row`` is the 1-based line in the sheet counting the header as row 1,
    so the first document is row 2. ``column`` is a field id, or ``"row"``
    when the finding concerns the row as a whole.
    """

    severity: str
    code: str
    sheet: str
    row: int
    column: str
    message: str

    def __post_init__(self) -> None:
        if self.severity not in SEVERITIES:
            raise ValueError(f"unknown severity {self.severity!r}")
        if self.code not in REGISTRY:
            raise ValueError(f"unregistered diagnostic code {self.code!r}")
        if self.sheet not in SHEETS:
            raise ValueError(f"unknown sheet {self.sheet!r}")
        if self.row < 1:
            raise ValueError("row must be >= 1")
        if not self.message:
            raise ValueError("message must be non-empty")

    @property
    def address(self) -> str:
        return f"{self.sheet}!R{self.row}C{self.column}"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Diagnostic":
        return cls(**{k: d[k] for k in ("severity", "code", "sheet", "row", "column", "message")})

    def line(self) -> str:
        return f"{self.severity} {self.code} {self.address}: {self.message}"


def diag(code: str, sheet: str, row: int, column: str, message: str | None = None,
         severity: str | None = None) -> Diagnostic:
    """Build a diagnostic with the registry's default severity and description."""
    default_severity, description = REGISTRY[code]
    return Diagnostic(severity or default_severity, code, sheet, row, column, message or description)


def severity_rank(severity: str) -> int:
    return SEVERITIES.index(severity)


def by_severity(ds: Iterable[Diagnostic]) -> list[Diagnostic]:
    """Errors first, then warnings, then info; stable within each group."""
    return sorted(ds, key=lambda d: severity_rank(d.severity))


def count_severities(ds: Iterable[Diagnostic]) -> dict[str, int]:
    counts = {s: 0 for s in SEVERITIES}
    for d in ds:
        counts[d.severity] += 1
    return counts


def has_errors(ds: Iterable[Diagnostic]) -> bool:
    return any(d.severity == "error" for d in ds)
