"""Domain types and total parsing/formatting functions.

Everything here is immutable and pure. Parsers raise subclasses of
:class:`chmeta.errors.ParseError`; they never return partial results.
"""

from __future__ import annotations

import enum
import functools
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import (
    CalendarInvalid,
    CategoryOutOfRange,
    ConfigError,
    EmptyName,
    GrammarMismatch,
    MissingPrefix,
    NonCanonicalForm,
    NotTwoParts,
    RangeReversed,
    SequenceNotPositiveInteger,
)

try:  # pragma: no cover - depends on interpreter version
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


class Category(enum.IntEnum):
    PORTRAITS = 1
    OUTGOING_CORRESPONDENCE = 2
    CREATIVE_WORKS = 3
    PERSONAL_MATERIALS = 4
    HISTORICAL_MATERIALS = 5
    PRINTED_MATERIALS = 6
    INCOMING_CORRESPONDENCE = 7
    FOREIGN_MATERIALS = 8
    LIBRARY_MATERIALS = 9

    @property
    def label(self) -> str:
        return CATEGORY_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "Category":
        for c, text in CATEGORY_LABELS.items():
            if text == label:
                return c
        raise ValueError(f"unknown category label {label!r}")


CATEGORY_LABELS: dict[Category, str] = {
    Category.PORTRAITS: "Portraits, images, and drawings",
    Category.OUTGOING_CORRESPONDENCE: "Outgoing correspondence",
    Category.CREATIVE_WORKS: "Creative works",
    Category.PERSONAL_MATERIALS: "Personal materials",
    Category.HISTORICAL_MATERIALS: "Historical materials, diplomas",
    Category.PRINTED_MATERIALS: "Printed materials and press clippings",
    Category.INCOMING_CORRESPONDENCE: "Incoming correspondence",
    Category.FOREIGN_MATERIALS: "Foreign materials",
    Category.LIBRARY_MATERIALS: "Library materials",
}

ALL_CATEGORIES: frozenset[Category] = frozenset(Category)


# -- document numbers ------------------------------------------------------


@dataclass(frozen=True, order=True)
class DocumentNumber:
    category: Category
    sequence: int

    def __post_init__(self) -> None:
        if self.sequence < 1:
            raise SequenceNotPositiveInteger(f"sequence must be >= 1, got {self.sequence}")

    def __str__(self) -> str:
        return f"{int(self.category)}.{self.sequence}"


@functools.lru_cache(maxsize=4096)
def parse_document_number(s: str) -> DocumentNumber:
    """Parse ``"<category digit>.<sequence>"``, rejecting padded or spaced forms."""
    parts = s.split(".")
    if len(parts) != 2:
        raise NotTwoParts(f"{s!r}: expected exactly one '.'")
    head, tail = parts
    if head.strip() != head or tail.strip() != tail:
        raise NonCanonicalForm(f"{s!r}: whitespace around document number")
    if not head.isascii() or not head.isdigit():
        raise CategoryOutOfRange(f"{s!r}: category must be a digit 1-9")
    if int(head) not in range(1, 10):
        raise CategoryOutOfRange(f"{s!r}: category must be 1-9")
    if len(head) != 1:
        raise NonCanonicalForm(f"{s!r}: category must be a single digit")
    if not tail.isascii() or not tail.isdigit() or int(tail) < 1:
        raise SequenceNotPositiveInteger(f"{s!r}: sequence must be a positive integer")
    if tail[0] == "0":
        raise NonCanonicalForm(f"{s!r}: leading zero in sequence")
    return DocumentNumber(Category(int(head)), int(tail))


# -- dates -----------------------------------------------------------------


def is_leap(year: int) -> bool:
    return year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)


_MONTH_DAYS = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)


def days_in_month(year: int, month: int) -> int:
    if month == 2 and is_leap(year):
        return 29
    return _MONTH_DAYS[month - 1]


@dataclass(frozen=True)
class PartialDate:
    """A proleptic Gregorian date known to year, month or day precision."""

    year: int
    month: int | None = None
    day: int | None = None

    def __post_init__(self) -> None:
        if self.day is not None and self.month is None:
            raise ValueError("day given without month")
        if not 1 <= self.year <= 9999:
            raise CalendarInvalid(f"year {self.year} out of range 1-9999")
        if self.month is not None and not 1 <= self.month <= 12:
            raise CalendarInvalid(f"month {self.month} does not exist")
        if self.day is not None and not 1 <= self.day <= days_in_month(self.year, self.month):
            raise CalendarInvalid(f"{self}: day {self.day} does not exist in that month")

    @property
    def precision(self) -> str:
        if self.day is not None:
            return "day"
        if self.month is not None:
            return "month"
        return "year"

    def key(self, precision: str | None = None) -> tuple[int, ...]:
        parts = (self.year, self.month, self.day)
        n = {"year": 1, "month": 2, "day": 3}[precision or self.precision]
        return tuple(p for p in parts[:n] if p is not None)

    def first_day(self) -> tuple[int, int, int]:
        return (self.year, self.month or 1, self.day or 1)

    def last_day(self) -> tuple[int, int, int]:
        month = self.month or 12
        return (self.year, month, self.day or days_in_month(self.year, month))

    def __str__(self) -> str:
        out = f"{self.year:04d}"
        if self.month is not None:
            out += f"-{self.month:02d}"
        if self.day is not None:
            out += f"-{self.day:02d}"
        return out


def compare_partial(a: PartialDate, b: PartialDate) -> int:
    """Three-way comparison at the coarser of the two precisions."""
    n = min(1 + (a.month is not None) + (a.day is not None),
            1 + (b.month is not None) + (b.day is not None))
    ka, kb = (a.year, a.month, a.day)[:n], (b.year, b.month, b.day)[:n]
    return (ka > kb) - (ka < kb)


@dataclass(frozen=True)
class DateExpression:
    kind: str  # single | range | open-range
    start: PartialDate
    end: PartialDate | None = None
    qualifier: str = "exact"  # exact | approximate | uncertain

    def __str__(self) -> str:
        if self.kind == "range":
            return f"{self.start}/{self.end}"
        if self.kind == "open-range":
            return f"{self.start}/.."
        prefix = {"exact": "", "approximate": "~", "uncertain": "?"}[self.qualifier]
        return f"{prefix}{self.start}"

    def bounds(self) -> tuple[tuple[int, int, int], tuple[int, int, int] | None]:
        """Earliest and latest calendar day covered; latest is None for open ranges."""
        if self.kind == "open-range":
            return self.start.first_day(), None
        last = (self.end or self.start).last_day()
        return self.start.first_day(), last


_PARTIAL = r"([0-9]{4})(?:-([0-9]{2})(?:-([0-9]{2}))?)?"
_SINGLE_RE = re.compile(rf"([~?]?){_PARTIAL}")
_RANGE_RE = re.compile(rf"{_PARTIAL}/(?:{_PARTIAL}|(\.\.))")


def _partial(y: str, m: str | None, d: str | None) -> PartialDate:
    year = int(y)
    if year == 0:
        raise CalendarInvalid("year 0000 does not exist")
    return PartialDate(year, int(m) if m else None, int(d) if d else None)


def parse_partial_date(s: str) -> PartialDate:
    m = re.fullmatch(_PARTIAL, s)
    if not m:
        raise GrammarMismatch(f"{s!r} is not YYYY, YYYY-MM or YYYY-MM-DD")
    return _partial(*m.groups())


@functools.lru_cache(maxsize=4096)
def parse_date_expression(s: str) -> DateExpression:
    """Parse a date cell.

    Accepted forms: ``YYYY``, ``YYYY-MM``, ``YYYY-MM-DD``, a closed range
    ``P/P``, an open range ``P/..``, and ``~P`` / ``?P`` for approximate and
    uncertain single dates.
    """
    m = _SINGLE_RE.fullmatch(s)
    if m:
        mark, y, mo, d = m.groups()
        qualifier = {"": "exact", "~": "approximate", "?": "uncertain"}[mark]
        return DateExpression("single", _partial(y, mo, d), None, qualifier)
    m = _RANGE_RE.fullmatch(s)
    if m:
        y1, m1, d1, y2, m2, d2, open_end = m.groups()
        start = _partial(y1, m1, d1)
        if open_end:
            return DateExpression("open-range", start)
        end = _partial(y2, m2, d2)
        if compare_partial(start, end) > 0:
            raise RangeReversed(f"{s!r}: range ends before it starts")
        return DateExpression("range", start, end)
    raise GrammarMismatch(f"{s!r} does not match any accepted date format")


# -- shelfmarks ------------------------------------------------------------

SHELFMARK_PREFIX = "SA"


@dataclass(frozen=True)
class Shelfmark:
    name: str
    prefix: str = SHELFMARK_PREFIX

    def __str__(self) -> str:
        return f"{self.prefix}, {self.name}"

    @property
    def slug(self) -> str:
        return slugify(str(self))


def parse_shelfmark(s: str) -> Shelfmark:
    head = SHELFMARK_PREFIX + ", "
    if not s.startswith(head):
        raise MissingPrefix(f"{s!r}: shelfmark must start with {head!r}")
    name = s[len(head):]
    if not name.strip():
        raise EmptyName(f"{s!r}: empty name after prefix")
    return Shelfmark(name)


def slugify(text: str) -> str:
    """Lowercase, replace each run of non-alphanumerics by a single ``-``."""
    text = unicodedata.normalize("NFC", text).lower()
    out = []
    dash = False
    for ch in text:
        if ch.isalnum():
            out.append(ch)
            dash = False
        elif not dash:
            out.append("-")
            dash = True
    return "".join(out).strip("-")


# -- schema ----------------------------------------------------------------

VALUE_KINDS = (
    "text",
    "document-number",
    "date-expression",
    "sec-person-ref",
    "sec-place-ref",
    "card-range",
    "url",
    "integer",
)
SEQUENCING_MODES = ("per-category", "per-unit")


@dataclass(frozen=True)
class FieldSpec:
    id: str
    label: str
    mandatory: bool = False
    applicability: frozenset[Category] = ALL_CATEGORIES
    value_kind: str = "text"

    def __post_init__(self) -> None:
        if not re.fullmatch(r"[a-z][a-z0-9_]*", self.id):
            raise ConfigError(f"field id {self.id!r} is not a lowercase token")
        if not self.applicability:
            raise ConfigError(f"field {self.id!r}: applicability must be non-empty")
        if self.value_kind not in VALUE_KINDS:
            raise ConfigError(f"field {self.id!r}: unknown kind {self.value_kind!r}")


def _cats(*codes: int) -> frozenset[Category]:
    return frozenset(Category(c) for c in codes)


CORRESPONDENCE = _cats(2, 7)
OFFICIAL = _cats(4, 5)
CREATIVE = _cats(3)

BUILTIN_FIELDS: tuple[FieldSpec, ...] = (
    FieldSpec("doc_no", "Document number", True, ALL_CATEGORIES, "document-number"),
    FieldSpec("title", "What is it / document title", True),
    FieldSpec("date", "Date", False, ALL_CATEGORIES, "date-expression"),
    FieldSpec("date_remarks", "Date remarks"),
    FieldSpec("sender", "Sender", False, CORRESPONDENCE),
    FieldSpec("sender_sec", "Sender (catalog id)", False, CORRESPONDENCE, "sec-person-ref"),
    FieldSpec("recipient", "Recipient", False, CORRESPONDENCE),
    FieldSpec("recipient_sec", "Recipient (catalog id)", False, CORRESPONDENCE, "sec-person-ref"),
    FieldSpec("issuer", "Issuer", False, OFFICIAL),
    FieldSpec("issuer_sec", "Issuer (catalog id)", False, OFFICIAL, "sec-person-ref"),
    FieldSpec("author", "Author", False, CREATIVE),
    FieldSpec("author_sec", "Author (catalog id)", False, CREATIVE, "sec-person-ref"),
    FieldSpec("place", "Place"),
    FieldSpec("place_sec", "Place (catalog id)", False, ALL_CATEGORIES, "sec-place-ref"),
    FieldSpec("cards", "Card numbers", False, ALL_CATEGORIES, "card-range"),
)


@dataclass(frozen=True)
class SchemaConfig:
    version: int = 1
    fields: tuple[FieldSpec, ...] = BUILTIN_FIELDS
    sequencing_mode: str = "per-category"

    def __post_init__(self) -> None:
        ids = [f.id for f in self.fields]
        if len(ids) != len(set(ids)):
            raise ConfigError("duplicate field ids in schema")
        missing = {f.id for f in BUILTIN_FIELDS} - set(ids)
        if missing:
            raise ConfigError(f"schema lacks built-in fields: {sorted(missing)}")
        if self.sequencing_mode not in SEQUENCING_MODES:
            raise ConfigError(f"unknown sequencing_mode {self.sequencing_mode!r}")
        if self.version < 1:
            raise ConfigError("schema version must be >= 1")

    @property
    def field_ids(self) -> tuple[str, ...]:
        return tuple(f.id for f in self.fields)

    def field(self, field_id: str) -> FieldSpec:
        for f in self.fields:
            if f.id == field_id:
                return f
        raise KeyError(field_id)

    def __contains__(self, field_id: object) -> bool:
        return field_id in self.field_ids


DEFAULT_SCHEMA = SchemaConfig()


def applicable_fields(c: Category, schema: SchemaConfig = DEFAULT_SCHEMA) -> frozenset[str]:
    return frozenset(f.id for f in schema.fields if c in f.applicability)


def blocked_fields(c: Category, schema: SchemaConfig = DEFAULT_SCHEMA) -> frozenset[str]:
    return frozenset(schema.field_ids) - applicable_fields(c, schema)


def _field_from_config(entry: Mapping, base: FieldSpec | None) -> FieldSpec:
    try:
        fid = entry["id"]
    except KeyError:
        raise ConfigError("field entry without 'id'") from None
    cats = entry.get("categories", "all" if base is None else None)
    if cats is None:
        applicability = base.applicability
    elif cats == "all":
        applicability = ALL_CATEGORIES
    else:
        try:
            applicability = frozenset(Category(int(c)) for c in cats)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field {fid!r}: bad categories {cats!r}") from exc
    return FieldSpec(
        id=fid,
        label=entry.get("label", base.label if base else fid),
        mandatory=bool(entry.get("mandatory", base.mandatory if base else False)),
        applicability=applicability,
        value_kind=entry.get("kind", base.value_kind if base else "text"),
    )


def schema_from_mapping(data: Mapping) -> SchemaConfig:
    """Build a schema from a parsed config tree.

    Entries whose id names a built-in field replace that field in place;
    other entries are appended after the built-ins in file order.
    """
    fields = list(BUILTIN_FIELDS)
    index = {f.id: i for i, f in enumerate(fields)}
    configured: set[str] = set()
    for entry in data.get("fields", []):
        fid = entry.get("id")
        if fid in configured:
            raise ConfigError(f"field {fid!r} configured twice")
        configured.add(fid)
        if fid in index:
            fields[index[fid]] = _field_from_config(entry, fields[index[fid]])
        else:
            index[fid] = len(fields)
            fields.append(_field_from_config(entry, None))
    try:
        version = int(data.get("version", 1))
    except (TypeError, ValueError) as exc:
        raise ConfigError("schema version must be an integer") from exc
    return SchemaConfig(version, tuple(fields), data.get("sequencing_mode", "per-category"))


def load_schema(path: str | Path) -> SchemaConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return schema_from_mapping(data)


# -- records ---------------------------------------------------------------


@dataclass(frozen=True)
class DocumentRecord:
    """One documents-sheet row.

    ``values`` holds the raw cell text keyed by field id; ``parsed`` holds
    typed values once the row has been checked.
    """

    values: Mapping[str, str]
    parsed: Mapping[str, object] = field(default_factory=dict, compare=False)

    def get(self, field_id: str) -> str:
        return self.values.get(field_id, "")

    @property
    def doc_no(self) -> DocumentNumber | None:
        try:
            return parse_document_number(self.get("doc_no"))
        except ValueError:
            return None

    @property
    def category(self) -> Category | None:
        d = self.doc_no
        return d.category if d else None


METRIC_KEYS = ("title", "shelfmark", "card_count", "format", "remarks")


@dataclass(frozen=True)
class MetricRecord:
    """Unit-level description, kept as entered; accessors parse on demand."""

    title: str = ""
    shelfmark: str = ""
    card_count: str = ""
    format: str = ""
    remarks: str = ""
    extra: tuple[tuple[str, str], ...] = ()

    @property
    def is_complete(self) -> bool:
        return bool(self.title.strip()) and bool(self.shelfmark.strip())

    def parsed_shelfmark(self) -> Shelfmark | None:
        try:
            return parse_shelfmark(self.shelfmark)
        except ValueError:
            return None

    def parsed_card_count(self) -> int | None:
        s = self.card_count
        return int(s) if s.isascii() and s.isdigit() else None

    def items(self) -> list[tuple[str, str]]:
        return [(k, getattr(self, k)) for k in METRIC_KEYS] + list(self.extra)

    @classmethod
    def from_items(cls, items: Iterable[tuple[str, str]]) -> "MetricRecord":
        known: dict[str, str] = {}
        extra = []
        for k, v in items:
            if k in METRIC_KEYS:
                known[k] = v
            else:
                extra.append((k, v))
        return cls(**known, extra=tuple(extra))
