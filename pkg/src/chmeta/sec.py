"""Standard entries catalog: person and place authority records.

The catalog is an immutable snapshot. Only :func:`apply_proposal`,
:func:`allocate_id` and :func:`remove_entry` produce changed catalogs, which
mirrors the single-coordinator editing rule.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Union
from urllib.parse import urlsplit

from . import csvio
from .diagnostics import Diagnostic, diag
from .errors import ProposalNotPending, SecFormatError, SecIdInvalid, TargetMissing
from .model import DateExpression, parse_date_expression

KINDS = ("person", "place")
_PREFIX = {"person": "P", "place": "L"}
_KIND_OF_PREFIX = {v: k for k, v in _PREFIX.items()}
_ID_RE = re.compile(r"([PL])-([0-9]{6})")


@dataclass(frozen=True, order=True)
class SecId:
    kind: str
    number: int

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SecIdInvalid(f"unknown entry kind {self.kind!r}")
        if not 1 <= self.number <= 999_999:
            raise SecIdInvalid(f"entry number {self.number} out of range")

    def __str__(self) -> str:
        return f"{_PREFIX[self.kind]}-{self.number:06d}"


def parse_sec_id(s: str) -> SecId:
    m = _ID_RE.fullmatch(s)
    if not m or m.group(2) == "000000":
        raise SecIdInvalid(f"{s!r} is not P-NNNNNN or L-NNNNNN")
    return SecId(_KIND_OF_PREFIX[m.group(1)], int(m.group(2)))


@dataclass(frozen=True)
class SecPersonEntry:
    id: SecId
    preferred_name: str
    variant_names: tuple[str, ...] = ()
    birth: str = ""
    death: str = ""
    external_urls: tuple[str, ...] = ()
    notes: str = ""

    kind = "person"


@dataclass(frozen=True)
class SecPlaceEntry:
    id: SecId
    preferred_name: str
    variant_names: tuple[str, ...] = ()
    external_urls: tuple[str, ...] = ()
    notes: str = ""

    kind = "place"


SecEntry = Union[SecPersonEntry, SecPlaceEntry]

PERSON_COLUMNS = ("id", "preferred_name", "variant_names", "birth", "death", "external_urls", "notes")
PLACE_COLUMNS = ("id", "preferred_name", "variant_names", "external_urls", "notes")
PROPOSAL_EXTRA = ("target", "proposer", "status")
_LIST_FIELDS = ("variant_names", "external_urls")
_ENTRY_TYPES = {"person": SecPersonEntry, "place": SecPlaceEntry}
_COLUMNS = {"person": PERSON_COLUMNS, "place": PLACE_COLUMNS}
_FILES = {"person": "persons.csv", "place": "places.csv"}
_PROPOSAL_FILES = {"person": "proposals_persons.csv", "place": "proposals_places.csv"}
TOMBSTONE_FILE = "tombstones.txt"


@dataclass(frozen=True)
class SecCatalog:
    persons: tuple[SecPersonEntry, ...] = ()
    places: tuple[SecPlaceEntry, ...] = ()
    tombstones: frozenset[SecId] = frozenset()

    def entries(self, kind: str) -> tuple[SecEntry, ...]:
        return self.persons if kind == "person" else self.places

    @cached_property
    def _index(self) -> dict[SecId, SecEntry]:
        index: dict[SecId, SecEntry] = {}
        for e in (*self.persons, *self.places):
            index.setdefault(e.id, e)
        return index

    def __len__(self) -> int:
        return len(self.persons) + len(self.places)


def resolve_ref(catalog: SecCatalog, id: SecId) -> SecEntry | None:
    """Exact-id lookup; a person id is only ever looked up among persons."""
    e = catalog._index.get(id)
    if e is None or e.kind != id.kind:
        return None
    return e


def allocate_id(catalog: SecCatalog, kind: str) -> SecId:
    used = [e.id.number for e in catalog.entries(kind)]
    used += [t.number for t in catalog.tombstones if t.kind == kind]
    return SecId(kind, max(used, default=0) + 1)


def remove_entry(catalog: SecCatalog, id: SecId) -> SecCatalog:
    """Drop an entry and keep its id as a tombstone so it is never reissued."""
    kind_entries = catalog.entries(id.kind)
    kept = tuple(e for e in kind_entries if e.id != id)
    if len(kept) == len(kind_entries):
        raise TargetMissing(f"{id} not in catalog")
    tomb = catalog.tombstones | {id}
    if id.kind == "person":
        return SecCatalog(kept, catalog.places, tomb)
    return SecCatalog(catalog.persons, kept, tomb)


# -- proposals -------------------------------------------------------------


@dataclass(frozen=True)
class Proposal:
    kind: str
    target: SecId | None  # None proposes a new entry
    payload: Mapping[str, str] = field(default_factory=dict)
    proposer: str = ""
    status: str = "pending"

    def __post_init__(self) -> None:
        if self.status not in ("pending", "accepted", "rejected"):
            raise ValueError(f"bad proposal status {self.status!r}")
        if self.target is not None and self.target.kind != self.kind:
            raise ValueError(f"proposal for a {self.kind} targets {self.target}")


def _split_list(s: str) -> tuple[str, ...]:
    return tuple(x for x in s.split("|") if x) if s else ()


def _entry_from_payload(kind: str, id: SecId, payload: Mapping[str, str]) -> SecEntry:
    kwargs: dict[str, object] = {"id": id, "preferred_name": payload.get("preferred_name", "")}
    for col in _COLUMNS[kind][2:]:
        value = payload.get(col, "")
        kwargs[col] = _split_list(value) if col in _LIST_FIELDS else value
    return _ENTRY_TYPES[kind](**kwargs)


def _merge(entry: SecEntry, payload: Mapping[str, str]) -> SecEntry:
    changes: dict[str, object] = {}
    for col in _COLUMNS[entry.kind][1:]:
        value = payload.get(col, "")
        if not value:
            continue
        if col in _LIST_FIELDS:
            current = list(getattr(entry, col))
            current += [x for x in dict.fromkeys(_split_list(value)) if x not in current]
            changes[col] = tuple(current)
        else:
            changes[col] = value
    return replace(entry, **changes)


def apply_proposal(catalog: SecCatalog, p: Proposal, decision: str) -> tuple[SecCatalog, Proposal]:
    """Accept or reject a pending proposal.

    Returns the new catalog and the proposal with its status updated. A
    rejection returns the very same catalog object.
    """
    if p.status != "pending":
        raise ProposalNotPending(f"proposal is already {p.status}")
    if decision not in ("accept", "reject"):
        raise ValueError(f"decision must be 'accept' or 'reject', not {decision!r}")
    if decision == "reject":
        return catalog, replace(p, status="rejected")

    entries = list(catalog.entries(p.kind))
    if p.target is None:
        entries.append(_entry_from_payload(p.kind, allocate_id(catalog, p.kind), p.payload))
    else:
        positions = [i for i, e in enumerate(entries) if e.id == p.target]
        if not positions:
            raise TargetMissing(f"{p.target} not in catalog")
        i = positions[0]
        entries[i] = _merge(entries[i], p.payload)
    if p.kind == "person":
        new = SecCatalog(tuple(entries), catalog.places, catalog.tombstones)
    else:
        new = SecCatalog(catalog.persons, tuple(entries), catalog.tombstones)
    return new, replace(p, status="accepted")


# -- authority URLs --------------------------------------------------------

AUTHORITY_HOSTS = {
    "geonames.org": "GEONAMES",
    "d-nb.info": "GND",
    "wikidata.org": "WIKIDATA",
}
_SCHEME_RE = re.compile(r"[A-Za-z][A-Za-z0-9+.-]*")
_HOST_RE = re.compile(r"(?:[A-Za-z0-9](?:[A-Za-z0-9-]*[A-Za-z0-9])?\.)*[A-Za-z0-9](?:[A-Za-z0-9-]*[A-Za-z0-9])?")
_BAD_CHARS = re.compile(r"[\s<>\"{}|\\^`\x00-\x1f\x7f]")


def url_is_well_formed(u: str) -> bool:
    if _BAD_CHARS.search(u):
        return False
    scheme, sep, rest = u.partition("://")
    if not sep or not _SCHEME_RE.fullmatch(scheme):
        return False
    try:
        parts = urlsplit(u)
        parts.port
    except ValueError:
        return False
    host = parts.hostname or ""
    return bool(_HOST_RE.fullmatch(host))


def authority_tag(u: str) -> str | None:
    try:
        host = (urlsplit(u).hostname or "").lower()
    except ValueError:
        return None
    for domain, tag in AUTHORITY_HOSTS.items():
        if host == domain or host.endswith("." + domain):
            return tag
    return None


def lint_authority_url(u: str, *, sheet: str = "persons", row: int = 1,
                       column: str = "external_urls") -> list[Diagnostic]:
    """Offline check of an external authority link."""
    if not url_is_well_formed(u):
        return [diag("URL_MALFORMED", sheet, row, column, f"{u!r} is not an absolute URL")]
    scheme = urlsplit(u).scheme.lower()
    if scheme not in ("http", "https"):
        return [diag("URL_SCHEME", sheet, row, column, f"{u!r}: scheme {scheme!r} is not http(s)")]
    if authority_tag(u) is None:
        return [diag("URL_UNRECOGNIZED_AUTHORITY", sheet, row, column,
                     f"{u!r}: host is not a known authority file")]
    return []


def life_dates(p: SecPersonEntry) -> tuple[DateExpression | None, DateExpression | None]:
    """Parsed birth and death; unparsable or empty values come back as None."""
    out = []
    for raw in (p.birth, p.death):
        try:
            out.append(parse_date_expression(raw) if raw else None)
        except ValueError:
            out.append(None)
    return out[0], out[1]


# -- files -----------------------------------------------------------------


def _entry_row(e: SecEntry) -> list[str]:
    row = []
    for col in _COLUMNS[e.kind]:
        value = getattr(e, col)
        if col in _LIST_FIELDS:
            value = "|".join(value)
        row.append(str(value))
    return row


def _read_table(path: Path, columns: tuple[str, ...]) -> list[tuple[int, dict[str, str]]]:
    rows = csvio.read_rows(path)
    if not rows:
        raise SecFormatError("empty file, expected a header row", path=path)
    header = rows[0]
    missing = [c for c in columns if c not in header]
    if missing:
        raise SecFormatError(f"missing columns {missing}", path=path, row=1)
    out = []
    for n, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise SecFormatError(f"expected {len(header)} cells, got {len(r)}", path=path, row=n)
        out.append((n, dict(zip(header, r))))
    return out


def _read_entries(path: Path, kind: str) -> tuple[SecEntry, ...]:
    if not path.exists():
        return ()
    out = []
    for n, rec in _read_table(path, _COLUMNS[kind]):
        try:
            id = parse_sec_id(rec["id"])
        except SecIdInvalid as exc:
            raise SecFormatError(str(exc), path=path, row=n) from exc
        if id.kind != kind:
            raise SecFormatError(f"{id} is not a {kind} id", path=path, row=n)
        out.append(_entry_from_payload(kind, id, rec))
    return tuple(out)


def load_catalog(directory: str | Path) -> SecCatalog:
    """Read ``persons.csv``, ``places.csv`` and the tombstone list; absent files are empty."""
    d = Path(directory)
    tombstones = set()
    tpath = d / TOMBSTONE_FILE
    if tpath.exists():
        for n, line in enumerate(tpath.read_text(encoding="utf-8").splitlines(), start=1):
            if line.strip():
                try:
                    tombstones.add(parse_sec_id(line.strip()))
                except SecIdInvalid as exc:
                    raise SecFormatError(str(exc), path=tpath, row=n) from exc
    return SecCatalog(
        _read_entries(d / _FILES["person"], "person"),
        _read_entries(d / _FILES["place"], "place"),
        frozenset(tombstones),
    )


def save_catalog(catalog: SecCatalog, directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for kind in KINDS:
        csvio.write_rows(d / _FILES[kind], _COLUMNS[kind], (_entry_row(e) for e in catalog.entries(kind)))
    if catalog.tombstones:
        text = "".join(f"{t}\n" for t in sorted(catalog.tombstones))
        csvio.write_bytes_atomic(d / TOMBSTONE_FILE, text.encode("utf-8"))


def load_proposals(directory: str | Path, kind: str) -> list[Proposal]:
    path = Path(directory) / _PROPOSAL_FILES[kind]
    if not path.exists():
        return []
    out = []
    for n, rec in _read_table(path, _COLUMNS[kind] + PROPOSAL_EXTRA):
        target_text = rec["target"].strip()
        try:
            target = None if target_text in ("", "new") else parse_sec_id(target_text)
            payload = {c: rec[c] for c in _COLUMNS[kind][1:] if rec[c]}
            out.append(Proposal(kind, target, payload, rec["proposer"], rec["status"] or "pending"))
        except ValueError as exc:
            raise SecFormatError(str(exc), path=path, row=n) from exc
    return out


def save_proposals(directory: str | Path, kind: str, proposals: Iterable[Proposal]) -> None:
    header = _COLUMNS[kind] + PROPOSAL_EXTRA
    rows = []
    for p in proposals:
        cells = ["" if c == "id" else p.payload.get(c, "") for c in _COLUMNS[kind]]
        cells += [str(p.target) if p.target else "new", p.proposer, p.status]
        rows.append(cells)
    csvio.write_rows(Path(directory) / _PROPOSAL_FILES[kind], header, rows)


def append_proposal(directory: str | Path, p: Proposal) -> None:
    """Append one proposal row; any contributor may call this."""
    path = Path(directory) / _PROPOSAL_FILES[p.kind]
    header = _COLUMNS[p.kind] + PROPOSAL_EXTRA
    cells = ["" if c == "id" else p.payload.get(c, "") for c in _COLUMNS[p.kind]]
    cells += [str(p.target) if p.target else "new", p.proposer, p.status]
    data = csvio.dump_rows(header, [cells])
    if path.exists():
        data = data.split(b"\r\n", 1)[1]
    with open(path, "ab") as fh:
        fh.write(data)
