"""Card-to-scan bindings, the scan folder convention and coverage checks."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

from .diagnostics import Diagnostic, diag
from .errors import GrammarMismatch, MapSheetAbsent, ReversedRange

if TYPE_CHECKING:
    from .ingest import UnitWorkbook

# Conventional roles; any token is accepted.
ROLE_EXAMPLES = ("recto", "verso", "slip-1", "slip-1-verso")
ROLE_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9_.-]*")


@dataclass(frozen=True)
class CardRange:
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 1:
            raise ValueError("card numbers are positive")
        if self.start > self.end:
            raise ReversedRange(f"card range {self.start}-{self.end} is reversed")

    def __iter__(self):
        return iter(range(self.start, self.end + 1))

    def __str__(self) -> str:
        return str(self.start) if self.start == self.end else f"{self.start}-{self.end}"


@dataclass(frozen=True)
class ScanBinding:
    """One map.csv row. A blank ``scan_file`` marks a seeded, not yet filled row."""

    card_no: int
    role: str
    scan_file: str

    @property
    def is_bound(self) -> bool:
        return bool(self.scan_file)


_ITEM_RE = re.compile(r"([1-9][0-9]*)(?:-([1-9][0-9]*))?")


def parse_card_range(s: str) -> list[CardRange]:
    """Parse ``"12-14,17"``-style lists.

    Overlapping or adjacent ranges are merged into the earliest one, so the
    result keeps first-appearance order and covers each card exactly once.
    """
    out: list[CardRange] = []
    for item in s.split(","):
        m = _ITEM_RE.fullmatch(item)
        if not m:
            raise GrammarMismatch(f"{s!r}: {item!r} is not N or N-N")
        lo = int(m.group(1))
        hi = int(m.group(2)) if m.group(2) else lo
        if lo > hi:
            raise ReversedRange(f"{s!r}: {item!r} is reversed")
        merged = [r for r in out if r.start <= hi + 1 and lo <= r.end + 1]
        if merged:
            pos = out.index(merged[0])
            lo = min([lo] + [r.start for r in merged])
            hi = max([hi] + [r.end for r in merged])
            out = [r for r in out if r not in merged]
            out.insert(pos, CardRange(lo, hi))
        else:
            out.append(CardRange(lo, hi))
    return out


def cards_of(ranges: Iterable[CardRange]) -> set[int]:
    return {c for r in ranges for c in r}


def resolve_scan_folder(unit_id: str, root: str | Path) -> Path:
    """``<root>/<first character of unit_id>/<unit_id>``; no filesystem access."""
    if not unit_id:
        raise ValueError("empty unit id")
    return Path(root) / unit_id[0] / unit_id


def list_scan_files(folder: str | Path) -> list[str]:
    """Relative POSIX paths of all regular files below ``folder``."""
    folder = Path(folder)
    if not folder.is_dir():
        return []
    return sorted(p.relative_to(folder).as_posix() for p in folder.rglob("*") if p.is_file())


def document_cards(w: "UnitWorkbook") -> list[tuple[int, set[int]]]:
    """(sheet row, declared cards) for each document whose ``cards`` parses."""
    out = []
    for i, rec in enumerate(w.documents):
        text = rec.get("cards")
        if not text:
            continue
        try:
            out.append((i + 2, cards_of(parse_card_range(text))))
        except ValueError:
            continue
    return out


def check_coverage(w: "UnitWorkbook", files: Iterable[str]) -> list[Diagnostic]:
    if w.map is None:
        raise MapSheetAbsent(f"unit {w.unit_id} has no map sheet")
    files = list(files)
    present = set(files)
    ds: list[Diagnostic] = []
    referenced: set[str] = set()
    bound_cards: set[int] = set()
    for i, b in enumerate(w.map):
        if not b.is_bound:
            continue
        referenced.add(b.scan_file)
        bound_cards.add(b.card_no)
        if b.scan_file not in present:
            ds.append(diag("SCAN_MISSING", "map", i + 2, "scan_file",
                           f"card {b.card_no} {b.role}: {b.scan_file} not found"))
    reported: set[int] = set()
    for row, cards in document_cards(w):
        for card in sorted(cards - bound_cards - reported):
            reported.add(card)
            ds.append(diag("CARD_UNBOUND", "documents", row, "cards", f"card {card} has no scan"))
    for f in sorted(present - referenced):
        ds.append(diag("SCAN_UNMAPPED", "map", 1, "scan_file", f"{f} is not bound to any card"))
    return ds
