"""Builders for workbooks and catalogs used across the tests."""

from __future__ import annotations

import random

from chmeta.ingest import UnitWorkbook, unit_id_for
from chmeta.model import DEFAULT_SCHEMA, DocumentRecord, MetricRecord
from chmeta.scanmap import ScanBinding
from chmeta.sec import SecCatalog, SecId, SecPersonEntry, SecPlaceEntry

AGENT_FIELD = {2: "sender_sec", 7: "sender_sec", 3: "author_sec", 4: "issuer_sec", 5: "issuer_sec"}
NAME_FIELD = {2: "sender", 7: "sender", 3: "author", 4: "issuer", 5: "issuer"}


def person(n: int, name: str | None = None, **kw) -> SecPersonEntry:
    return SecPersonEntry(SecId("person", n), name or f"Person {n}", **kw)


def place(n: int, name: str | None = None, **kw) -> SecPlaceEntry:
    return SecPlaceEntry(SecId("place", n), name or f"Place {n}", **kw)


def catalog(n_persons: int = 3, n_places: int = 2) -> SecCatalog:
    persons = tuple(
        person(i, birth="1800", death="1870",
               external_urls=(f"https://d-nb.info/gnd/{100000 + i}",))
        for i in range(1, n_persons + 1)
    )
    places = tuple(
        place(i, external_urls=(f"https://www.geonames.org/{2900000 + i}",))
        for i in range(1, n_places + 1)
    )
    return SecCatalog(persons, places, frozenset())


def doc(doc_no: str, title: str | None = None, **values: str) -> dict[str, str]:
    row = {f: "" for f in DEFAULT_SCHEMA.field_ids}
    row["doc_no"] = doc_no
    row["title"] = title if title is not None else f"Document {doc_no}"
    row.update(values)
    return row


def valid_doc(category: int, seq: int, card: int | None = None, person_id: int = 1,
              place_id: int | None = 1) -> dict[str, str]:
    """A row that passes both validators against ``catalog()``."""
    values = {"date": f"18{(seq % 60) + 10:02d}-0{(seq % 9) + 1}-1{seq % 10}"}
    if card is not None:
        values["cards"] = str(card)
    if category in AGENT_FIELD:
        values[AGENT_FIELD[category]] = str(SecId("person", person_id))
        values[NAME_FIELD[category]] = f"Person {person_id}"
    if place_id is not None:
        values["place_sec"] = str(SecId("place", place_id))
        values["place"] = f"Place {place_id}"
    return doc(f"{category}.{seq}", **values)


def make_unit(name: str = "Keppler, Johannes", docs=(), bindings=None, title: str | None = None,
              columns=None, **metric) -> UnitWorkbook:
    shelfmark = f"SA, {name}"
    m = MetricRecord(title=title if title is not None else f"Papers of {name}",
                     shelfmark=metric.pop("shelfmark", shelfmark), **metric)
    return UnitWorkbook(
        unit_id=unit_id_for(shelfmark),
        shelfmark=shelfmark,
        metric=m,
        columns=tuple(columns) if columns is not None else DEFAULT_SCHEMA.field_ids,
        documents=tuple(DocumentRecord(d) for d in docs),
        map=tuple(bindings) if bindings is not None else None,
    )


def valid_unit(name: str = "Keppler, Johannes", per_category: int = 2, rng: random.Random | None = None,
               with_cards: bool = True) -> UnitWorkbook:
    docs = []
    card = 1
    categories = range(1, 10)
    for c in categories:
        for s in range(1, per_category + 1):
            docs.append(valid_doc(c, s, card if with_cards else None))
            card += 1
    if rng is not None:
        rng.shuffle(docs)
    return make_unit(name, docs, card_count=str(card - 1))


def bind_all(w: UnitWorkbook, roles=("recto",)) -> UnitWorkbook:
    """Attach a map binding every declared card to a file per role."""
    from dataclasses import replace

    from chmeta.scanmap import cards_of, parse_card_range

    cards: set[int] = set()
    for rec in w.documents:
        if rec.get("cards"):
            cards |= cards_of(parse_card_range(rec.get("cards")))
    bindings = [ScanBinding(c, r, f"{c:04d}_{r}.tif") for c in sorted(cards) for r in roles]
    return replace(w, map=tuple(bindings))
