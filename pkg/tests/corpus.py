"""Synthetic stores for the scale and fault-injection runs."""

from __future__ import annotations

import random
from pathlib import Path

from chmeta.ingest import save_unit_workbook
from chmeta.sec import SecCatalog, SecId, SecPersonEntry, SecPlaceEntry, save_catalog

from factory import AGENT_FIELD, NAME_FIELD, doc, make_unit

# Faults a describer might plausibly make; each replaces one cell.
FAULTS = [
    ("date", "31.02.1850"),
    ("date", "1850-02-30"),
    ("date", "1852/1850"),
    ("doc_no", "10.1"),
    ("doc_no", "3.07"),
    ("title", ""),
    ("sender", "Goethe"),
    ("cards", "4-2"),
    ("place_sec", "P-000001"),
    ("place_sec", "L-999999"),
    ("place_sec", "Weimar"),
    ("author_sec", "P-999999"),
]


def sec_catalog(n: int, rng: random.Random) -> SecCatalog:
    n_places = n // 5
    persons = []
    for i in range(1, n - n_places + 1):
        birth = rng.randint(1500, 1950)
        persons.append(SecPersonEntry(
            SecId("person", i), f"Surname{i}, Given{i}", (f"G. Surname{i}",),
            str(birth), str(birth + rng.randint(20, 100)),
            (f"https://d-nb.info/gnd/{1000000 + i}",)))
    places = [SecPlaceEntry(SecId("place", i), f"Town {i}", (), (f"https://www.geonames.org/{i}",))
              for i in range(1, n_places + 1)]
    return SecCatalog(tuple(persons), tuple(places))


def unit_documents(n_docs: int, rng: random.Random, n_persons: int, n_places: int) -> list[dict]:
    per_cat = [0] * 10
    docs = []
    for card in range(1, n_docs + 1):
        c = rng.randint(1, 9)
        per_cat[c] += 1
        values = {"date": f"{rng.randint(1600, 1950)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}",
                  "cards": str(card)}
        if c in AGENT_FIELD:
            p = rng.randint(1, n_persons)
            values[AGENT_FIELD[c]] = str(SecId("person", p))
            values[NAME_FIELD[c]] = f"Surname{p}, Given{p}"
        if rng.random() < 0.7:
            values["place_sec"] = str(SecId("place", rng.randint(1, n_places)))
        docs.append(doc(f"{c}.{per_cat[c]}", f"Item {card}", **values))
    return docs


def inject(docs: list[dict], rng: random.Random, n_faults: int) -> None:
    for _ in range(n_faults):
        field, value = rng.choice(FAULTS)
        docs[rng.randrange(len(docs))][field] = value


def write_store(root: Path, n_units: int, n_docs: int, sec_size: int, seed: int = 0,
                fault_rate: float = 0.0) -> SecCatalog:
    rng = random.Random(seed)
    sec = sec_catalog(sec_size, rng)
    save_catalog(sec, root / "sec")
    for u in range(n_units):
        docs = unit_documents(n_docs, rng, len(sec.persons), len(sec.places))
        if rng.random() < fault_rate:
            inject(docs, rng, rng.randint(1, 4))
        w = make_unit(f"Unit {u:05d}", docs, card_count=str(n_docs))
        save_unit_workbook(w, root / "units" / w.unit_id)
    return sec
