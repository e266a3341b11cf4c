from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chmeta.errors import GrammarMismatch, MapSheetAbsent, ReversedRange
from chmeta.scanmap import (
    CardRange,
    ScanBinding,
    cards_of,
    check_coverage,
    list_scan_files,
    parse_card_range,
    resolve_scan_folder,
)

from factory import doc, make_unit
from oracles import coverage_oracle


@pytest.mark.parametrize("text,expected", [
    ("1", ["1"]),
    ("12-14,17", ["12-14", "17"]),
    ("3-5,1,4-8", ["3-8", "1"]),
    ("5,6,7", ["5-7"]),
    ("9,1-3,4", ["9", "1-4"]),
])
def test_parse_card_range(text, expected):
    assert [str(r) for r in parse_card_range(text)] == expected


@pytest.mark.parametrize("text,err", [
    ("", GrammarMismatch), ("0", GrammarMismatch), ("1,", GrammarMismatch), ("1 - 2", GrammarMismatch),
    ("a", GrammarMismatch), ("01", GrammarMismatch), ("5-3", ReversedRange),
])
def test_parse_card_range_errors(text, err):
    with pytest.raises(err):
        parse_card_range(text)


@given(st.lists(st.tuples(st.integers(1, 40), st.integers(0, 5)), min_size=1, max_size=6))
def test_card_range_covers_union(items):
    text = ",".join(f"{a}-{a + n}" if n else str(a) for a, n in items)
    ranges = parse_card_range(text)
    expected = {c for a, n in items for c in range(a, a + n + 1)}
    assert cards_of(ranges) == expected
    assert sum(r.end - r.start + 1 for r in ranges) == len(expected)
    assert cards_of(parse_card_range(",".join(map(str, ranges)))) == expected


def test_card_range_value():
    assert list(CardRange(2, 4)) == [2, 3, 4]
    with pytest.raises(ReversedRange):
        CardRange(4, 2)


def test_resolve_scan_folder():
    assert resolve_scan_folder("sa-keppler-johannes", "/scans") == Path("/scans/s/sa-keppler-johannes")


def test_list_scan_files(tmp_path):
    (tmp_path / "sub").mkdir()
    for name in ["b.tif", "a.tif", "sub/c.tif"]:
        (tmp_path / name).write_bytes(b"")
    assert list_scan_files(tmp_path) == ["a.tif", "b.tif", "sub/c.tif"]
    assert list_scan_files(tmp_path / "missing") == []


def test_coverage_findings():
    w = make_unit(
        docs=[doc("1.1", cards="1-3"), doc("1.2", cards="3-4"), doc("1.3", cards="x")],
        bindings=[ScanBinding(1, "recto", "0001r.tif"), ScanBinding(1, "verso", "0001v.tif"),
                  ScanBinding(2, "recto", ""), ScanBinding(3, "recto", "0003r.tif")],
    )
    ds = check_coverage(w, ["0001r.tif", "0003r.tif", "extra.tif"])
    assert [(d.code, d.sheet, d.row, d.column) for d in ds] == [
        ("SCAN_MISSING", "map", 3, "scan_file"),
        ("CARD_UNBOUND", "documents", 2, "cards"),
        ("CARD_UNBOUND", "documents", 3, "cards"),
        ("SCAN_UNMAPPED", "map", 1, "scan_file"),
    ]
    assert "card 2" in ds[1].message and "card 4" in ds[2].message
    with pytest.raises(MapSheetAbsent):
        check_coverage(make_unit(), [])


@given(
    st.dictionaries(st.tuples(st.integers(1, 12), st.sampled_from(["recto", "verso"])),
                    st.sampled_from([f"f{i}.tif" for i in range(15)]), max_size=12),
    st.sets(st.sampled_from([f"f{i}.tif" for i in range(15)])),
    st.lists(st.tuples(st.integers(1, 12), st.integers(0, 3)), max_size=4),
)
def test_coverage_matches_oracle(bound, files, ranges):
    bindings = [ScanBinding(c, r, f) for (c, r), f in sorted(bound.items())]
    spans = [(a, min(a + n, 12)) for a, n in ranges]
    docs = [doc(f"1.{i + 1}", cards=f"{a}-{b}") for i, (a, b) in enumerate(spans)]
    w = make_unit(docs=docs, bindings=bindings)
    ds = check_coverage(w, sorted(files))
    missing, unmapped, unbound = coverage_oracle([(b.card_no, b.role, b.scan_file) for b in bindings],
                                                 files, spans)
    assert sorted(d.message.split(": ")[1].split(" ")[0] for d in ds if d.code == "SCAN_MISSING") == missing
    assert sorted(d.message.split(" ")[0] for d in ds if d.code == "SCAN_UNMAPPED") == unmapped
    assert sorted(int(d.message.split(" ")[1]) for d in ds if d.code == "CARD_UNBOUND") == unbound
