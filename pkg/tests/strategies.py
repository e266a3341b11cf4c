"""Hypothesis strategies for workbooks."""

from __future__ import annotations

from hypothesis import strategies as st

from chmeta.ingest import UnitWorkbook
from chmeta.model import DEFAULT_SCHEMA, METRIC_KEYS, DocumentRecord, MetricRecord
from chmeta.scanmap import ScanBinding

# Cell text: anything CSV must survive, including separators, quotes,
# line breaks and non-ASCII. Surrogates cannot be encoded as UTF-8.
cell = st.text(
    st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"),
    max_size=20,
)
plain = st.text("abcdefghij ,\"'\n\r-", max_size=12)
roles = st.from_regex(r"[a-z][a-z0-9-]{0,8}", fullmatch=True)


@st.composite
def workbooks(draw, max_docs: int = 6) -> UnitWorkbook:
    name = draw(st.text("abcdefghijklmnopqrstuvwxyzäöü ,", min_size=1, max_size=15).filter(str.strip))
    shelfmark = f"SA, {name}"
    extra_keys = draw(st.lists(st.from_regex(r"x_[a-z]{1,6}", fullmatch=True), max_size=3, unique=True))
    metric = MetricRecord(
        title=draw(cell), shelfmark=shelfmark, card_count=draw(cell), format=draw(cell),
        remarks=draw(cell), extra=tuple((k, draw(cell)) for k in extra_keys),
    )
    assert not set(extra_keys) & set(METRIC_KEYS)
    extra_cols = draw(st.lists(st.from_regex(r"c_[a-z]{1,6}", fullmatch=True), max_size=2, unique=True))
    columns = DEFAULT_SCHEMA.field_ids + tuple(extra_cols)
    n = draw(st.integers(0, max_docs))
    docs = tuple(DocumentRecord({c: draw(cell) for c in columns}) for _ in range(n))
    bindings = None
    if draw(st.booleans()):
        keys = draw(st.lists(st.tuples(st.integers(1, 500), roles), max_size=6, unique=True))
        bindings = tuple(ScanBinding(c, r, draw(st.one_of(st.just(""), cell))) for c, r in keys)
    return UnitWorkbook(
        unit_id=draw(st.from_regex(r"sa-[a-z]{1,10}", fullmatch=True)),
        shelfmark=shelfmark,
        metric=metric,
        columns=columns,
        documents=docs,
        map=bindings,
        schema_version=draw(st.integers(1, 3)),
    )
