"""Exports of accepted units: EDM and CIDOC-CRM graphs, EAD finding aids, Dublin Core."""

from __future__ import annotations

import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from urllib.parse import quote

from . import csvio
from .check import parse_record
from .errors import ConfigError, EmptyInput, MetricIncomplete, UnitNotAccepted
from .ingest import UnitWorkbook
from .model import DEFAULT_SCHEMA, Category, DateExpression, DocumentRecord, SchemaConfig
from .scanmap import ScanBinding, cards_of
from .sec import SecCatalog, SecEntry, authority_tag, resolve_ref, url_is_well_formed
from .semantic import validate_unit

try:  # pragma: no cover
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger(__name__)

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
XSD = "http://www.w3.org/2001/XMLSchema#"
DC = "http://purl.org/dc/elements/1.1/"
DCTERMS = "http://purl.org/dc/terms/"
EDM = "http://www.europeana.eu/schemas/edm/"
ORE = "http://www.openarchives.org/ore/terms/"
SKOS = "http://www.w3.org/2004/02/skos/core#"
OWL = "http://www.w3.org/2002/07/owl#"
CRM = "http://www.cidoc-crm.org/cidoc-crm/"
EAD_NS = "urn:isbn:1-931666-22-9"

PREFIXES = {
    "crm": CRM,
    "dc": DC,
    "dcterms": DCTERMS,
    "edm": EDM,
    "ore": ORE,
    "owl": OWL,
    "rdf": RDF,
    "rdfs": RDFS,
    "skos": SKOS,
    "xsd": XSD,
}
RDF_TYPE = RDF + "type"
XSD_STRING = XSD + "string"
XSD_DATE = XSD + "date"

# -- graph terms -----------------------------------------------------------

_IRI_RE = re.compile(r"[A-Za-z][A-Za-z0-9+.-]*:[^\x00-\x20<>\"{}|^`\\]*")
_LANG_RE = re.compile(r"[A-Za-z]+(?:-[A-Za-z0-9]+)*")


def is_absolute_iri(s: str) -> bool:
    return bool(_IRI_RE.fullmatch(s))


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: str | None = XSD_STRING
    lang: str | None = None

    def __post_init__(self) -> None:
        if (self.datatype is None) == (self.lang is None):
            raise ValueError("a literal carries exactly one of datatype or language tag")
        if self.lang is not None and not _LANG_RE.fullmatch(self.lang):
            raise ValueError(f"bad language tag {self.lang!r}")
        if self.datatype is not None and not is_absolute_iri(self.datatype):
            raise ValueError(f"bad datatype IRI {self.datatype!r}")


@dataclass(frozen=True)
class GraphTriple:
    subject: str
    predicate: str
    object: str | Literal

    def __post_init__(self) -> None:
        for part in (self.subject, self.predicate):
            if not is_absolute_iri(part):
                raise ValueError(f"not an absolute IRI: {part!r}")
        if isinstance(self.object, str) and not is_absolute_iri(self.object):
            raise ValueError(f"not an absolute IRI: {self.object!r}")


def _obj_key(o: str | Literal) -> tuple:
    if isinstance(o, str):
        return (0, o, "", "")
    return (1, o.lexical, o.datatype or "", o.lang or "")


def triple_key(t: GraphTriple) -> tuple:
    return (t.subject, t.predicate, _obj_key(t.object))


# -- IRI policy ------------------------------------------------------------


@dataclass(frozen=True)
class IriPolicy:
    """Local IRI minting. Each template is appended to ``base``; placeholder
    values are percent-encoded so distinct ids never collide."""

    base: str = "https://example.org/chmeta/"
    templates: Mapping[str, str] = field(default_factory=lambda: {
        "unit": "unit/{unit}",
        "document": "unit/{unit}/doc/{doc}",
        "aggregation": "unit/{unit}/doc/{doc}/aggregation",
        "event": "unit/{unit}/doc/{doc}/event",
        "timespan": "unit/{unit}/doc/{doc}/event/timespan",
        "scan": "unit/{unit}/card/{card}/{role}",
        "person": "person/{id}",
        "place": "place/{id}",
    })

    def __post_init__(self) -> None:
        if not is_absolute_iri(self.base):
            raise ConfigError(f"IRI base {self.base!r} is not absolute")

    def iri(self, entity: str, **parts: object) -> str:
        try:
            template = self.templates[entity]
        except KeyError:
            raise ConfigError(f"no IRI template for {entity!r}") from None
        encoded = {k: quote(str(v), safe="") for k, v in parts.items()}
        return self.base + template.format(**encoded)


# -- mapping ---------------------------------------------------------------


@dataclass(frozen=True)
class ExportMapping:
    events: Mapping[int, str]
    event_classes: Mapping[str, tuple[str, str]]
    agents: Mapping[int, str]
    dc_terms: tuple[tuple[str, str], ...]


def mapping_from_toml(data: Mapping) -> ExportMapping:
    try:
        events = {int(k): v for k, v in data["events"].items()}
        classes = {k: (v["class"], v["link"]) for k, v in data["event_classes"].items()}
        agents = {int(k): v for k, v in data.get("agents", {}).items()}
        dc_terms = tuple((e["key"], e["term"]) for e in data["dc"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad export mapping: {exc}") from exc
    for c in Category:
        if events.get(int(c)) not in classes:
            raise ConfigError(f"category {int(c)} has no event kind with a class")
    return ExportMapping(events, classes, agents, dc_terms)


def load_mapping(path: str | Path | None = None) -> ExportMapping:
    if path is None:
        text = resources.files("chmeta").joinpath("data/mapping.toml").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    try:
        return mapping_from_toml(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path or 'mapping.toml'}: {exc}") from exc


DEFAULT_MAPPING = load_mapping()


# -- shared helpers --------------------------------------------------------


def require_accepted(w: UnitWorkbook, sec: SecCatalog, schema: SchemaConfig = DEFAULT_SCHEMA) -> UnitWorkbook:
    report = validate_unit(w, sec, schema)
    if not report.accepted:
        raise UnitNotAccepted(f"{w.unit_id}: validation verdict is {report.verdict}")
    return report.workbook


def _typed_documents(w: UnitWorkbook, schema: SchemaConfig) -> list[DocumentRecord]:
    docs = [parse_record(r, schema) for r in w.documents]
    return sorted(docs, key=lambda r: r.parsed["doc_no"])


def document_scans(rec: DocumentRecord, bindings: Sequence[ScanBinding] | None) -> list[ScanBinding]:
    """Bound scans of the cards a document declares, in (card, role) order."""
    ranges = rec.parsed.get("cards")
    if not ranges or not bindings:
        return []
    cards = cards_of(ranges)
    return sorted((b for b in bindings if b.is_bound and b.card_no in cards),
                  key=lambda b: (b.card_no, b.role))


def _lit(s: str) -> Literal:
    return Literal(s)


def _entry_triples(iri: str, e: SecEntry, rdf_class: str, label_prop: str,
                   alt_prop: str | None) -> list[GraphTriple]:
    ts = [GraphTriple(iri, RDF_TYPE, rdf_class), GraphTriple(iri, label_prop, _lit(e.preferred_name))]
    if alt_prop:
        ts += [GraphTriple(iri, alt_prop, _lit(v)) for v in e.variant_names]
    ts += [GraphTriple(iri, OWL + "sameAs", u) for u in e.external_urls if url_is_well_formed(u)]
    return ts


def _ref(rec: DocumentRecord, fid: str, sec: SecCatalog) -> SecEntry | None:
    ref = rec.parsed.get(fid)
    return resolve_ref(sec, ref) if ref is not None else None


def _dedupe(ts: Iterable[GraphTriple]) -> list[GraphTriple]:
    return list(dict.fromkeys(ts))


# -- EDM -------------------------------------------------------------------


def export_edm(w: UnitWorkbook, sec: SecCatalog, policy: IriPolicy = IriPolicy(),
               schema: SchemaConfig = DEFAULT_SCHEMA,
               mapping: ExportMapping = DEFAULT_MAPPING) -> list[GraphTriple]:
    w = require_accepted(w, sec, schema)
    unit_iri = policy.iri("unit", unit=w.unit_id)
    ts = [
        GraphTriple(unit_iri, DC + "title", _lit(w.metric.title)),
        GraphTriple(unit_iri, DC + "identifier", _lit(w.metric.shelfmark)),
    ]
    for rec in _typed_documents(w, schema):
        doc_no = rec.parsed["doc_no"]
        cho = policy.iri("document", unit=w.unit_id, doc=doc_no)
        ts += [
            GraphTriple(cho, RDF_TYPE, EDM + "ProvidedCHO"),
            GraphTriple(cho, DC + "identifier", _lit(str(doc_no))),
            GraphTriple(cho, DC + "title", _lit(rec.get("title"))),
            GraphTriple(cho, DC + "type", Literal(doc_no.category.label, None, "en")),
            GraphTriple(cho, DCTERMS + "isPartOf", unit_iri),
            GraphTriple(cho, EDM + "type", _lit("IMAGE" if doc_no.category == Category.PORTRAITS else "TEXT")),
        ]
        if rec.get("date"):
            ts.append(GraphTriple(cho, DC + "date", _lit(rec.get("date"))))
        agent_field = mapping.agents.get(int(doc_no.category))
        agent = _ref(rec, agent_field, sec) if agent_field else None
        if agent is not None:
            agent_iri = policy.iri(agent.kind, id=agent.id)
            ts.append(GraphTriple(cho, DC + "creator", agent_iri))
            ts += _entry_triples(agent_iri, agent, EDM + "Agent", SKOS + "prefLabel", SKOS + "altLabel")
        place = _ref(rec, "place_sec", sec)
        if place is not None:
            place_iri = policy.iri("place", id=place.id)
            ts.append(GraphTriple(cho, DCTERMS + "spatial", place_iri))
            ts += _entry_triples(place_iri, place, EDM + "Place", SKOS + "prefLabel", SKOS + "altLabel")

        scans = document_scans(rec, w.map)
        if not scans:
            log.warning("%s %s: no scans bound, aggregation omitted", w.unit_id, doc_no)
            continue
        agg = policy.iri("aggregation", unit=w.unit_id, doc=doc_no)
        ts += [GraphTriple(agg, RDF_TYPE, ORE + "Aggregation"), GraphTriple(agg, EDM + "aggregatedCHO", cho)]
        for i, b in enumerate(scans):
            wr = policy.iri("scan", unit=w.unit_id, card=b.card_no, role=b.role)
            ts += [
                GraphTriple(wr, RDF_TYPE, EDM + "WebResource"),
                GraphTriple(wr, DC + "identifier", _lit(b.scan_file)),
                GraphTriple(wr, DC + "description", _lit(f"card {b.card_no}, {b.role}")),
                GraphTriple(agg, EDM + ("isShownBy" if i == 0 else "hasView"), wr),
            ]
    return _dedupe(ts)


# -- CIDOC-CRM -------------------------------------------------------------


def _xsd_date(day: tuple[int, int, int]) -> Literal:
    y, m, d = day
    return Literal(f"{y:04d}-{m:02d}-{d:02d}", XSD_DATE)


def export_cidoc(w: UnitWorkbook, sec: SecCatalog, policy: IriPolicy = IriPolicy(),
                 schema: SchemaConfig = DEFAULT_SCHEMA,
                 mapping: ExportMapping = DEFAULT_MAPPING) -> list[GraphTriple]:
    w = require_accepted(w, sec, schema)
    ts: list[GraphTriple] = []
    for rec in _typed_documents(w, schema):
        doc_no = rec.parsed["doc_no"]
        doc = policy.iri("document", unit=w.unit_id, doc=doc_no)
        event = policy.iri("event", unit=w.unit_id, doc=doc_no)
        event_class, link = mapping.event_classes[mapping.events[int(doc_no.category)]]
        ts += [
            GraphTriple(doc, RDF_TYPE, CRM + "E22_Human-Made_Object"),
            GraphTriple(doc, RDFS + "label", _lit(rec.get("title"))),
            GraphTriple(doc, CRM + link, event),
            GraphTriple(event, RDF_TYPE, CRM + event_class),
        ]
        agent_field = mapping.agents.get(int(doc_no.category))
        agent = _ref(rec, agent_field, sec) if agent_field else None
        if agent is not None:
            agent_iri = policy.iri(agent.kind, id=agent.id)
            ts.append(GraphTriple(event, CRM + "P14_carried_out_by", agent_iri))
            ts += _entry_triples(agent_iri, agent, CRM + "E21_Person", RDFS + "label", None)
        date: DateExpression | None = rec.parsed.get("date")
        if date is not None:
            span = policy.iri("timespan", unit=w.unit_id, doc=doc_no)
            first, last = date.bounds()
            ts += [
                GraphTriple(event, CRM + "P4_has_time-span", span),
                GraphTriple(span, RDF_TYPE, CRM + "E52_Time-Span"),
                GraphTriple(span, RDFS + "label", _lit(str(date))),
                GraphTriple(span, CRM + "P82a_begin_of_the_begin", _xsd_date(first)),
            ]
            if last is not None:
                ts.append(GraphTriple(span, CRM + "P82b_end_of_the_end", _xsd_date(last)))
        place = _ref(rec, "place_sec", sec)
        if place is not None:
            place_iri = policy.iri("place", id=place.id)
            ts.append(GraphTriple(event, CRM + "P7_took_place_at", place_iri))
            ts += _entry_triples(place_iri, place, CRM + "E53_Place", RDFS + "label", None)
    return _dedupe(ts)


# -- Turtle ----------------------------------------------------------------

_LOCAL_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*")
_ECHAR = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t", "\b": "\\b", "\f": "\\f"}


def _escape(s: str) -> str:
    out = []
    for ch in s:
        if ch in _ECHAR:
            out.append(_ECHAR[ch])
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return "".join(out)


def _iri(s: str) -> str:
    for prefix, ns in PREFIXES.items():
        if s.startswith(ns) and _LOCAL_RE.fullmatch(s[len(ns):]):
            return f"{prefix}:{s[len(ns):]}"
    return f"<{s}>"


def _term(o: str | Literal) -> str:
    if isinstance(o, str):
        return _iri(o)
    text = f'"{_escape(o.lexical)}"'
    return text + (f"@{o.lang}" if o.lang else f"^^{_iri(o.datatype)}")


def serialize_turtle(triples: Iterable[GraphTriple]) -> str:
    """Canonical Turtle: fixed prefix header, statements sorted by (s, p, o)."""
    lines = [f"@prefix {p}: <{ns}> ." for p, ns in PREFIXES.items()]
    ordered = sorted(set(triples), key=triple_key)
    subject = None
    for t in ordered:
        pred = "a" if t.predicate == RDF_TYPE else _iri(t.predicate)
        if t.subject != subject:
            if subject is not None:
                lines[-1] += " ."
            lines.append("")
            lines.append(f"{_iri(t.subject)} {pred} {_term(t.object)}")
            subject = t.subject
        else:
            lines[-1] += " ;"
            lines.append(f"    {pred} {_term(t.object)}")
    if subject is not None:
        lines[-1] += " ."
    return "\n".join(lines) + "\n"


# -- EAD -------------------------------------------------------------------


def _ead_date(date: DateExpression) -> dict[str, str]:
    attrs = {}
    if date.kind == "range":
        attrs["normal"] = f"{date.start}/{date.end}"
    elif date.kind == "single":
        attrs["normal"] = str(date.start)
    if date.qualifier != "exact":
        attrs["certainty"] = date.qualifier
    return attrs


def _authority_attrs(e: SecEntry) -> dict[str, str]:
    for wanted in ("GND", "GEONAMES", "WIKIDATA"):
        for u in e.external_urls:
            if url_is_well_formed(u) and authority_tag(u) == wanted:
                return {"authfilenumber": u, "source": wanted.lower()}
    return {}


def _sub(parent: ET.Element, tag: str, text: str | None = None, **attrs: str) -> ET.Element:
    el = ET.SubElement(parent, tag, attrs)
    if text is not None:
        el.text = text
    return el


_NAME_FIELDS = (("sender", "sender_sec"), ("recipient", "recipient_sec"),
                ("issuer", "issuer_sec"), ("author", "author_sec"))


def export_ead(units: Sequence[UnitWorkbook], collection_meta: Mapping[str, str], sec: SecCatalog,
               schema: SchemaConfig = DEFAULT_SCHEMA) -> str:
    """One finding aid: a file-level component per unit, item-level per document."""
    if not units:
        raise EmptyInput("no units to export")
    accepted = [require_accepted(w, sec, schema) for w in units]
    root = ET.Element("ead", {"xmlns": EAD_NS})
    header = _sub(root, "eadheader")
    _sub(header, "eadid", collection_meta.get("id", "collection"))
    filedesc = _sub(header, "filedesc")
    titlestmt = _sub(filedesc, "titlestmt")
    _sub(titlestmt, "titleproper", collection_meta.get("title", "Collection"))
    archdesc = _sub(root, "archdesc", level="collection")
    did = _sub(archdesc, "did")
    _sub(did, "unittitle", collection_meta.get("title", "Collection"))
    _sub(did, "unitid", collection_meta.get("id", "collection"))
    dsc = _sub(archdesc, "dsc")
    for w in accepted:
        unit_c = _sub(dsc, "c", level="file", id=w.unit_id)
        udid = _sub(unit_c, "did")
        sm = w.metric.parsed_shelfmark()
        _sub(udid, "unittitle", sm.name if sm else w.metric.title)
        _sub(udid, "unitid", w.metric.shelfmark)
        if w.metric.title:
            _sub(unit_c, "scopecontent").append(_p(w.metric.title))
        for rec in _typed_documents(w, schema):
            doc_no = rec.parsed["doc_no"]
            item = _sub(unit_c, "c", level="item")
            idid = _sub(item, "did")
            _sub(idid, "unittitle", rec.get("title"))
            _sub(idid, "unitid", str(doc_no))
            date = rec.parsed.get("date")
            if date is not None:
                _sub(idid, "unitdate", rec.get("date"), **_ead_date(date))
            access = _sub(item, "controlaccess")
            _sub(access, "genreform", doc_no.category.label)
            for name_field, ref_field in _NAME_FIELDS:
                entry = _ref(rec, ref_field, sec)
                name = entry.preferred_name if entry else rec.get(name_field)
                if name:
                    _sub(access, "persname", name, role=name_field, **(_authority_attrs(entry) if entry else {}))
            place = _ref(rec, "place_sec", sec)
            place_name = place.preferred_name if place else rec.get("place")
            if place_name:
                _sub(access, "geogname", place_name, **(_authority_attrs(place) if place else {}))
    ET.indent(root)
    body = ET.tostring(root, encoding="unicode")
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + body + "\n"


def _p(text: str) -> ET.Element:
    el = ET.Element("p")
    el.text = text
    return el


# -- Dublin Core -----------------------------------------------------------


def export_dc(w: UnitWorkbook, mapping: ExportMapping = DEFAULT_MAPPING) -> list[tuple[str, str]]:
    if not w.metric.is_complete:
        raise MetricIncomplete(f"{w.unit_id}: metric title or shelfmark missing")
    values = dict(w.metric.items())
    return [(term, values[key]) for key, term in mapping.dc_terms if values.get(key, "")]


# -- files -----------------------------------------------------------------


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    csvio.write_bytes_atomic(path, text.encode("utf-8"))


def write_dc(path: Path, pairs: Sequence[tuple[str, str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    csvio.write_rows(path, ("term", "value"), pairs)
