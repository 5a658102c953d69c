"""Corpus data model, ingestion parsing, segmentation and citation matching."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Mapping

from .text import count_words, normalize_author, normalize_whitespace, surname


class ParseError(ValueError):
    """Raised when an ingestion document is malformed."""


class EmptyReferencesError(ParseError):
    pass


SECTION_RELATED = 0
SECTION_BODY = 1
SECTION_CLOSING = 2

_SECTION_KEYWORDS = (
    (SECTION_RELATED, ("related work", "introduction", "background", "preliminaries")),
    (SECTION_CLOSING, ("conclusion", "discussion", "future work", "acknowledgement",
                       "acknowledgment", "appendix")),
)


@dataclass(frozen=True)
class Sentence:
    sent_id: int
    text: str
    paragraph_id: int
    section: int


@dataclass(frozen=True)
class Section:
    sec_id: int
    heading: str
    paragraphs: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class ReferenceEntry:
    cit_id: int
    cit_title: str
    cit_author: tuple[str, ...]
    cit_year: int | None
    n_cit: int = 0
    au_overlap: float = 0.0


@dataclass(frozen=True)
class CitationMention:
    cit_id: int
    sent_id: int
    sec_id: int
    cit_text: str
    context_a: str = ""
    context_b: str = ""
    sen_label: int = 0
    cit_word: int = 0


@dataclass(frozen=True)
class Paper:
    paper_id: str
    title: str
    authors: tuple[str, ...]
    year: int | None
    sections: tuple[Section, ...]
    sentences: tuple[Sentence, ...]
    references: tuple[ReferenceEntry, ...]
    mentions: tuple[CitationMention, ...] = ()
    diagnostics: tuple[str, ...] = ()
    author_shares: Mapping[str, float] | None = field(default=None, compare=True)

    def reference(self, cit_id):
        for ref in self.references:
            if ref.cit_id == cit_id:
                return ref
        raise KeyError(f"unknown cit_id {cit_id} in paper {self.paper_id}")

    def mentions_of(self, cit_id):
        return [m for m in self.mentions if m.cit_id == cit_id]


def author_overlap(a, b):
    """Dice overlap ``2|A & B| / (|A| + |B|)`` of two author sets; 0 when both are empty."""
    a, b = set(a), set(b)
    if not a and not b:
        return 0.0
    return 2.0 * len(a & b) / (len(a) + len(b))


def classify_section(heading):
    """Map a section heading to 0 (related/intro), 1 (body) or 2 (closing parts)."""
    h = heading.lower()
    for code, keywords in _SECTION_KEYWORDS:
        if any(k in h for k in keywords):
            return code
    return SECTION_BODY


# --- sentence segmentation -------------------------------------------------

_ABBREVIATIONS = frozenset(
    "al. e.g. i.e. fig. figs. eq. eqs. vs. etc. cf. resp. sec. no. vol. pp. approx. "
    "dr. prof. mr. ms. tab. ch. ref. refs.".split()
)
_OPENERS = "([{"
_CLOSERS = ")]}"
_TRAILING = "\"')]}’”"


def _ends_sentence(token):
    core = token.rstrip(_TRAILING)
    if not core or core[-1] not in ".!?":
        return False
    if core[-1] == ".":
        low = core.lower().lstrip("(\"'")
        if low in _ABBREVIATIONS:
            return False
        # initials such as "J." or "J.A."
        if re.fullmatch(r"(?:[A-Za-z]\.)+", low):
            return False
    return True


def _starts_sentence(token):
    c = token[0]
    return c.isupper() or c.isdigit() or c in "\"'“‘(["


def segment_sentences(section_text):
    """Split normalized text into sentences.

    Breaks after ``.``, ``!`` or ``?`` when the next token looks like a
    sentence start, except after known abbreviations and initials, and never
    inside brackets. Joining the result with single spaces gives back the
    whitespace-normalized input.
    """
    tokens = section_text.split()
    sentences, current, depth = [], [], 0
    for i, tok in enumerate(tokens):
        current.append(tok)
        for ch in tok:
            if ch in _OPENERS:
                depth += 1
            elif ch in _CLOSERS and depth > 0:
                depth -= 1
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        if depth == 0 and _ends_sentence(tok) and (nxt is None or _starts_sentence(nxt)):
            sentences.append(" ".join(current))
            current = []
    if current:
        sentences.append(" ".join(current))
    return sentences


# --- citation markers ------------------------------------------------------

_NUMERIC_MARKER = re.compile(r"\[\s*(\d+(?:\s*[-–—]\s*\d+)?(?:\s*[,;]\s*\d+(?:\s*[-–—]\s*\d+)?)*)\s*\]")
_NAME = r"[A-Z][A-Za-z'\-]+"
_AUTHOR_YEAR = re.compile(
    rf"^(?P<name>{_NAME})(?:\s+et\s+al\.?|\s+(?:and|&)\s+{_NAME})?,?\s+(?P<year>\d{{4}})[a-z]?$"
)
_PAREN = re.compile(r"\(([^()]*\d{4}[^()]*)\)")
_NARRATIVE = re.compile(
    rf"(?P<name>{_NAME})(?:\s+et\s+al\.?|\s+(?:and|&)\s+{_NAME})?\s+\((?P<year>\d{{4}})[a-z]?\)"
)


def _expand_numeric(body):
    ids = []
    for part in re.split(r"\s*[,;]\s*", body.strip()):
        bounds = re.split(r"\s*[-–—]\s*", part)
        if len(bounds) == 2:
            lo, hi = int(bounds[0]), int(bounds[1])
            if lo > hi:
                lo, hi = hi, lo
            ids.extend(range(lo, hi + 1))
        else:
            ids.append(int(bounds[0]))
    seen, out = set(), []
    for i in ids:
        if i not in seen:
            seen.add(i)
            out.append(i)
    return out


def _surname_key(name):
    return surname(normalize_author(name))


def find_markers(text):
    """Return ``(kind, key)`` tuples for every citation key found in ``text``.

    ``kind`` is ``"num"`` with an integer key, or ``"ay"`` with a
    ``(surname, year)`` key, in order of appearance.
    """
    found = []
    for m in _NUMERIC_MARKER.finditer(text):
        found.extend((m.start(), "num", k) for k in _expand_numeric(m.group(1)))
    for m in _PAREN.finditer(text):
        for part in m.group(1).split(";"):
            ay = _AUTHOR_YEAR.match(part.strip())
            if ay:
                found.append((m.start(), "ay", (_surname_key(ay.group("name")), int(ay.group("year")))))
    for m in _NARRATIVE.finditer(text):
        found.append((m.start(), "ay", (_surname_key(m.group("name")), int(m.group("year")))))
    found.sort(key=lambda t: t[0])
    return [(kind, key) for _, kind, key in found]


def match_citations(paper, strict=False):
    """Resolve in-text markers to references.

    Returns ``(mentions, diagnostics)``. A marker naming ``m`` references
    yields ``m`` mentions sharing one sentence. Unresolvable markers go to
    ``diagnostics`` unless ``strict``, in which case :class:`ParseError` is
    raised.
    """
    numeric = {r.cit_id for r in paper.references}
    by_author_year = {}
    for r in paper.references:
        if r.cit_author and r.cit_year is not None:
            by_author_year.setdefault((surname(r.cit_author[0]), r.cit_year), r.cit_id)

    mentions, diagnostics = [], []
    for s in paper.sentences:
        for kind, key in find_markers(s.text):
            if kind == "num":
                cit_id = key if key in numeric else None
                label = f"[{key}]"
            else:
                cit_id = by_author_year.get(key)
                label = f"({key[0]}, {key[1]})"
            if cit_id is None:
                msg = f"sentence {s.sent_id}: unresolved citation marker {label}"
                if strict:
                    raise ParseError(msg)
                diagnostics.append(msg)
                continue
            mentions.append(CitationMention(
                cit_id=cit_id, sent_id=s.sent_id, sec_id=s.section, cit_text=s.text,
                cit_word=count_words(s.text),
            ))
    return mentions, diagnostics


# --- ingestion -------------------------------------------------------------

def _require(obj, key, where, kind=None):
    if not isinstance(obj, Mapping) or key not in obj:
        raise ParseError(f"{where}.{key}: missing field")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise ParseError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}")
    return value


def _year(value, where):
    if value is None or value == "":
        return None
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ParseError(f"{where}: invalid year {value!r}") from None


def parse_paper(raw, strict=True):
    """Build a :class:`Paper` from an ingestion record.

    ``raw`` is a mapping or a JSON string. Paragraphs may be given either as
    a string (segmented here) or as a list of sentence strings.
    """
    if isinstance(raw, (str, bytes)):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"document: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(raw, Mapping):
        raise ParseError("document: expected a key-value object at top level")

    paper_id = str(_require(raw, "paper_id", "document"))
    title = _require(raw, "title", "document", str)
    authors_raw = _require(raw, "authors", "document", list)
    year = _year(raw.get("year"), "document.year")
    authors = tuple(dict.fromkeys(normalize_author(a) for a in authors_raw if str(a).strip()))

    refs_raw = _require(raw, "references", "document", list)
    if not refs_raw:
        raise EmptyReferencesError("document.references: reference list is empty")
    references, seen = [], set()
    for i, ref in enumerate(refs_raw):
        where = f"references[{i}]"
        cit_id = _require(ref, "cit_id", where)
        if not isinstance(cit_id, int) or isinstance(cit_id, bool) or cit_id < 1:
            raise ParseError(f"{where}.cit_id: expected positive integer")
        if cit_id in seen:
            raise ParseError(f"{where}.cit_id: duplicate reference number {cit_id}")
        seen.add(cit_id)
        references.append(ReferenceEntry(
            cit_id=cit_id,
            cit_title=_require(ref, "title", where, str),
            cit_author=tuple(normalize_author(a) for a in _require(ref, "authors", where, list)),
            cit_year=_year(ref.get("year"), f"{where}.year"),
        ))

    sections, sentences = [], []
    paragraph_id = 0
    for si, sec in enumerate(_require(raw, "sections", "document", list)):
        where = f"sections[{si}]"
        heading = _require(sec, "heading", where, str)
        sec_id = classify_section(heading) if heading.strip() else SECTION_BODY
        paragraphs = []
        for pi, para in enumerate(_require(sec, "paragraphs", where, list)):
            pwhere = f"{where}.paragraphs[{pi}]"
            if isinstance(para, str):
                texts = segment_sentences(normalize_whitespace(para))
            elif isinstance(para, list) and all(isinstance(t, str) for t in para):
                texts = [normalize_whitespace(t) for t in para]
            else:
                raise ParseError(f"{pwhere}: expected text or list of sentence texts")
            ids = []
            for text in texts:
                if not text:
                    continue
                sentences.append(Sentence(len(sentences), text, paragraph_id, sec_id))
                ids.append(len(sentences) - 1)
            if ids:
                paragraphs.append(tuple(ids))
                paragraph_id += 1
        sections.append(Section(sec_id, heading, tuple(paragraphs)))

    shares = raw.get("author_shares")
    if shares is not None:
        if not isinstance(shares, Mapping):
            raise ParseError("document.author_shares: expected name -> share mapping")
        shares = {normalize_author(k): float(v) for k, v in shares.items()}

    paper = Paper(
        paper_id=paper_id, title=title, authors=authors, year=year,
        sections=tuple(sections), sentences=tuple(sentences), references=tuple(references),
        author_shares=shares,
    )
    mentions, diagnostics = match_citations(paper, strict=strict)
    return finalize_references(replace(paper, mentions=tuple(mentions), diagnostics=tuple(diagnostics)))


def finalize_references(paper):
    """Recompute ``n_cit`` and ``au_overlap`` for every reference."""
    counts = {}
    for m in paper.mentions:
        counts[m.cit_id] = counts.get(m.cit_id, 0) + 1
    refs = tuple(
        replace(r, n_cit=counts.get(r.cit_id, 0), au_overlap=author_overlap(paper.authors, r.cit_author))
        for r in paper.references
    )
    return replace(paper, references=refs)


def paper_to_dict(paper):
    return {
        "paper_id": paper.paper_id,
        "title": paper.title,
        "authors": list(paper.authors),
        "year": paper.year,
        "sections": [
            {"sec_id": s.sec_id, "heading": s.heading, "paragraphs": [list(p) for p in s.paragraphs]}
            for s in paper.sections
        ],
        "sentences": [
            {"sent_id": s.sent_id, "text": s.text, "paragraph_id": s.paragraph_id, "section": s.section}
            for s in paper.sentences
        ],
        "references": [
            {"cit_id": r.cit_id, "cit_title": r.cit_title, "cit_author": list(r.cit_author),
             "cit_year": r.cit_year, "n_cit": r.n_cit, "au_overlap": r.au_overlap}
            for r in paper.references
        ],
        "mentions": [m.__dict__.copy() for m in paper.mentions],
        "diagnostics": list(paper.diagnostics),
        "author_shares": None if paper.author_shares is None else dict(paper.author_shares),
    }


def paper_from_dict(d):
    return Paper(
        paper_id=d["paper_id"],
        title=d["title"],
        authors=tuple(d["authors"]),
        year=d["year"],
        sections=tuple(Section(s["sec_id"], s["heading"], tuple(tuple(p) for p in s["paragraphs"]))
                       for s in d["sections"]),
        sentences=tuple(Sentence(**s) for s in d["sentences"]),
        references=tuple(ReferenceEntry(r["cit_id"], r["cit_title"], tuple(r["cit_author"]),
                                        r["cit_year"], r["n_cit"], r["au_overlap"])
                         for r in d["references"]),
        mentions=tuple(CitationMention(**m) for m in d["mentions"]),
        diagnostics=tuple(d["diagnostics"]),
        author_shares=d.get("author_shares"),
    )


def load_paper(path, strict=True):
    with open(path, encoding="utf-8") as fh:
        return parse_paper(fh.read(), strict=strict)

