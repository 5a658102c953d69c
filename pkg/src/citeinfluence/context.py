"""Citation context expansion around a citing sentence.

The iteration walks outwards from the citing sentence one neighbour at a
time, asking a pluggable relatedness judge whether the neighbour belongs to
the same discussion. It stops at the first "irrelevant" verdict or when the
neighbour leaves the citing sentence's paragraph.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Optional

from .text import content_stems

RELATED = "related"
IRRELEVANT = "irrelevant"

DEFAULT_TAU = 0.12


@dataclass(frozen=True)
class RelatednessVerdict:
    label: Literal["related", "irrelevant"]
    confidence: float

    @property
    def related(self):
        return self.label == RELATED


Relatedness = Callable[[str, str], RelatednessVerdict]


def jaccard(s1, s2):
    a, b = content_stems(s1), content_stems(s2)
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


class LexicalRelatedness:
    """Related iff the Jaccard similarity of content-word stems reaches ``tau``."""

    def __init__(self, tau=DEFAULT_TAU):
        if not 0.0 <= tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        self.tau = tau

    def __call__(self, s1, s2):
        sim = jaccard(s1, s2)
        if sim >= self.tau:
            return RelatednessVerdict(RELATED, sim)
        return RelatednessVerdict(IRRELEVANT, 1.0 - sim)

    def __repr__(self):
        return f"LexicalRelatedness(tau={self.tau})"


def relatedness(s1, s2, tau=DEFAULT_TAU):
    return LexicalRelatedness(tau)(s1, s2)


def context_span(sentences, sent_id, direction, judge: Optional[Relatedness] = None,
                 max_span=None):
    """Indices of the accepted context sentences, in document order."""
    if not 0 <= sent_id < len(sentences):
        raise IndexError(f"sent_id {sent_id} out of range")
    if direction not in ("backward", "forward"):
        raise ValueError("direction must be 'backward' or 'forward'")
    judge = judge or LexicalRelatedness()
    step = -1 if direction == "backward" else 1
    anchor = sentences[sent_id]
    accepted = []
    i = 1
    while max_span is None or i <= max_span:
        j = sent_id + step * i
        if not 0 <= j < len(sentences) or sentences[j].paragraph_id != anchor.paragraph_id:
            break
        if not judge(sentences[j].text, anchor.text).related:
            break
        accepted.append(j)
        i += 1
    return sorted(accepted)


def extract_context(sentences, sent_id, direction, judge=None, max_span=None):
    idx = context_span(sentences, sent_id, direction, judge, max_span)
    return " ".join(sentences[j].text for j in idx)


class ContextExtractor:
    """Fills ``context_a`` / ``context_b`` of every mention in a paper."""

    def __init__(self, judge: Optional[Relatedness] = None, max_span=None):
        self.judge = judge
        self.max_span = max_span

    def contexts(self, sentences, sent_id):
        judge = self.judge or LexicalRelatedness()
        return (
            extract_context(sentences, sent_id, "backward", judge, self.max_span),
            extract_context(sentences, sent_id, "forward", judge, self.max_span),
        )
