import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from citeinfluence.context import (
    IRRELEVANT, RELATED, ContextExtractor, LexicalRelatedness, RelatednessVerdict, context_span,
    extract_context, jaccard, relatedness,
)
from citeinfluence.document import Sentence
from citeinfluence.text import content_stems


def always(label):
    return lambda s1, s2: RelatednessVerdict(label, 1.0)


def fixture_sentences(sizes):
    """Sentences grouped into paragraphs of the given sizes."""
    out = []
    for pid, size in enumerate(sizes):
        for _ in range(size):
            out.append(Sentence(len(out), f"Sentence number {len(out)} about topic {pid}.", pid, 1))
    return out


def paragraph_bounds(sentences, sent_id):
    pid = sentences[sent_id].paragraph_id
    same = [s.sent_id for s in sentences if s.paragraph_id == pid]
    return [i for i in same if i < sent_id], [i for i in same if i > sent_id]


def test_self_related():
    s = "the model uses attention layers"
    assert relatedness(s, s).related
    assert relatedness(s, s).confidence == 1.0


def test_disjoint_irrelevant():
    v = relatedness("graphs converge quickly", "students enjoyed lunch")
    assert v.label == IRRELEVANT


def test_hand_jaccard_example():
    s1, s2 = "the model uses attention layers", "attention layers improve the model"
    a, b = content_stems(s1), content_stems(s2)
    # model, use, attention, layer vs attention, layer, improve, model
    assert len(a & b) / len(a | b) == pytest.approx(3 / 5)
    assert jaccard(s1, s2) == pytest.approx(3 / 5)
    assert relatedness(s1, s2).label == RELATED


def test_tau_knob():
    s1, s2 = "the model uses attention layers", "attention layers improve the model"
    assert not LexicalRelatedness(tau=0.7)(s1, s2).related


def test_first_in_paragraph_has_empty_context_a():
    sents = fixture_sentences([3, 4])
    assert extract_context(sents, 3, "backward", always(RELATED)) == ""


def test_stubs_on_paragraph_4_to_9():
    sents = fixture_sentences([4, 6, 3])
    a = context_span(sents, 6, "backward", always(RELATED))
    b = context_span(sents, 6, "forward", always(RELATED))
    assert (a, b) == ([4, 5], [7, 8, 9])
    assert ContextExtractor(always(IRRELEVANT)).contexts(sents, 6) == ("", "")
    a_text, b_text = ContextExtractor(always(RELATED)).contexts(sents, 6)
    assert a_text == " ".join(sents[i].text for i in (4, 5))


def test_stops_at_first_irrelevant():
    sents = fixture_sentences([10])
    calls = []

    def judge(s1, s2):
        calls.append(s1)
        # sentence 2 is irrelevant to the anchor; 1 and 0 would be related
        return RelatednessVerdict(IRRELEVANT if "number 2 " in s1 else RELATED, 1.0)

    assert context_span(sents, 5, "backward", judge) == [3, 4]
    assert calls[-1] == sents[2].text and len(calls) == 3


def test_max_span():
    sents = fixture_sentences([10])
    assert context_span(sents, 5, "forward", always(RELATED), max_span=2) == [6, 7]


def test_bad_index():
    with pytest.raises(IndexError):
        context_span(fixture_sentences([2]), 5, "forward")


@given(st.lists(st.integers(1, 8), min_size=1, max_size=8), st.data())
def test_context_invariants(sizes, data):
    sents = fixture_sentences(sizes)
    sid = data.draw(st.integers(0, len(sents) - 1))
    flags = data.draw(st.lists(st.booleans(), min_size=len(sents), max_size=len(sents)))

    def judge(s1, s2):
        j = int(s1.split()[2])
        return RelatednessVerdict(RELATED if flags[j] else IRRELEVANT, 1.0)

    before, after = paragraph_bounds(sents, sid)
    a = context_span(sents, sid, "backward", judge)
    b = context_span(sents, sid, "forward", judge)
    # contiguous, adjacent to the anchor, inside the paragraph
    assert a == list(range(sid - len(a), sid)) and set(a) <= set(before)
    assert b == list(range(sid + 1, sid + 1 + len(b))) and set(b) <= set(after)
    # nothing past the first irrelevant sentence
    if len(a) < len(before):
        assert not flags[sid - len(a) - 1]
    if len(b) < len(after):
        assert not flags[sid + len(b) + 1]
    assert context_span(sents, sid, "backward", judge) == a


def test_deterministic_default_judge():
    rng = np.random.default_rng(0)
    vocab = ["model", "graph", "citation", "ranking", "score", "paper", "author", "tree"]
    sents = [Sentence(i, " ".join(rng.choice(vocab, 4)), i // 5, 1) for i in range(20)]
    ex = ContextExtractor()
    assert [ex.contexts(sents, i) for i in range(20)] == [ex.contexts(sents, i) for i in range(20)]
