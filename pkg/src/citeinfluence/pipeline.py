"""End-to-end per-paper analysis and citation-graph assembly."""
from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .classifier import aggregate_factors, bootstrap_label, classify
from .context import ContextExtractor
from .document import finalize_references
from .influence import InfluenceGraph, local_influence
from .ranking import citation_features, rank_references
from .sentiment import sentiment
from .text import count_words, normalize_whitespace


@dataclass(frozen=True)
class PaperAnalysis:
    paper: object
    factors: dict
    classes: dict
    ranked: list
    local: dict


def enrich_mentions(paper, sentiment_model, extractor=None):
    """Fill contexts, ``cit_word`` and ``sen_label`` of every mention."""
    extractor = extractor or ContextExtractor()
    cache = {}
    mentions = []
    for m in paper.mentions:
        if m.sent_id not in cache:
            a, b = extractor.contexts(paper.sentences, m.sent_id)
            label = sentiment(sentiment_model, m.cit_text, a, b)
            words = count_words(a) + count_words(m.cit_text) + count_words(b)
            cache[m.sent_id] = (a, b, label, words)
        a, b, label, words = cache[m.sent_id]
        mentions.append(replace(m, context_a=a, context_b=b, sen_label=label, cit_word=words))
    return finalize_references(replace(paper, mentions=tuple(mentions)))


def factor_vectors(paper):
    """``{cit_id: FactorVector}`` for every reference cited at least once."""
    return {r.cit_id: aggregate_factors(paper, r.cit_id) for r in paper.references if r.n_cit > 0}


def analyze_paper(paper, sentiment_model, classifier, ranker, extractor=None):
    """Contexts, sentiment, factors, classes, ranks and local influence for one paper.

    ``classifier=None`` falls back to the rule-based bootstrap labeler.
    """
    paper = enrich_mentions(paper, sentiment_model, extractor)
    factors = factor_vectors(paper)
    if classifier is None:
        classes = {c: bootstrap_label(fv) for c, fv in factors.items()}
    else:
        classes = {c: classify(classifier, fv) for c, fv in factors.items()}
    scores = ranker.score_references(citation_features(paper))
    ranked = rank_references(scores.items(), classes)
    n = len(ranked)
    local = {r.cit_id: local_influence(r.class_label, r.rank, n) for r in ranked}
    return PaperAnalysis(paper, factors, classes, ranked, local)


_TITLE_PUNCT = re.compile(r"[^\w\s]")


def title_key(title):
    return normalize_whitespace(_TITLE_PUNCT.sub(" ", title.lower()))


def external_id(title):
    return "ref:" + "-".join(title_key(title).split())


def build_graph(papers, local_influences, shares=None):
    """Citation graph over ingested papers and the external works they cite.

    ``papers`` are analysed :class:`Paper` records; ``local_influences`` maps
    paper_id to ``{cit_id: IF}``. References resolve to an ingested paper by
    exact normalized title, otherwise to an external node.
    """
    by_title = {title_key(p.title): p.paper_id for p in papers}
    nodes = [p.paper_id for p in sorted(papers, key=lambda p: p.paper_id)]
    authors = {p.paper_id: list(p.authors) for p in papers}
    shares = dict(shares or {})
    for p in papers:
        if p.author_shares:
            shares[p.paper_id] = dict(p.author_shares)
    edges = []
    for p in sorted(papers, key=lambda p: p.paper_id):
        local = local_influences.get(p.paper_id, {})
        for ref in p.references:
            if ref.cit_id not in local:
                continue
            target = by_title.get(title_key(ref.cit_title))
            if target is None:
                target = external_id(ref.cit_title)
                if target not in authors:
                    nodes.append(target)
                    authors[target] = list(dict.fromkeys(ref.cit_author))
            if target == p.paper_id:
                continue
            edges.append((p.paper_id, target, local[ref.cit_id]))
    return InfluenceGraph.from_authors(nodes, edges, authors, shares)
