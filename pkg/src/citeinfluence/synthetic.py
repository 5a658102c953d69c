"""Seeded synthetic data generators with known ground truth."""
from __future__ import annotations

import numpy as np

from .classifier import FactorVector, bootstrap_label
from .influence import InfluenceGraph
from .span import CONJUNCTIONS, AnnotatedToken, SpanSentence, segment_ids

_WORDS = ("model", "method", "data", "results", "task", "corpus", "features", "approach",
          "training", "accuracy", "network", "parser", "graph", "baseline", "system", "score")
_TAGS = ("NN", "NNS", "VB", "VBZ", "JJ", "DT", "IN", "RB")


def random_factor_vector(rng):
    au = float(rng.choice([0.0, rng.uniform(0.01, 0.49), rng.uniform(0.5, 1.0)]))
    return FactorVector(
        au_overlap=au,
        sec_id=int(rng.integers(0, 3)),
        n_cit=int(rng.integers(1, 8)),
        cit_word=int(rng.integers(8, 150)),
        sen_label=int(rng.integers(-1, 2)),
    )


def separable_factor_dataset(n=400, random_state=0):
    """Random factor vectors labelled deterministically by :func:`bootstrap_label`."""
    rng = np.random.default_rng(random_state)
    rows = []
    for _ in range(n):
        fv = random_factor_vector(rng)
        rows.append((fv, bootstrap_label(fv)))
    return rows


def ranking_queries(n_queries=200, noise=0.05, random_state=0):
    """Queries of 5-15 occurrence rows whose label is a monotone function of ``n_cit``.

    label = min(3, (n_cit - 1) // 2); with probability ``noise`` a row's label
    is redrawn uniformly from 0..3. The other three features are random.
    """
    rng = np.random.default_rng(random_state)
    queries = []
    for _ in range(n_queries):
        size = int(rng.integers(5, 16))
        rows, labels = [], []
        for _ in range(size):
            n_cit = int(rng.integers(1, 9))
            label = min(3, (n_cit - 1) // 2)
            if rng.random() < noise:
                label = int(rng.integers(0, 4))
            rows.append([rng.random(), n_cit, int(rng.integers(5, 120)), int(rng.integers(-1, 2))])
            labels.append(label)
        queries.append((np.array(rows, dtype=float), np.array(labels)))
    return queries


def random_paper_features(rng, min_refs=3, max_refs=12):
    """Occurrence-feature rows per reference for one random paper."""
    n_refs = int(rng.integers(min_refs, max_refs + 1))
    feats = {}
    for cit_id in range(1, n_refs + 1):
        n_cit = int(rng.integers(1, 6))
        au = float(rng.choice([0.0, rng.random()]))
        feats[cit_id] = np.array(
            [[au, n_cit, int(rng.integers(5, 120)), int(rng.integers(-1, 2))] for _ in range(n_cit)],
            dtype=float,
        )
    return feats


def random_dag(n_nodes, rng, edge_prob=0.08, n_authors=None):
    """Random citation DAG: node ``i`` may cite only nodes with a larger index."""
    nodes = [f"p{i:03d}" for i in range(n_nodes)]
    edges = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.random() < edge_prob:
                edges.append((nodes[i], nodes[j], float(rng.uniform(-1.0, 1.0))))
    authors = {}
    if n_authors:
        pool = [f"a{k:02d}" for k in range(n_authors)]
        for p in nodes:
            k = int(rng.integers(1, 4))
            authors[p] = sorted(rng.choice(pool, size=min(k, len(pool)), replace=False).tolist())
    return InfluenceGraph.from_authors(nodes, edges, authors)


def span_corpus(n_sentences=500, noise=0.1, random_state=0):
    """Sentences whose gold span is: same segment as the marker and within 6 words.

    Sentences have 6-14 words, the marker sits in the first part, and at most
    one separator (comma or coordinating conjunction) follows it. Each gold
    flag is then flipped with probability ``noise``.
    """
    rng = np.random.default_rng(random_state)
    conj = sorted(CONJUNCTIONS)
    out = []
    for _ in range(n_sentences):
        length = int(rng.integers(6, 15))
        target = int(rng.integers(1, max(2, length // 2)))
        words = [str(rng.choice(_WORDS)) for _ in range(length)]
        words[target] = f"[{int(rng.integers(1, 40))}]"
        if rng.random() < 0.6:
            sep_at = int(rng.integers(target + 2, length + 1)) if target + 2 <= length else None
            if sep_at is not None and sep_at < length:
                words[sep_at] = "," if rng.random() < 0.5 else str(rng.choice(conj))
        if rng.random() < 0.2 and target >= 3:
            words[int(rng.integers(1, target - 1))] = ","
        tokens = [AnnotatedToken(w, i, pos_tag=str(rng.choice(_TAGS))) for i, w in enumerate(words)]
        segs = segment_ids(tokens)
        final = []
        for i, t in enumerate(tokens):
            gold = segs[i] == segs[target] and abs(i - target) <= 6
            if rng.random() < noise:
                gold = not gold
            final.append(AnnotatedToken(t.text, t.index, t.pos_tag, gold_in_span=gold))
        out.append(SpanSentence(tuple(final), target))
    return out


def toy_corpus_paths():
    """Paths of the bundled 12-paper corpus whose influence values are known by hand."""
    from importlib import resources

    root = resources.files("citeinfluence").joinpath("data/toy_corpus")
    return sorted(str(p) for p in root.iterdir() if p.name.endswith(".json"))
