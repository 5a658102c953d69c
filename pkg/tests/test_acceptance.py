"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v`` (the lines are
printed even when output capture is on) or ``python tests/test_acceptance.py``.
"""
import graphlib
import os
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from citeinfluence.classifier import classify, train_classifier
from citeinfluence.context import IRRELEVANT, RELATED, RelatednessVerdict, context_span
from citeinfluence.document import Sentence, author_overlap
from citeinfluence.influence import propagate, read_graph, removal_violations
from citeinfluence.ranking import LambdaMARTRanker, ndcg, pairwise_error, ranking_from_scores, train_lambdamart
from citeinfluence.span import cross_validate
from citeinfluence.store import CorpusStore
from citeinfluence.synthetic import (
    random_dag, random_paper_features, ranking_queries, separable_factor_dataset, span_corpus,
)

from conftest import TOY_AF, read_tsv, run_cli, run_toy_pipeline
from test_classifier import all_combos, bayes_oracle


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return _report


def test_1_author_overlap_oracle(report):
    rng = np.random.default_rng(1)
    pool = [f"{chr(97 + i % 26)} author{i}" for i in range(40)]
    pairs = [(set(rng.choice(pool, rng.integers(0, 9), replace=False)),
              set(rng.choice(pool, rng.integers(0, 9), replace=False))) for _ in range(1000)]
    start = time.perf_counter()
    got = [author_overlap(a, b) for a, b in pairs]
    elapsed = time.perf_counter() - start

    def oracle(a, b):
        shared = sum(1 for x in a if x in b)
        return 0.0 if not a and not b else 2 * shared / (len(a) + len(b))

    mismatches = sum(g != oracle(a, b) for g, (a, b) in zip(got, pairs))
    report(1, mismatches == 0 and elapsed < 1.0,
           f"{mismatches} mismatches on 1000 pairs, {elapsed * 1000:.1f} ms")


def _exact_dag(graph, d):
    citers = graph.citers()
    order = graphlib.TopologicalSorter({n: [c for c, _ in citers[n]] for n in graph.nodes}).static_order()
    af = {}
    for n in order:
        af[n] = 1.0 + d * sum(af[c] * w for c, w in citers[n])
    return af


def test_2_propagation_order_invariance(report):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst_exact = worst_sched = 0.0
    for _ in range(100):
        g = random_dag(int(rng.integers(2, 101)), rng, edge_prob=float(rng.uniform(0.01, 0.1)))
        exact = _exact_dag(g, 0.85)
        sync = propagate(g, 0.85).af
        s1 = propagate(g, 0.85, schedule=list(rng.permutation(g.nodes))).af
        s2 = propagate(g, 0.85, schedule=list(rng.permutation(g.nodes))).af
        worst_exact = max(worst_exact, max(abs(sync[n] - exact[n]) for n in g.nodes))
        worst_sched = max(worst_sched, max(abs(s1[n] - s2[n]) for n in g.nodes))
    elapsed = time.perf_counter() - start
    report(2, worst_exact <= 1e-8 and worst_sched <= 1e-8 and elapsed < 30,
           f"max |sync-exact| {worst_exact:.2e}, max |sched1-sched2| {worst_sched:.2e}, {elapsed:.1f} s")


def test_3_removal_invariance(report):
    ranker = train_lambdamart(ranking_queries(200, random_state=3), random_state=3)
    rng = np.random.default_rng(3)
    single = chained = 0
    for _ in range(100):
        feats = random_paper_features(rng)
        single += len(removal_violations(feats, ranker, sequential=False))
        chained += len(removal_violations(feats, ranker, sequential=True))
    report(3, single == 0 and chained == 0,
           f"{single} violations over single deletions, {chained} including top-prefix deletions, 100 papers")


def test_4_lambdamart_learning(report):
    queries = ranking_queries(200, noise=0.05, random_state=4)
    train, test = queries[:150], queries[150:]
    start = time.perf_counter()
    model = train_lambdamart(train)
    elapsed = time.perf_counter() - start
    held = float(np.mean([ndcg(ranking_from_scores(model.predict(X)), y) for X, y in test]))
    staged = []
    for k in range(len(model.trees_) + 1):
        prefix = LambdaMARTRanker.from_trees(model.trees_[:k], model.learning_rate)
        staged.append(float(np.mean([pairwise_error(prefix.predict(X), y) for X, y in train if len(set(y)) > 1])))
    rises = sum(b > a + 1e-12 for a, b in zip(staged, staged[1:]))
    report(4, held >= 0.95 and rises == 0 and elapsed < 60,
           f"held-out NDCG {held:.4f}, {rises} rises in pairwise error over {len(model.trees_)} trees "
           f"({staged[0]:.4f} -> {staged[-1]:.4f}), {elapsed:.1f} s")


def test_5_naive_bayes(report):
    rows = separable_factor_dataset(400, random_state=5)
    model = train_classifier(rows[:300])
    acc = float(np.mean([classify(model, fv) == c for fv, c in rows[300:]]))
    combos = list(all_combos())
    proba = model.predict_proba(combos)
    worst = 0.0
    for fv, p in zip(combos, proba):
        want = np.array([float(x) for x in bayes_oracle(rows[:300], fv)])
        worst = max(worst, float(np.max(np.abs(p - want) / want)))
    report(5, acc >= 0.95 and worst <= 1e-12,
           f"held-out accuracy {acc:.3f}, max relative posterior error {worst:.1e} over {len(combos)} cells")


def test_6_context_stubs(report):
    rng = np.random.default_rng(6)
    sents, pid = [], 0
    while len(sents) < 50:
        for _ in range(min(int(rng.integers(1, 9)), 50 - len(sents))):
            sents.append(Sentence(len(sents), f"s{len(sents)}", pid, 1))
        pid += 1

    def related(a, b):
        return RelatednessVerdict(RELATED, 1.0)

    def irrelevant(a, b):
        return RelatednessVerdict(IRRELEVANT, 1.0)

    bad = 0
    for s in sents:
        same = [t.sent_id for t in sents if t.paragraph_id == s.paragraph_id]
        want_a = [i for i in same if i < s.sent_id]
        want_b = [i for i in same if i > s.sent_id]
        bad += context_span(sents, s.sent_id, "backward", related) != want_a
        bad += context_span(sents, s.sent_id, "forward", related) != want_b
        bad += context_span(sents, s.sent_id, "backward", irrelevant) != []
        bad += context_span(sents, s.sent_id, "forward", irrelevant) != []
    report(6, bad == 0, f"{bad} mismatches over 50 sentences in {pid} paragraphs, both stubs, both directions")


def test_7_span_detector(report):
    data = span_corpus(500, noise=0.1, random_state=0)
    start = time.perf_counter()
    res = cross_validate(data, k=10, random_state=0)["logistic_regression"]
    elapsed = time.perf_counter() - start
    gap = abs(res.f1 - 2 * res.precision * res.recall / (res.precision + res.recall))
    report(7, res.f1 >= 0.9 and gap <= 1e-12 and elapsed < 30,
           f"10-fold P {res.precision:.3f} R {res.recall:.3f} F1 {res.f1:.3f}, "
           f"identity gap {gap:.1e}, {elapsed:.1f} s")


def _rational_af(graph, d):
    citers = graph.citers()
    order = graphlib.TopologicalSorter({n: [c for c, _ in citers[n]] for n in graph.nodes}).static_order()
    af = {}
    for n in order:
        af[n] = 1 + Fraction(d) * sum((af[c] * Fraction(repr(w)) for c, w in citers[n]), Fraction(0))
    return af


def test_8_toy_corpus_tables(report, tmp_path):
    store = str(tmp_path / "toy")
    run_toy_pipeline(store)
    papers = {r[0]: float(r[1]) for r in read_tsv(os.path.join(store, "af_papers.tsv"))}
    authors = {r[0]: float(r[1]) for r in read_tsv(os.path.join(store, "af_authors.tsv"))}
    graph = read_graph(os.path.join(store, "graph.txt"))
    exact = _rational_af(graph, Fraction("0.85"))
    problems = []
    # hand values are exact decimals of the rational fixpoint
    for pid, hand in TOY_AF.items():
        if Fraction(repr(hand)) != exact[pid]:
            problems.append(f"hand {pid}")
        if abs(papers[pid] - hand) > 1e-12:
            problems.append(f"paper {pid}")
    for pid in graph.nodes:
        if abs(papers[pid] - float(exact[pid])) > 1e-12:
            problems.append(f"node {pid}")
    for author in graph.authors():
        want = sum((Fraction(repr(s)) * exact[p] for p, s in graph.papers_of(author)), Fraction(0))
        if abs(authors[author] - float(want)) > 1e-12:
            problems.append(f"author {author}")
    hand_authors = {"f allen": 1.184684375, "a lovelace": 1.9360625, "b liskov": 2.4025}
    for a, v in hand_authors.items():
        if abs(authors[a] - v) > 1e-12:
            problems.append(f"hand author {a}")

    # the two worked examples through the CLI graph path
    g1 = tmp_path / "two.txt"
    g1.write_text("[edges]\nB\tA\t0.5\n")
    run_cli("--store", tmp_path / "s1", "propagate", "--graph", g1)
    two = {r[0]: float(r[1]) for r in read_tsv(tmp_path / "s1" / "af_papers.tsv")}
    if two != {"A": 1.425, "B": 1.0}:
        problems.append("2-node example")
    g2 = tmp_path / "share.txt"
    g2.write_text("[edges]\nB\tA\t1.0\n[authors]\nx\tA\t0.5\ny\tA\t0.5\n")
    run_cli("--store", tmp_path / "s2", "propagate", "--damping", "1", "--graph", g2)
    share = {r[0]: float(r[1]) for r in read_tsv(tmp_path / "s2" / "af_authors.tsv")}
    if share != {"x": 1.0, "y": 1.0}:
        problems.append("equal-share example")
    report(8, not problems,
           f"{len(TOY_AF)} hand paper values, {len(graph.nodes)} graph nodes, {len(authors)} authors checked; "
           f"problems: {problems or 'none'}")


def test_9_determinism(report, tmp_path):
    digests = []
    for run in ("a", "b"):
        store = str(tmp_path / run)
        run_toy_pipeline(store, seed=0)
        digests.append(CorpusStore(store).digest())
    report(9, digests[0] == digests[1], f"store digests {digests[0][:12]} / {digests[1][:12]}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
