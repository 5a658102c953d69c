"""Per-citation scoring and reference ranking with LambdaMART.

Each in-text citation ``c_ij`` of reference ``i`` is described by the
quaternion ``(au_overlap, n_cit, cit_word, sen_label)``. The ensemble scores
every occurrence independently; a reference's score is the mean of its
occurrence scores, and references are ranked by that mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

FEATURE_NAMES = ("au_overlap", "n_cit", "cit_word", "sen_label")
MODEL_HEADER = "# citeinfluence-lambdamart v1"


@dataclass(frozen=True)
class RankedReference:
    cit_id: int
    score: float
    rank: int
    class_label: Optional[int] = None


# --- metrics ---------------------------------------------------------------

def dcg(labels_in_order):
    labels = np.asarray(labels_in_order, dtype=float)
    if labels.size == 0:
        return 0.0
    disc = np.log2(np.arange(2, labels.size + 2))
    return float(np.sum((2.0 ** labels - 1.0) / disc))


def ndcg(ranking, labels):
    """NDCG of ``ranking`` (item indices, best first) over the full list.

    Gain is ``2**label - 1`` and the discount ``log2(position + 1)``. Returns
    1.0 when the ideal DCG is zero.
    """
    labels = np.asarray(labels, dtype=float)
    ranking = list(ranking)
    if sorted(ranking) != list(range(len(labels))):
        raise ValueError("ranking must be a permutation of the labelled items")
    ideal = dcg(np.sort(labels)[::-1])
    if ideal == 0.0:
        return 1.0
    return dcg(labels[ranking]) / ideal


def ranking_from_scores(scores):
    """Item indices sorted by descending score, ties by ascending index."""
    scores = np.asarray(scores, dtype=float)
    return list(np.lexsort((np.arange(scores.size), -scores)))


def pairwise_error(scores, labels):
    """Fraction of preference pairs ordered wrongly; ties count one half."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    pref = y[:, None] > y[None, :]
    n = int(pref.sum())
    if n == 0:
        return 0.0
    diff = (s[:, None] - s[None, :])[pref]
    return float(np.sum(diff < 0) + 0.5 * np.sum(diff == 0)) / n


# --- regression tree -------------------------------------------------------

class RegressionTree:
    """Axis-aligned binary regression tree stored as flat node arrays.

    Splits minimise squared error of the targets; each leaf holds
    ``sum(target) / sum(weight)`` (a Newton step), or 0 when the weight is
    negligible. Rows with ``x[feature] <= threshold`` go left.
    """

    LEAF = -1

    def __init__(self, max_depth=3, min_samples_leaf=2):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []

    def _add(self, feature=LEAF, threshold=0.0, value=0.0):
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def fit(self, X, target, weight):
        X = np.asarray(X, dtype=float)
        target = np.asarray(target, dtype=float)
        weight = np.asarray(weight, dtype=float)
        self._grow(X, target, weight, np.arange(X.shape[0]), 0)
        return self

    def _leaf_value(self, target, weight, idx):
        w = weight[idx].sum()
        return float(target[idx].sum() / w) if w > 1e-12 else 0.0

    def _best_split(self, X, target, idx):
        n = idx.size
        m = self.min_samples_leaf
        if n < 2 * m:
            return None
        total = target[idx].sum()
        base = total * total / n
        best_gain, best = 1e-12, None
        for f in range(X.shape[1]):
            order = idx[np.argsort(X[idx, f], kind="stable")]
            xs = X[order, f]
            cs = np.cumsum(target[order])
            pos = np.arange(m - 1, n - m)
            pos = pos[xs[pos] < xs[pos + 1]]
            if pos.size == 0:
                continue
            n_left = pos + 1.0
            s_left = cs[pos]
            gain = s_left ** 2 / n_left + (total - s_left) ** 2 / (n - n_left) - base
            k = int(np.argmax(gain))
            if gain[k] > best_gain:
                best_gain = gain[k]
                p = pos[k]
                best = (f, float((xs[p] + xs[p + 1]) / 2.0))
        return best

    def _grow(self, X, target, weight, idx, depth):
        node = self._add(value=self._leaf_value(target, weight, idx))
        if depth >= self.max_depth:
            return node
        split = self._best_split(X, target, idx)
        if split is None:
            return node
        f, thr = split
        mask = X[idx, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self._grow(X, target, weight, idx[mask], depth + 1)
        self.right[node] = self._grow(X, target, weight, idx[~mask], depth + 1)
        return node

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[0])
        for r in range(X.shape[0]):
            node = 0
            while self.feature[node] != self.LEAF:
                node = self.left[node] if X[r, self.feature[node]] <= self.threshold[node] else self.right[node]
            out[r] = self.value[node]
        return out

    @classmethod
    def leaf(cls, value):
        tree = cls()
        tree._add(value=float(value))
        return tree

    @classmethod
    def stump(cls, feature, threshold, left_value, right_value):
        tree = cls(max_depth=1)
        root = tree._add(feature=feature, threshold=float(threshold))
        tree.left[root] = tree._add(value=float(left_value))
        tree.right[root] = tree._add(value=float(right_value))
        return tree


# --- LambdaMART ------------------------------------------------------------

def _query_bounds(group, n_rows):
    group = [int(g) for g in group]
    if sum(group) != n_rows:
        raise ValueError("group sizes must add up to the number of rows")
    edges = np.concatenate([[0], np.cumsum(group)])
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def lambdas_and_weights(scores, labels, sigma=1.0):
    """First-order lambdas and second-order weights for one query.

    Pairs with equal labels contribute nothing. Each pair with
    ``label_i > label_j`` adds ``sigma * |dNDCG| * rho`` to ``i`` and
    subtracts it from ``j``, where ``rho = 1 / (1 + exp(sigma (s_i - s_j)))``
    and ``|dNDCG|`` is the change from swapping the two items in the ranking
    induced by the current scores.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    n = s.size
    lam = np.zeros(n)
    w = np.zeros(n)
    ideal = dcg(np.sort(y)[::-1])
    if ideal == 0.0:
        return lam, w
    order = ranking_from_scores(s)
    position = np.empty(n)
    position[order] = np.arange(1, n + 1)
    gain = 2.0 ** y - 1.0
    disc = 1.0 / np.log2(position + 1.0)
    pref = y[:, None] > y[None, :]
    delta = np.abs((gain[:, None] - gain[None, :]) * (disc[:, None] - disc[None, :])) / ideal
    rho = expit(-sigma * (s[:, None] - s[None, :]))
    lam_ij = np.where(pref, sigma * delta * rho, 0.0)
    w_ij = np.where(pref, sigma * sigma * delta * rho * (1.0 - rho), 0.0)
    lam = lam_ij.sum(axis=1) - lam_ij.sum(axis=0)
    w = w_ij.sum(axis=1) + w_ij.sum(axis=0)
    return lam, w


class LambdaMARTRanker(BaseEstimator):
    """Gradient-boosted regression trees fit to LambdaRank gradients.

    ``fit(X, y, group)`` follows the grouped learning-to-rank convention:
    ``group`` lists the number of consecutive rows per query. ``subsample``
    below 1 draws a seeded fraction of queries for each tree.

    With ``monotone=True`` each new tree is step-halved (up to
    ``max_halvings`` times) until the training pairwise error does not rise;
    a tree with no qualifying step is dropped, and with ``subsample=1`` this
    ends boosting since every later round would refit the same tree. ``train_pairwise_error_``
    holds that error before the first tree and after every round.
    """

    def __init__(self, n_estimators=100, max_depth=3, learning_rate=0.1,
                 min_samples_leaf=2, sigma=1.0, subsample=0.8, monotone=True,
                 max_halvings=10, random_state=0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.min_samples_leaf = min_samples_leaf
        self.sigma = sigma
        self.subsample = subsample
        self.monotone = monotone
        self.max_halvings = max_halvings
        self.random_state = random_state

    def _validate_config(self):
        if self.n_estimators <= 0:
            raise ValueError("n_estimators must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("max_depth and min_samples_leaf must be at least 1")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must lie in (0, 1]")

    def fit(self, X, y, group):
        self._validate_config()
        X = check_array(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.shape[1] != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} feature columns, got {X.shape[1]}")
        bounds = _query_bounds(group, X.shape[0])
        for a, b in bounds:
            if b - a < 2:
                raise ValueError("every query needs at least two rows")
        rng = check_random_state(self.random_state)

        scores = np.zeros(X.shape[0])
        self.trees_ = []
        self.train_pairwise_error_ = [self._mean_pairwise_error(scores, y, bounds)]
        for _ in range(self.n_estimators):
            lam = np.zeros_like(scores)
            w = np.zeros_like(scores)
            for a, b in bounds:
                lam[a:b], w[a:b] = lambdas_and_weights(scores[a:b], y[a:b], self.sigma)
            if self.subsample < 1.0:
                k = max(1, int(round(self.subsample * len(bounds))))
                chosen = np.sort(rng.choice(len(bounds), size=k, replace=False))
                rows = np.concatenate([np.arange(*bounds[q]) for q in chosen])
            else:
                rows = np.arange(X.shape[0])
            tree = RegressionTree(self.max_depth, self.min_samples_leaf).fit(X[rows], lam[rows], w[rows])
            step = self.learning_rate * tree.predict(X)
            new = scores + step
            err = self._mean_pairwise_error(new, y, bounds)
            if self.monotone:
                prev = self.train_pairwise_error_[-1]
                shrink = 1.0
                for _ in range(self.max_halvings):
                    if err <= prev:
                        break
                    shrink *= 0.5
                    new = scores + shrink * step
                    err = self._mean_pairwise_error(new, y, bounds)
                if err > prev:
                    if self.subsample == 1.0:
                        break  # the next round would refit the same tree
                    continue
                tree.value = [v * shrink for v in tree.value]
            self.trees_.append(tree)
            scores = new
            self.train_pairwise_error_.append(err)
        self.n_features_in_ = X.shape[1]
        return self

    @staticmethod
    def _mean_pairwise_error(scores, y, bounds):
        errs = [pairwise_error(scores[a:b], y[a:b]) for a, b in bounds
                if np.any(y[a:b] != y[a])]
        return float(np.mean(errs)) if errs else 0.0

    def predict(self, X):
        check_is_fitted(self, "trees_")
        X = check_array(X, dtype=float)
        out = np.zeros(X.shape[0])
        for tree in self.trees_:
            out += self.learning_rate * tree.predict(X)
        return out

    def score_references(self, features: Mapping[int, np.ndarray]):
        """Mean occurrence score per reference: ``{cit_id: s_i}``."""
        return {cit_id: score_reference(self.predict(rows)) for cit_id, rows in features.items()}

    def rank(self, features):
        return rank_references(self.score_references(features).items())

    def save(self, path):
        check_is_fitted(self, "trees_")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(MODEL_HEADER + "\n")
            fh.write(f"learning_rate\t{float(self.learning_rate)!r}\n")
            fh.write(f"params\t{self.max_depth}\t{self.min_samples_leaf}\t{self.sigma!r}\t"
                     f"{self.subsample!r}\t{self.random_state}\n")
            fh.write(f"features\t{' '.join(FEATURE_NAMES)}\n")
            fh.write(f"trees\t{len(self.trees_)}\n")
            for t, tree in enumerate(self.trees_):
                fh.write(f"tree\t{t}\t{len(tree.feature)}\n")
                for i in range(len(tree.feature)):
                    if tree.feature[i] == RegressionTree.LEAF:
                        fh.write(f"leaf\t{i}\t{float(tree.value[i])!r}\n")
                    else:
                        fh.write(f"split\t{i}\t{tree.feature[i]}\t{float(tree.threshold[i])!r}\t"
                                 f"{tree.left[i]}\t{tree.right[i]}\t{float(tree.value[i])!r}\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0] != MODEL_HEADER:
            raise ValueError(f"{path}: not a ranker model file")
        model, trees, tree = cls(), [], None
        for line in lines[1:]:
            kind, *rest = line.split("\t")
            if kind == "learning_rate":
                model.learning_rate = float(rest[0])
            elif kind == "params":
                model.max_depth, model.min_samples_leaf = int(rest[0]), int(rest[1])
                model.sigma, model.subsample = float(rest[2]), float(rest[3])
                model.random_state = None if rest[4] == "None" else int(rest[4])
            elif kind == "tree":
                tree = RegressionTree(model.max_depth, model.min_samples_leaf)
                size = int(rest[1])
                tree.feature = [RegressionTree.LEAF] * size
                tree.threshold = [0.0] * size
                tree.left = [-1] * size
                tree.right = [-1] * size
                tree.value = [0.0] * size
                trees.append(tree)
            elif kind == "leaf":
                tree.value[int(rest[0])] = float(rest[1])
            elif kind == "split":
                i = int(rest[0])
                tree.feature[i] = int(rest[1])
                tree.threshold[i] = float(rest[2])
                tree.left[i], tree.right[i] = int(rest[3]), int(rest[4])
                tree.value[i] = float(rest[5])
        model.trees_ = trees
        model.n_features_in_ = len(FEATURE_NAMES)
        return model

    @classmethod
    def from_trees(cls, trees, learning_rate):
        model = cls(n_estimators=max(1, len(trees)), learning_rate=learning_rate)
        model.trees_ = list(trees)
        model.n_features_in_ = len(FEATURE_NAMES)
        return model


def train_lambdamart(queries, **config):
    """Fit on ``[(rows, labels), ...]``; one entry per query."""
    queries = list(queries)
    X = np.vstack([np.asarray(rows, dtype=float) for rows, _ in queries])
    y = np.concatenate([np.asarray(labels, dtype=float) for _, labels in queries])
    group = [len(labels) for _, labels in queries]
    return LambdaMARTRanker(**config).fit(X, y, group)


def score_citation(model, f):
    return float(model.predict(np.asarray(f, dtype=float).reshape(1, -1))[0])


def score_reference(scores):
    """Mean of a reference's occurrence scores."""
    scores = list(scores)
    if not scores:
        raise ValueError("a reference needs at least one scored citation")
    return math.fsum(scores) / len(scores)


def rank_references(scored, classes=None):
    """Rank ``(cit_id, score)`` pairs: descending score, ties by ascending cit_id."""
    scored = list(scored)
    ids = [c for c, _ in scored]
    if len(set(ids)) != len(ids):
        raise ValueError("cit_ids must be distinct")
    ordered = sorted(scored, key=lambda t: (-t[1], t[0]))
    classes = classes or {}
    return [RankedReference(c, float(s), r, classes.get(c)) for r, (c, s) in enumerate(ordered, 1)]


def citation_features(paper):
    """Occurrence rows per cited reference: ``{cit_id: array (n_cit_i, 4)}``."""
    out = {}
    for ref in paper.references:
        mentions = paper.mentions_of(ref.cit_id)
        if not mentions:
            continue
        out[ref.cit_id] = np.array(
            [[ref.au_overlap, ref.n_cit, m.cit_word, m.sen_label] for m in mentions], dtype=float)
    return out
