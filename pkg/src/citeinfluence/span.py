"""Word-level citation span detection.

Each token of a citing sentence is classified as inside or outside the span
of a target citation marker from positional, segment, part-of-speech and
dependency-tree features.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.feature_extraction import DictVectorizer
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

NONE = "none"
SEPARATOR_PUNCT = frozenset({",", ";", ":"})
CONJUNCTIONS = frozenset({"and", "or", "but", "while", "whereas"})
ROOT = -1
MAX_DISTANCE_BUCKET = 15
MAX_TREE_BUCKET = 10
MODEL_HEADER = "# citeinfluence-span v1"


@dataclass(frozen=True)
class AnnotatedToken:
    text: str
    index: int
    pos_tag: Optional[str] = None
    dep_head: Optional[int] = None
    dep_label: Optional[str] = None
    gold_in_span: Optional[bool] = None


@dataclass(frozen=True)
class SpanFeatures:
    distance: int
    position: int
    segment: int
    pos_window: tuple[str, str, str]
    dtree_distance: Optional[int]
    lca: str

    def as_dict(self):
        d = {
            "distance": f"{min(self.distance, MAX_DISTANCE_BUCKET)}",
            "position": str(self.position),
            "segment": str(self.segment),
            "pos": self.pos_window[0],
            "pos_prev": self.pos_window[1],
            "pos_next": self.pos_window[2],
            "dtree": NONE if self.dtree_distance is None else str(min(self.dtree_distance, MAX_TREE_BUCKET)),
            "lca": self.lca,
        }
        return {f"{k}={v}": 1.0 for k, v in d.items()}


@dataclass(frozen=True)
class SpanSentence:
    tokens: tuple[AnnotatedToken, ...]
    target: int

    @property
    def gold(self):
        return [bool(t.gold_in_span) for t in self.tokens]


def _is_separator(text):
    return text in SEPARATOR_PUNCT or text.lower() in CONJUNCTIONS


def segment_ids(tokens):
    """Segment number per token; a separator token opens a new segment."""
    seg, out = 0, []
    for i, tok in enumerate(tokens):
        prev = tokens[i - 1].text if i > 0 else ""
        trailing = prev[-1:] in SEPARATOR_PUNCT and prev not in SEPARATOR_PUNCT
        if i > 0 and (_is_separator(tok.text) or trailing):
            seg += 1
        out.append(seg)
    return out


def _has_parse(tokens):
    return all(t.dep_head is not None for t in tokens)


def _parents(tokens):
    n = len(tokens)
    parents = []
    for t in tokens:
        h = t.dep_head
        if h is None or h == ROOT or h == t.index:
            parents.append(ROOT)
        elif 0 <= h < n:
            parents.append(h)
        else:
            raise ValueError(f"token {t.index}: dep_head {h} is not a valid index")
    return parents


def _tree_distances(parents, target):
    n = len(parents)
    adj = [[] for _ in range(n)]
    for i, p in enumerate(parents):
        if p != ROOT:
            adj[i].append(p)
            adj[p].append(i)
    dist = [None] * n
    dist[target] = 0
    queue = deque([target])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if dist[v] is None:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def _ancestors(parents, i):
    path, seen = [i], {i}
    while parents[path[-1]] != ROOT:
        nxt = parents[path[-1]]
        if nxt in seen:
            raise ValueError("dependency heads form a cycle")
        seen.add(nxt)
        path.append(nxt)
    return path


def extract_span_features(tokens: Sequence[AnnotatedToken], target):
    """Per-token features relative to the marker token at ``target``."""
    tokens = list(tokens)
    n = len(tokens)
    if not 0 <= target < n:
        raise IndexError(f"target {target} out of range for {n} tokens")
    for i, t in enumerate(tokens):
        if t.index != i:
            raise ValueError("token indices must be consecutive from 0")
    segs = segment_ids(tokens)
    tags = [t.pos_tag or NONE for t in tokens]
    parse = _has_parse(tokens)
    if parse:
        parents = _parents(tokens)
        tdist = _tree_distances(parents, target)
        target_anc = _ancestors(parents, target)
    out = []
    for i, tok in enumerate(tokens):
        dtree, lca = None, NONE
        if parse:
            dtree = tdist[i]
            anc = set(_ancestors(parents, i))
            common = next((a for a in target_anc if a in anc), None)
            if common is not None:
                node = tokens[common]
                lca = node.dep_label or node.pos_tag or NONE
        out.append(SpanFeatures(
            distance=abs(i - target),
            position=int(i < target),
            segment=int(segs[i] == segs[target]),
            pos_window=(tags[i], tags[i - 1] if i > 0 else "<s>", tags[i + 1] if i + 1 < n else "</s>"),
            dtree_distance=dtree,
            lca=lca,
        ))
    return out


# --- logistic regression ---------------------------------------------------

def _collapse(X, y):
    """Unique (row, label) pairs with multiplicities reduced by their gcd."""
    data = np.hstack([X, y.reshape(-1, 1)])
    uniq, counts = np.unique(data, axis=0, return_counts=True)
    g = reduce(math.gcd, counts.tolist(), 0)
    return uniq[:, :-1], uniq[:, -1], counts / max(g, 1)


class BinaryLogisticRegression(ClassifierMixin, BaseEstimator):
    """L2-regularised logistic regression by full-batch gradient descent.

    Identical rows are merged into weighted rows first, so the result does
    not depend on row order or on duplicating the data set.
    """

    def __init__(self, l2=1e-3, learning_rate=1.0, n_iter=500):
        self.l2 = l2
        self.learning_rate = learning_rate
        self.n_iter = n_iter

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if len(np.unique(y)) < 2:
            raise ValueError("training data must contain both in-span and out-of-span tokens")
        Xu, yu, w = _collapse(X, y)
        w = w / w.sum()
        coef = np.zeros(X.shape[1])
        bias = 0.0
        for _ in range(self.n_iter):
            p = expit(Xu @ coef + bias)
            r = w * (p - yu)
            coef -= self.learning_rate * (Xu.T @ r + self.l2 * coef)
            bias -= self.learning_rate * r.sum()
        self.coef_ = coef
        self.intercept_ = bias
        self.classes_ = np.array([0, 1])
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        return np.asarray(X, dtype=float) @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(int)


class SpanDetector(BaseEstimator):
    """One-hot span features followed by logistic regression.

    ``fit`` and ``predict`` take lists of :class:`SpanSentence`; ``predict``
    returns one boolean list per sentence.
    """

    def __init__(self, l2=1e-3, learning_rate=1.0, n_iter=500):
        self.l2 = l2
        self.learning_rate = learning_rate
        self.n_iter = n_iter

    @staticmethod
    def _dicts(sentences):
        rows = []
        for s in sentences:
            rows.extend(f.as_dict() for f in extract_span_features(s.tokens, s.target))
        return rows

    def fit(self, sentences, y=None):
        sentences = list(sentences)
        labels = np.array([g for s in sentences for g in s.gold], dtype=float)
        self.vectorizer_ = DictVectorizer(sparse=False, sort=True)
        X = self.vectorizer_.fit_transform(self._dicts(sentences))
        self.model_ = BinaryLogisticRegression(self.l2, self.learning_rate, self.n_iter).fit(X, labels)
        return self

    def predict_tokens(self, tokens, target):
        check_is_fitted(self, "model_")
        feats = [f.as_dict() for f in extract_span_features(tokens, target)]
        return [bool(v) for v in self.model_.predict(self.vectorizer_.transform(feats))]

    def predict(self, sentences):
        return [self.predict_tokens(s.tokens, s.target) for s in sentences]

    def save(self, path):
        check_is_fitted(self, "model_")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(MODEL_HEADER + "\n")
            fh.write(f"params\t{float(self.l2)!r}\t{float(self.learning_rate)!r}\t{int(self.n_iter)}\n")
            fh.write(f"intercept\t{float(self.model_.intercept_)!r}\n")
            for name, w in zip(self.vectorizer_.feature_names_, self.model_.coef_):
                fh.write(f"weight\t{name}\t{float(w)!r}\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0] != MODEL_HEADER:
            raise ValueError(f"{path}: not a span model file")
        names, weights, bias, det = [], [], 0.0, cls()
        for line in lines[1:]:
            kind, *rest = line.split("\t")
            if kind == "params":
                det.l2, det.learning_rate, det.n_iter = float(rest[0]), float(rest[1]), int(rest[2])
            elif kind == "intercept":
                bias = float(rest[0])
            elif kind == "weight":
                names.append(rest[0])
                weights.append(float(rest[1]))
        vec = DictVectorizer(sparse=False, sort=True)
        vec.feature_names_ = names
        vec.vocabulary_ = {n: i for i, n in enumerate(names)}
        det.vectorizer_ = vec
        lr = BinaryLogisticRegression(det.l2, det.learning_rate, det.n_iter)
        lr.coef_ = np.array(weights)
        lr.intercept_ = bias
        lr.classes_ = np.array([0, 1])
        det.model_ = lr
        return det


def train_span(data, **params):
    return SpanDetector(**params).fit(data)


def label_span(model, tokens, target):
    return model.predict_tokens(tokens, target)


# --- evaluation ------------------------------------------------------------

@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def prf(tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return PRF(p, r, f, tp, fp, fn)


def kfold_sentences(n, k, random_state=0):
    """Seeded shuffle of sentence indices split into ``k`` disjoint folds."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"k={k} folds need at least {k} sentences, got {n}")
    perm = check_random_state(random_state).permutation(n)
    return [sorted(perm[i::k].tolist()) for i in range(k)]


def cross_validate(data, k=10, estimators=None, random_state=0):
    """Token-level micro P/R/F1 on the in-span class, pooled over folds.

    ``estimators`` maps a name to a zero-argument factory returning an
    object with ``fit(sentences)`` and ``predict(sentences)``.
    """
    data = list(data)
    estimators = estimators or {"logistic_regression": SpanDetector}
    folds = kfold_sentences(len(data), k, random_state)
    results = {}
    for name, factory in estimators.items():
        tp = fp = fn = 0
        for fold in folds:
            held = set(fold)
            train = [s for i, s in enumerate(data) if i not in held]
            test = [data[i] for i in fold]
            model = factory().fit(train)
            for s, pred in zip(test, model.predict(test)):
                for g, p in zip(s.gold, pred):
                    tp += g and p
                    fp += (not g) and p
                    fn += g and not p
        results[name] = prf(int(tp), int(fp), int(fn))
    return results


# --- corpus file -----------------------------------------------------------

def _opt(value, cast=str):
    return None if value in ("_", "") else cast(value)


def read_span_corpus(path):
    """Read the columnar span corpus.

    Sentences are separated by blank lines and start with ``# marker = k``;
    token rows are ``index text pos dep_head dep_label gold`` separated by
    tabs, with ``_`` for a missing value.
    """
    sentences, tokens, target = [], [], None

    def flush():
        if tokens:
            if target is None:
                raise ValueError(f"{path}: sentence without a '# marker = k' line")
            sentences.append(SpanSentence(tuple(tokens), target))

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                tokens, target = [], None
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                if key.strip() == "marker":
                    target = int(value)
                continue
            cols = line.split("\t")
            if len(cols) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 tab-separated columns")
            idx, text, pos, head, label, gold = cols
            tokens.append(AnnotatedToken(
                text=text, index=int(idx), pos_tag=_opt(pos), dep_head=_opt(head, int),
                dep_label=_opt(label), gold_in_span=_opt(gold, lambda v: v == "1"),
            ))
    flush()
    return sentences


def write_span_corpus(path, sentences):
    def cell(v):
        if v is None:
            return "_"
        if isinstance(v, bool):
            return "1" if v else "0"
        return str(v)

    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(f"# marker = {s.target}\n")
            for t in s.tokens:
                fh.write("\t".join(cell(v) for v in (t.index, t.text, t.pos_tag, t.dep_head,
                                                      t.dep_label, t.gold_in_span)) + "\n")
            fh.write("\n")
