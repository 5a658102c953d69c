"""Four-class citation contribution classifier.

Classes: 3 extends / highly influenced by the work, 2 uses the work,
1 related work, 0 negative sentiment towards the work.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import astuple, dataclass
from functools import reduce
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

CLASSES = (0, 1, 2, 3)
CLASS_NAMES = {
    3: "extending the work",
    2: "using the work",
    1: "related work",
    0: "negative sentiment towards the work",
}
FACTOR_NAMES = ("au_overlap", "sec_id", "n_cit", "cit_word", "sen_label")

MODEL_HEADER = "# citeinfluence-classifier v1"
DATA_HEADER = "au_overlap\tsec_id\tn_cit\tcit_word\tsen_label\tclass"


@dataclass(frozen=True)
class FactorVector:
    au_overlap: float
    sec_id: int
    n_cit: int
    cit_word: int
    sen_label: int

    def __post_init__(self):
        if not 0.0 <= self.au_overlap <= 1.0:
            raise ValueError(f"au_overlap {self.au_overlap} outside [0, 1]")
        if self.sec_id not in (0, 1, 2):
            raise ValueError(f"sec_id {self.sec_id} not in {{0, 1, 2}}")
        if self.sen_label not in (-1, 0, 1):
            raise ValueError(f"sen_label {self.sen_label} not in {{-1, 0, 1}}")
        if self.n_cit < 0 or self.cit_word < 0:
            raise ValueError("counts must be non-negative")

    def as_row(self):
        return astuple(self)


def _sign(x):
    return (x > 0) - (x < 0)


def aggregate_factors(paper, cit_id):
    """Collapse the mentions of one reference into a :class:`FactorVector`."""
    ref = paper.reference(cit_id)
    mentions = paper.mentions_of(cit_id)
    sec_counts = Counter(m.sec_id for m in mentions)
    # mode, ties toward the smaller section code
    sec_id = min(sec_counts, key=lambda s: (-sec_counts[s], s)) if sec_counts else 1
    return FactorVector(
        au_overlap=ref.au_overlap,
        sec_id=sec_id,
        n_cit=len(mentions),
        cit_word=sum(m.cit_word for m in mentions),
        sen_label=_sign(sum(m.sen_label for m in mentions)),
    )


# --- discretization --------------------------------------------------------

AU_BUCKETS = ("zero", "low", "high")
NCIT_BUCKETS = ("1", "2-3", ">=4")
WORD_BUCKETS = ("short", "medium", "long")


class DiscreteFactors(NamedTuple):
    au_overlap: str
    sec_id: int
    n_cit: str
    cit_word: str
    sen_label: int


def discretize(fv):
    if fv.au_overlap == 0.0:
        au = "zero"
    elif fv.au_overlap < 0.5:
        au = "low"
    else:
        au = "high"
    if fv.n_cit <= 1:
        nc = "1"
    elif fv.n_cit <= 3:
        nc = "2-3"
    else:
        nc = ">=4"
    if fv.cit_word <= 25:
        cw = "short"
    elif fv.cit_word <= 80:
        cw = "medium"
    else:
        cw = "long"
    return DiscreteFactors(au, fv.sec_id, nc, cw, fv.sen_label)


CATEGORIES = (AU_BUCKETS, (0, 1, 2), NCIT_BUCKETS, WORD_BUCKETS, (-1, 0, 1))


def encode(fv):
    """Integer category codes of a factor vector, one per feature."""
    d = discretize(fv)
    return tuple(cats.index(v) for cats, v in zip(CATEGORIES, d))


def _as_vectors(X):
    out = []
    for row in X:
        out.append(row if isinstance(row, FactorVector) else FactorVector(
            float(row[0]), int(row[1]), int(row[2]), int(row[3]), int(row[4])))
    return out


class FactorDiscretizer(TransformerMixin, BaseEstimator):
    """Maps raw factor rows ``(au_overlap, sec_id, n_cit, cit_word, sen_label)`` to category codes."""

    def fit(self, X, y=None):
        self.n_features_in_ = len(FACTOR_NAMES)
        return self

    def transform(self, X):
        return np.array([encode(fv) for fv in _as_vectors(X)], dtype=int).reshape(-1, len(FACTOR_NAMES))


# --- naive Bayes -----------------------------------------------------------

class CitationNB(ClassifierMixin, BaseEstimator):
    """Categorical Naive Bayes over discretized factors with Laplace smoothing.

    Counts are divided by their greatest common divisor before smoothing so
    that a duplicated training set yields identical parameters. Argmax ties go
    to the lower (more conservative) class.
    """

    def __init__(self, alpha=1.0):
        self.alpha = alpha

    def fit(self, X, y):
        vectors = _as_vectors(X)
        y = [int(c) for c in y]
        if not vectors:
            raise ValueError("cannot train classifier on an empty training set")
        if len(vectors) != len(y):
            raise ValueError("X and y have different lengths")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        for c in y:
            if c not in CLASSES:
                raise ValueError(f"class label {c!r} not in 0..3")
        codes = [encode(fv) for fv in vectors]
        class_count = np.zeros(len(CLASSES), dtype=np.int64)
        feature_count = [np.zeros((len(CLASSES), len(cats)), dtype=np.int64) for cats in CATEGORIES]
        for row, c in zip(codes, y):
            class_count[c] += 1
            for k, v in enumerate(row):
                feature_count[k][c, v] += 1
        g = reduce(math.gcd, [int(v) for v in class_count] + [int(v) for t in feature_count for v in t.ravel()], 0)
        if g > 1:
            class_count //= g
            feature_count = [t // g for t in feature_count]
        self.classes_ = np.array(CLASSES)
        self.class_count_ = class_count
        self.feature_count_ = feature_count
        self._update_log_probs()
        return self

    def _update_log_probs(self):
        a = self.alpha
        n = self.class_count_.sum()
        self.class_log_prior_ = np.log((self.class_count_ + a) / (n + a * len(CLASSES)))
        self.feature_log_prob_ = [
            np.log((t + a) / (self.class_count_[:, None] + a * t.shape[1])) for t in self.feature_count_
        ]

    def joint_log_likelihood(self, X):
        check_is_fitted(self, "feature_log_prob_")
        codes = FactorDiscretizer().transform(X)
        jll = np.tile(self.class_log_prior_, (len(codes), 1))
        for k, table in enumerate(self.feature_log_prob_):
            jll += table[:, codes[:, k]].T
        return jll

    def predict_proba(self, X):
        jll = self.joint_log_likelihood(X)
        p = np.exp(jll - jll.max(axis=1, keepdims=True))
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, X):
        jll = self.joint_log_likelihood(X)
        best = jll.max(axis=1, keepdims=True)
        # first class within tolerance of the max = lowest tied class
        return np.argmax(best - jll <= 1e-9, axis=1)

    def save(self, path):
        check_is_fitted(self, "feature_log_prob_")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(MODEL_HEADER + "\n")
            fh.write(f"alpha\t{float(self.alpha)!r}\n")
            fh.write("class\t" + "\t".join(str(int(v)) for v in self.class_count_) + "\n")
            for name, cats, table in zip(FACTOR_NAMES, CATEGORIES, self.feature_count_):
                for j, cat in enumerate(cats):
                    fh.write(f"feature\t{name}\t{cat}\t" + "\t".join(str(int(v)) for v in table[:, j]) + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0] != MODEL_HEADER:
            raise ValueError(f"{path}: not a classifier model file")
        model = cls()
        tables = {name: np.zeros((len(CLASSES), len(cats)), dtype=np.int64)
                  for name, cats in zip(FACTOR_NAMES, CATEGORIES)}
        for line in lines[1:]:
            kind, *rest = line.split("\t")
            if kind == "alpha":
                model.alpha = float(rest[0])
            elif kind == "class":
                model.class_count_ = np.array([int(v) for v in rest], dtype=np.int64)
            elif kind == "feature":
                name, cat, *counts = rest
                cats = [str(c) for c in CATEGORIES[FACTOR_NAMES.index(name)]]
                tables[name][:, cats.index(cat)] = [int(v) for v in counts]
        model.classes_ = np.array(CLASSES)
        model.feature_count_ = [tables[name] for name in FACTOR_NAMES]
        model._update_log_probs()
        return model


def train_classifier(labelled, alpha=1.0):
    """Fit on ``(FactorVector, class)`` pairs."""
    labelled = list(labelled)
    if not labelled:
        raise ValueError("cannot train classifier on an empty training set")
    X, y = zip(*labelled)
    return CitationNB(alpha=alpha).fit(X, y)


def classify(model, fv):
    return int(model.predict([fv])[0])


def bootstrap_label(fv):
    """Rule-based fallback label when no labelled data exists (priority 0 > 3 > 2 > 1)."""
    if fv.sen_label == -1:
        return 0
    if fv.au_overlap >= 0.5 or fv.n_cit >= 4:
        return 3
    if fv.sec_id == 1:
        return 2
    return 1


def read_labelled(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#") or line == DATA_HEADER:
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 tab-separated fields")
            au, sec, nc, cw, sen, c = parts
            rows.append((FactorVector(float(au), int(sec), int(nc), int(cw), int(sen)), int(c)))
    return rows


def write_labelled(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(DATA_HEADER + "\n")
        for fv, c in rows:
            fh.write("\t".join(str(v) for v in fv.as_row()) + f"\t{c}\n")
