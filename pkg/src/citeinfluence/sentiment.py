"""Multinomial Naive Bayes polarity model for citation text."""
from __future__ import annotations

import math
from collections import Counter
from functools import reduce
from importlib import resources

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .text import tokenize

LABELS = (-1, 0, 1)
# argmax tie preference: neutral first
_TIE_ATOL = 1e-9

MODEL_HEADER = "# citeinfluence-sentiment v1"


def _gcd_reduce(*counters):
    values = [v for c in counters for v in c.values() if v]
    g = reduce(math.gcd, values, 0)
    if g <= 1:
        return counters
    return tuple(Counter({k: v // g for k, v in c.items()}) for c in counters)


def _argmax_neutral(scores, labels):
    """Argmax label; any tie for the top score resolves to neutral."""
    best = max(scores)
    tied = [lab for lab, s in zip(labels, scores) if best - s <= _TIE_ATOL]
    return tied[0] if len(tied) == 1 else 0


class SentimentNB(ClassifierMixin, BaseEstimator):
    """Bag-of-words Naive Bayes over labels -1/0/1.

    ``alpha`` is the Laplace pseudo-count on token likelihoods, ``prior_alpha``
    the pseudo-count on class priors (so a class absent from the corpus keeps
    a small prior). Counts are divided by their greatest common divisor before
    smoothing, which makes a k-fold duplicated corpus train the same model.
    Tokens unseen in training are ignored at prediction time.
    """

    def __init__(self, alpha=1.0, prior_alpha=1.0):
        self.alpha = alpha
        self.prior_alpha = prior_alpha

    def fit(self, X, y):
        X, y = list(X), list(y)
        if not X:
            raise ValueError("cannot train sentiment model on an empty corpus")
        if len(X) != len(y):
            raise ValueError("X and y have different lengths")
        if self.alpha <= 0 or self.prior_alpha <= 0:
            raise ValueError("smoothing must be positive")
        docs = Counter()
        tokens = {lab: Counter() for lab in LABELS}
        for text, label in zip(X, y):
            label = int(label)
            if label not in LABELS:
                raise ValueError(f"label {label!r} not in {{-1, 0, 1}}")
            docs[label] += 1
            tokens[label].update(tokenize(text))

        docs, *reduced = _gcd_reduce(docs, *(tokens[lab] for lab in LABELS))
        tokens = dict(zip(LABELS, reduced))
        vocab = sorted(set().union(*tokens.values()))
        n_docs = sum(docs.values())

        self.classes_ = np.array(LABELS)
        self.class_log_prior_ = np.array([
            math.log((docs[lab] + self.prior_alpha) / (n_docs + len(LABELS) * self.prior_alpha))
            for lab in LABELS
        ])
        loglik = np.empty((len(vocab), len(LABELS)))
        for k, lab in enumerate(LABELS):
            total = sum(tokens[lab].values())
            denom = total + self.alpha * len(vocab)
            for i, w in enumerate(vocab):
                loglik[i, k] = math.log((tokens[lab][w] + self.alpha) / denom)
        self.vocabulary_ = {w: i for i, w in enumerate(vocab)}
        self.feature_log_prob_ = loglik
        return self

    def joint_log_likelihood(self, text):
        check_is_fitted(self, "feature_log_prob_")
        scores = self.class_log_prior_.copy()
        counts = Counter(t for t in tokenize(text) if t in self.vocabulary_)
        for w in sorted(counts):
            scores = scores + counts[w] * self.feature_log_prob_[self.vocabulary_[w]]
        return scores

    def predict_one(self, text):
        return _argmax_neutral(list(self.joint_log_likelihood(text)), LABELS)

    def predict(self, X):
        return np.array([self.predict_one(t) for t in X], dtype=int)

    def predict_proba(self, X):
        out = []
        for t in X:
            jll = self.joint_log_likelihood(t)
            p = np.exp(jll - jll.max())
            out.append(p / p.sum())
        return np.array(out)

    # persistence: token -> per-label log-likelihood, plus priors
    def save(self, path):
        check_is_fitted(self, "feature_log_prob_")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(MODEL_HEADER + "\n")
            fh.write(f"alpha\t{float(self.alpha)!r}\t{float(self.prior_alpha)!r}\n")
            fh.write("prior\t" + "\t".join(repr(float(v)) for v in self.class_log_prior_) + "\n")
            for w, i in sorted(self.vocabulary_.items()):
                fh.write(f"token\t{w}\t" + "\t".join(repr(float(v)) for v in self.feature_log_prob_[i]) + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0] != MODEL_HEADER:
            raise ValueError(f"{path}: not a sentiment model file")
        model, vocab, rows = None, {}, []
        for line in lines[1:]:
            kind, *rest = line.split("\t")
            if kind == "alpha":
                model = cls(alpha=float(rest[0]), prior_alpha=float(rest[1]))
            elif kind == "prior":
                prior = np.array([float(v) for v in rest])
            elif kind == "token":
                vocab[rest[0]] = len(rows)
                rows.append([float(v) for v in rest[1:]])
        model.classes_ = np.array(LABELS)
        model.class_log_prior_ = prior
        model.vocabulary_ = vocab
        model.feature_log_prob_ = np.array(rows).reshape(len(rows), len(LABELS))
        return model


def train_sentiment(corpus, alpha=1.0, prior_alpha=1.0):
    """Train on ``(text, label)`` pairs."""
    corpus = list(corpus)
    if not corpus:
        raise ValueError("cannot train sentiment model on an empty corpus")
    texts, labels = zip(*corpus)
    return SentimentNB(alpha=alpha, prior_alpha=prior_alpha).fit(texts, labels)


def sentiment(model, cit_text, context_a="", context_b=""):
    text = " ".join(t for t in (context_a, cit_text, context_b) if t)
    return model.predict_one(text)


def read_corpus(path):
    """Read a ``text<TAB>label`` file, one record per line."""
    corpus = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            text, sep, label = line.rpartition("\t")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected text<TAB>label")
            corpus.append((text, int(label)))
    return corpus


def seed_corpus():
    """The bundled synthetic citation-sentiment corpus."""
    ref = resources.files("citeinfluence").joinpath("data/sentiment_seed.tsv")
    with resources.as_file(ref) as path:
        return read_corpus(path)
