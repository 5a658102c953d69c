"""Local influence projection and academic influence propagation.

A paper's academic influence is its base value plus the damped sum of its
citers' influence weighted by the signed local factor each citer assigned
to it::

    AF[A] = 1 + d * sum(AF[j] * IF[j -> A] for j citing A)

An author's influence is the share-weighted sum over their papers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from .ranking import citation_features, rank_references

# (lower, upper) local influence band per contribution class
CLASS_BANDS = {
    0: (-1.0, -0.25),
    1: (0.05, 0.35),
    2: (0.35, 0.65),
    3: (0.65, 1.0),
}

SHARE_TOL = 1e-9
GRAPH_HEADER = "# citeinfluence-graph v1"


class PropagationDivergence(RuntimeError):
    pass


class GraphError(ValueError):
    pass


def local_influence(class_label, rank, n_refs):
    """Interpolate inside the class band by rank (rank 1 gets the band's upper end)."""
    if class_label not in CLASS_BANDS:
        raise ValueError(f"class {class_label!r} not in 0..3")
    if n_refs < 1 or not 1 <= rank <= n_refs:
        raise ValueError(f"rank {rank} outside 1..{n_refs}")
    w = (n_refs - rank) / (n_refs - 1) if n_refs > 1 else 1.0
    lo, hi = CLASS_BANDS[class_label]
    return lo + (hi - lo) * w


@dataclass
class InfluenceGraph:
    """Citation graph with signed edge weights and author shares.

    ``edges`` are ``(citing, cited, weight)``; ``authorship`` maps each
    paper to ``{author: share}`` with shares summing to one.
    """

    nodes: list[str] = field(default_factory=list)
    edges: list[tuple[str, str, float]] = field(default_factory=list)
    authorship: dict[str, dict[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for n in self.nodes:
            if n in seen:
                raise GraphError(f"duplicate node {n!r}")
            seen.add(n)
        for citing, cited, w in self.edges:
            for n in (citing, cited):
                if n not in seen:
                    self.nodes.append(n)
                    seen.add(n)
            if not -1.0 <= w <= 1.0 or math.isnan(w):
                raise GraphError(f"edge {citing} -> {cited}: weight {w} outside [-1, 1]")
        for paper, shares in self.authorship.items():
            if paper not in seen:
                raise GraphError(f"authorship given for unknown paper {paper!r}")
            if shares:
                if any(s < 0 or s > 1 for s in shares.values()):
                    raise GraphError(f"paper {paper!r}: author shares must lie in [0, 1]")
                if abs(math.fsum(shares.values()) - 1.0) > SHARE_TOL:
                    raise GraphError(f"paper {paper!r}: author shares sum to "
                                     f"{math.fsum(shares.values())!r}, expected 1")

    @classmethod
    def from_authors(cls, nodes, edges, paper_authors: Mapping[str, Sequence[str]],
                     shares: Mapping[str, Mapping[str, float]] | None = None):
        """Build with equal author shares unless ``shares`` overrides a paper."""
        shares = shares or {}
        authorship = {}
        for paper, authors in paper_authors.items():
            if paper in shares and shares[paper]:
                authorship[paper] = dict(shares[paper])
            elif authors:
                authorship[paper] = {a: 1.0 / len(authors) for a in authors}
        return cls(list(nodes), list(edges), authorship)

    def authors(self):
        return sorted({a for shares in self.authorship.values() for a in shares})

    def papers_of(self, author):
        return sorted((p, s[author]) for p, s in self.authorship.items() if author in s)

    def index(self):
        return {n: i for i, n in enumerate(self.nodes)}

    def citers(self):
        """``{cited: [(citing, weight), ...]}``"""
        out = {n: [] for n in self.nodes}
        for citing, cited, w in self.edges:
            out[cited].append((citing, w))
        return out

    def matrix(self):
        """Sparse matrix ``M`` with ``M[cited, citing] = weight`` (parallel edges add)."""
        idx = self.index()
        n = len(self.nodes)
        if not self.edges:
            return sparse.csr_matrix((n, n))
        rows = [idx[c] for _, c, _ in self.edges]
        cols = [idx[c] for c, _, _ in self.edges]
        vals = [w for _, _, w in self.edges]
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass(frozen=True)
class PropagationResult:
    af: dict[str, float]
    iterations: int
    residual: float


def propagate(graph, damping=0.85, tol=1e-9, max_iter=1000, schedule: Iterable[str] | None = None):
    """Iterate the influence map from AF = 1 until the max change is below ``tol``.

    Without ``schedule`` every sweep is synchronous (each update reads the
    previous iterate). With ``schedule``, nodes are updated in place in that
    order, each update seeing the values already refreshed in the sweep.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol and max_iter must be positive")
    n = len(graph.nodes)
    if n == 0:
        return PropagationResult({}, 0, 0.0)
    af = np.ones(n)
    residual = math.inf
    if schedule is None:
        M = graph.matrix()
        for it in range(1, max_iter + 1):
            new = 1.0 + damping * (M @ af)
            residual = float(np.max(np.abs(new - af)))
            af = new
            if not np.all(np.isfinite(af)):
                break
            if residual < tol:
                return PropagationResult(dict(zip(graph.nodes, af.tolist())), it, residual)
    else:
        idx = graph.index()
        order = [idx[p] for p in schedule]
        if sorted(order) != list(range(n)):
            raise ValueError("schedule must list every node exactly once")
        incoming = [[] for _ in range(n)]
        for citing, cited, w in graph.edges:
            incoming[idx[cited]].append((idx[citing], w))
        for it in range(1, max_iter + 1):
            residual = 0.0
            for a in order:
                new = 1.0 + damping * math.fsum(af[j] * w for j, w in incoming[a])
                residual = max(residual, abs(new - af[a]))
                af[a] = new
            if not np.all(np.isfinite(af)):
                break
            if residual < tol:
                return PropagationResult(dict(zip(graph.nodes, af.tolist())), it, residual)
    raise PropagationDivergence(
        f"no convergence after {max_iter} iterations (last max change {residual:.3g}); "
        f"the damped citation matrix likely has spectral radius >= 1, try a smaller damping than {damping}"
    )


def author_influence(graph, author, af):
    """Share-weighted sum of the author's paper scores (0.0 for an author with no papers)."""
    total = []
    for paper, share in graph.papers_of(author):
        if paper not in af:
            raise KeyError(f"paper {paper!r} of author {author!r} has no score; propagate first")
        total.append(share * af[paper])
    return math.fsum(total)


def author_table(graph, af):
    return {a: author_influence(graph, a, af) for a in graph.authors()}


# --- removal invariance ----------------------------------------------------

def _features_of(paper_or_features):
    if isinstance(paper_or_features, Mapping):
        return dict(paper_or_features)
    return citation_features(paper_or_features)


def removal_violations(paper_or_features, ranker, sequential=True):
    """Pairs whose relative order changes when references are removed.

    Checks every single-reference deletion and, with ``sequential``, the
    chain of deletions that drops the current top reference each time.
    Returns a list of ``(removed_ids, a, b)`` for each violated pair.
    """
    features = _features_of(paper_or_features)

    def order(feats):
        return [r.cit_id for r in rank_references(ranker.score_references(feats).items())]

    full = order(features)
    pos = {c: i for i, c in enumerate(full)}
    removals = [(c,) for c in full]
    if sequential:
        removals += [tuple(full[:k]) for k in range(2, len(full) - 1)]
    violations = []
    for removed in removals:
        kept = {c: f for c, f in features.items() if c not in removed}
        sub = order(kept)
        for i in range(len(sub)):
            for j in range(i + 1, len(sub)):
                if pos[sub[i]] > pos[sub[j]]:
                    violations.append((removed, sub[i], sub[j]))
    return violations


def removal_invariance_check(paper_or_features, ranker, sequential=True):
    return not removal_violations(paper_or_features, ranker, sequential)


# --- graph file ------------------------------------------------------------

def graph_text(graph):
    lines = [GRAPH_HEADER, "[nodes]", *graph.nodes, "[edges]"]
    lines += [f"{citing}\t{cited}\t{w!r}" for citing, cited, w in graph.edges]
    lines.append("[authors]")
    for paper in sorted(graph.authorship):
        for author, share in sorted(graph.authorship[paper].items()):
            lines.append(f"{author}\t{paper}\t{share!r}")
    return "\n".join(lines) + "\n"


def write_graph(path, graph):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(graph_text(graph))


def read_graph(path):
    """Parse a graph file; edge lines are ``citing cited weight``."""
    nodes, edges, authorship = [], [], {}
    section = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1]
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            try:
                if section == "nodes":
                    nodes.append(parts[0])
                elif section == "edges":
                    edges.append((parts[0], parts[1], float(parts[2])))
                elif section == "authors":
                    authorship.setdefault(parts[1], {})[parts[0]] = float(parts[2])
                else:
                    raise GraphError(f"{path}:{lineno}: line outside a known section")
            except (IndexError, ValueError) as exc:
                if isinstance(exc, GraphError):
                    raise
                raise GraphError(f"{path}:{lineno}: malformed {section} line") from None
    return InfluenceGraph(nodes, edges, authorship)


def write_report(path_or_fh, rows, header):
    """Tab-separated rows sorted by descending value, ties by id."""
    rows = sorted(rows, key=lambda r: (-r[1], r[0]))
    lines = ["\t".join(header)] + ["\t".join([r[0], f"{r[1]!r}", *map(str, r[2:])]) for r in rows]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_fh, "write"):
        path_or_fh.write(text)
    else:
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            fh.write(text)
