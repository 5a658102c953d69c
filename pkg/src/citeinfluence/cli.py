"""Command-line front end.

Exit codes: 0 ok, 1 usage or input error, 2 not found, 3 model missing,
4 propagation divergence. Errors are printed to stderr as a single line
``error: <kind>: <message>``.
"""
from __future__ import annotations

import argparse
import io
import sys

from . import __version__
from .classifier import bootstrap_label, read_labelled, train_classifier
from .context import DEFAULT_TAU, ContextExtractor, LexicalRelatedness
from .document import ParseError, load_paper
from .influence import (GraphError, PropagationDivergence, author_table, graph_text, propagate,
                        read_graph, write_report)
from .pipeline import analyze_paper, build_graph, enrich_mentions, factor_vectors
from .ranking import LambdaMARTRanker, citation_features
from .sentiment import read_corpus, seed_corpus, train_sentiment
from .span import cross_validate, read_span_corpus, train_span
from .store import CorpusStore, ModelMissing, NotFound
from .synthetic import span_corpus

EXIT_OK, EXIT_USAGE, EXIT_NOT_FOUND, EXIT_MODEL_MISSING, EXIT_DIVERGENCE = 0, 1, 2, 3, 4


class CLIError(Exception):
    def __init__(self, kind, message, code):
        super().__init__(message)
        self.kind = kind
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError("usage", message, EXIT_USAGE)


def _extractor(args):
    return ContextExtractor(LexicalRelatedness(args.tau), args.max_span)


def _out(text):
    sys.stdout.write(text)


# --- commands --------------------------------------------------------------

def cmd_ingest(args, store):
    store.init()
    for path in args.paths:
        try:
            paper = load_paper(path, strict=args.strict)
        except OSError as exc:
            raise CLIError("not-found", f"{path}: {exc.strerror}", EXIT_NOT_FOUND) from None
        except ParseError as exc:
            raise CLIError("parse", f"{path}: {exc}", EXIT_USAGE) from None
        if store.has_paper(paper.paper_id) and not args.force:
            raise CLIError("duplicate", f"paper {paper.paper_id!r} already ingested (use --force)", EXIT_USAGE)
        store.put_paper(paper)
        for d in paper.diagnostics:
            print(f"diagnostic: {paper.paper_id}: {d}", file=sys.stderr)
        _out(f"{paper.paper_id}\n")


def cmd_train_sentiment(args, store):
    corpus = read_corpus(args.corpus) if args.corpus else seed_corpus()
    model = train_sentiment(corpus, alpha=args.alpha)
    version = store.put_model("sentiment", model)
    _out(f"sentiment model {version} trained on {len(corpus)} records\n")


def _analysed_factors(store, args):
    """Factor vectors for every stored paper under the registered sentiment model."""
    sent = store.get_model("sentiment", stage="train-classifier")
    extractor = _extractor(args)
    out = []
    for pid in store.paper_ids():
        paper = enrich_mentions(store.get_paper(pid), sent, extractor)
        out.append((paper, factor_vectors(paper)))
    return out


def cmd_train_classifier(args, store):
    if args.data:
        rows = read_labelled(args.data)
    elif args.bootstrap:
        rows = [(fv, bootstrap_label(fv)) for _, facts in _analysed_factors(store, args)
                for _, fv in sorted(facts.items())]
    else:
        raise CLIError("usage", "give --data FILE or --bootstrap", EXIT_USAGE)
    if not rows:
        raise CLIError("usage", "no labelled factor vectors available", EXIT_USAGE)
    version = store.put_model("classifier", train_classifier(rows, alpha=args.alpha))
    _out(f"classifier model {version} trained on {len(rows)} records\n")


def cmd_train_ranker(args, store):
    classifier = None if args.bootstrap else store.get_model("classifier", stage="train-ranker")
    X, y, group = [], [], []
    for paper, facts in _analysed_factors(store, args):
        feats = citation_features(paper)
        rows, labels = [], []
        for cit_id in sorted(feats):
            fv = facts[cit_id]
            label = bootstrap_label(fv) if classifier is None else int(classifier.predict([fv])[0])
            rows.extend(feats[cit_id].tolist())
            labels.extend([label] * len(feats[cit_id]))
        if len(rows) >= 2:
            X.extend(rows)
            y.extend(labels)
            group.append(len(rows))
    if not group:
        raise CLIError("usage", "no paper has at least two citation occurrences to train on", EXIT_USAGE)
    model = LambdaMARTRanker(n_estimators=args.trees, max_depth=args.depth, learning_rate=args.learning_rate,
                             min_samples_leaf=args.min_leaf, random_state=args.seed).fit(X, y, group)
    version = store.put_model("ranker", model)
    _out(f"ranker model {version}: {len(model.trees_)} trees on {len(group)} queries\n")


def _load_span_data(args):
    if args.corpus:
        return read_span_corpus(args.corpus)
    if args.synthetic:
        return span_corpus(args.synthetic, noise=args.noise, random_state=args.seed)
    raise CLIError("usage", "give a corpus file or --synthetic N", EXIT_USAGE)


def cmd_train_span(args, store):
    data = _load_span_data(args)
    version = store.put_model("span", train_span(data))
    _out(f"span model {version} trained on {len(data)} sentences\n")


def cmd_cross_validate_span(args, store):
    data = _load_span_data(args)
    try:
        results = cross_validate(data, k=args.folds, random_state=args.seed)
    except ValueError as exc:
        raise CLIError("usage", str(exc), EXIT_USAGE) from None
    _out("model\tprecision\trecall\tf1\n")
    for name, r in results.items():
        _out(f"{name}\t{r.precision:.4f}\t{r.recall:.4f}\t{r.f1:.4f}\n")


def _analysis_record(analysis, stamp):
    return {
        "stamp": stamp,
        "mentions": [m.__dict__.copy() for m in analysis.paper.mentions],
        "factors": [{"cit_id": c, **fv.__dict__} for c, fv in sorted(analysis.factors.items())],
        "ranked": [{"cit_id": r.cit_id, "score": r.score, "rank": r.rank, "class": r.class_label}
                   for r in analysis.ranked],
        "local_influence": [{"cit_id": c, "value": v} for c, v in sorted(analysis.local.items())],
    }


def cmd_pipeline(args, store):
    ids = store.paper_ids() if args.all else [args.paper_id]
    if not args.all and args.paper_id is None:
        raise CLIError("usage", "give a paper id or --all", EXIT_USAGE)
    for pid in ids:
        if not store.has_paper(pid):
            raise NotFound(f"paper {pid!r} not in store")
    sent = store.get_model("sentiment", stage="sentiment")
    classifier = None if args.bootstrap else store.get_model("classifier", stage="classification")
    ranker = store.get_model("ranker", stage="ranking")
    stamp_models = {
        "sentiment": store.model_version("sentiment"),
        "classifier": "bootstrap" if args.bootstrap else store.model_version("classifier"),
        "ranker": store.model_version("ranker"),
    }
    extractor = _extractor(args)
    for pid in ids:
        stamp = {"input": store.paper_input_digest(pid), "models": stamp_models,
                 "context": {"tau": args.tau, "max_span": args.max_span}}
        previous = store.get_analysis(pid)
        if previous is not None and previous.get("stamp") == stamp:
            _out(f"{pid}\tup-to-date\n")
            continue
        analysis = analyze_paper(store.get_paper(pid), sent, classifier, ranker, extractor)
        store.put_analysis(pid, _analysis_record(analysis, stamp))
        _out(f"{pid}\t{len(analysis.ranked)} references ranked\n")


def _store_graph(store):
    papers, local = [], {}
    for pid in store.paper_ids():
        rec = store.get_analysis(pid)
        if rec is None:
            continue
        papers.append(store.get_paper(pid))
        local[pid] = {row["cit_id"]: row["value"] for row in rec["local_influence"]}
    if not papers:
        raise CLIError("usage", "no analysed papers in store; run pipeline first", EXIT_USAGE)
    return build_graph(papers, local)


def cmd_propagate(args, store):
    with store.lock():
        if args.graph:
            try:
                graph = read_graph(args.graph)
            except OSError as exc:
                raise CLIError("not-found", f"{args.graph}: {exc.strerror}", EXIT_NOT_FOUND) from None
        else:
            graph = _store_graph(store)
        result = propagate(graph, damping=args.damping, tol=args.tol, max_iter=args.max_iter)
        authors = author_table(graph, result.af)
        store.init()
        store.put_text("graph.txt", graph_text(graph))
        buf = io.StringIO()
        write_report(buf, [(p, v, _paper_detail(graph, p)) for p, v in result.af.items()],
                     ("paper_id", "af", "citers"))
        store.put_text("af_papers.tsv", buf.getvalue())
        buf = io.StringIO()
        write_report(buf, [(a, v, _author_detail(graph, a, result.af)) for a, v in authors.items()],
                     ("author", "af", "papers"))
        store.put_text("af_authors.tsv", buf.getvalue())
        store.put_json("propagation.json", {"damping": args.damping, "tol": args.tol,
                                            "iterations": result.iterations, "residual": result.residual})
    _out(f"iterations\t{result.iterations}\nmax_residual\t{result.residual!r}\n"
         f"papers\t{len(result.af)}\nauthors\t{len(authors)}\n")


def _paper_detail(graph, paper):
    cites = sorted((c, w) for c, t, w in graph.edges if t == paper)
    return ";".join(f"{c}:{w!r}" for c, w in cites)


def _author_detail(graph, author, af):
    return ";".join(f"{p}:{s!r}:{af[p]!r}" for p, s in graph.papers_of(author))


def _read_table(store, name):
    path = store.path(name)
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except FileNotFoundError:
        raise NotFound(f"{name} missing; run propagate first") from None
    header, rows = lines[0], [ln.split("\t") for ln in lines[1:] if ln]
    return header, rows


def cmd_report(args, store):
    if args.author is not None:
        header, rows = _read_table(store, "af_authors.tsv")
        wanted = args.author
    else:
        header, rows = _read_table(store, "af_papers.tsv")
        wanted = args.paper
    if wanted:
        index = {r[0]: r for r in rows}
        missing = [w for w in wanted if w not in index]
        if missing:
            raise NotFound(f"unknown id {missing[0]!r}")
        rows = [index[w] for w in wanted]
    rows.sort(key=lambda r: (-float(r[1]), r[0]))
    _out(header + "\n" + "".join("\t".join(r) + "\n" for r in rows))


# --- parser ----------------------------------------------------------------

def build_parser():
    p = _Parser(prog="citeinfluence", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--store", default="citeinfluence-store", help="store directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true", help="unresolved citation markers are fatal")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="context relatedness threshold")
    p.add_argument("--max-span", type=int, default=None, help="cap on context sentences per side")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="parse and store ingestion documents")
    s.add_argument("paths", nargs="+")
    s.add_argument("--force", action="store_true", help="replace an existing paper")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("pipeline", help="run context, sentiment, factors, classes, ranks and local influence")
    s.add_argument("paper_id", nargs="?")
    s.add_argument("--all", action="store_true")
    s.add_argument("--bootstrap", action="store_true", help="use the rule-based labeler instead of the classifier")
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("propagate", help="propagate academic influence over the citation graph")
    s.add_argument("--damping", type=float, default=0.85)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--max-iter", type=int, default=1000)
    s.add_argument("--graph", help="read the graph from a file instead of the store")
    s.set_defaults(func=cmd_propagate)

    s = sub.add_parser("report", help="print paper or author influence rows")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--author", nargs="*")
    g.add_argument("--paper", nargs="*")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("train-sentiment")
    s.add_argument("--corpus", help="text<TAB>label file (default: bundled seed corpus)")
    s.add_argument("--alpha", type=float, default=1.0)
    s.set_defaults(func=cmd_train_sentiment)

    s = sub.add_parser("train-classifier")
    s.add_argument("--data", help="labelled factor file")
    s.add_argument("--bootstrap", action="store_true", help="label stored papers with the rule-based labeler")
    s.add_argument("--alpha", type=float, default=1.0)
    s.set_defaults(func=cmd_train_classifier)

    s = sub.add_parser("train-ranker")
    s.add_argument("--bootstrap", action="store_true", help="relevance labels from the rule-based labeler")
    s.add_argument("--trees", type=int, default=100)
    s.add_argument("--depth", type=int, default=3)
    s.add_argument("--learning-rate", type=float, default=0.1)
    s.add_argument("--min-leaf", type=int, default=2)
    s.set_defaults(func=cmd_train_ranker)

    for name, func in (("train-span", cmd_train_span), ("cross-validate-span", cmd_cross_validate_span)):
        s = sub.add_parser(name)
        s.add_argument("corpus", nargs="?", help="annotated span corpus file")
        s.add_argument("--synthetic", type=int, metavar="N", help="use N generated sentences instead")
        s.add_argument("--noise", type=float, default=0.1)
        if name == "cross-validate-span":
            s.add_argument("--folds", type=int, default=10)
        s.set_defaults(func=func)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        store = CorpusStore(args.store)
        args.func(args, store)
        return EXIT_OK
    except CLIError as exc:
        err = exc
    except NotFound as exc:
        err = CLIError("not-found", str(exc), EXIT_NOT_FOUND)
    except ModelMissing as exc:
        err = CLIError("model-missing", str(exc), EXIT_MODEL_MISSING)
    except PropagationDivergence as exc:
        err = CLIError("divergence", str(exc), EXIT_DIVERGENCE)
    except (GraphError, ValueError) as exc:
        err = CLIError("invalid", str(exc), EXIT_USAGE)
    print(f"error: {err.kind}: {' '.join(str(err).split())}", file=sys.stderr)
    return err.code


if __name__ == "__main__":
    sys.exit(main())
