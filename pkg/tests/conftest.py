import json

import pytest


def make_doc(paragraphs, references=None, heading="Method", paper_id="P1",
             authors=("Jane Smith",), title="A Test Paper", year=2020):
    """Minimal ingestion record with one section."""
    if references is None:
        references = [{"cit_id": 1, "title": "Cited Work", "authors": ["John Doe"], "year": 2010}]
    return {
        "paper_id": paper_id,
        "title": title,
        "authors": list(authors),
        "year": year,
        "sections": [{"heading": heading, "paragraphs": paragraphs}],
        "references": references,
    }


def refs(n):
    return [{"cit_id": i, "title": f"Work {i}", "authors": [f"Author {chr(64 + i)}"], "year": 2000 + i}
            for i in range(1, n + 1)]


@pytest.fixture
def write_doc(tmp_path):
    def _write(doc, name=None):
        path = tmp_path / (name or f"{doc['paper_id']}.json")
        path.write_text(json.dumps(doc), encoding="utf-8")
        return str(path)
    return _write


TOY_AF = {
    "T01": 0.8045796875, "T02": 2.4025, "T03": 1.50436875, "T04": 1.2975,
    "T05": 1.0, "T06": 1.0, "T07": 1.0, "T08": 1.0, "T09": 1.0,
    "T10": 2.319625, "T11": 1.5525, "T12": 1.0,
}


def run_cli(*argv):
    """Run the CLI in-process; returns (exit code, stdout, stderr)."""
    import contextlib
    import io

    from citeinfluence.cli import main

    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


def run_toy_pipeline(store, seed=0):
    """Full CLI run over the bundled toy corpus; returns the last exit code."""
    from citeinfluence.synthetic import toy_corpus_paths

    steps = [
        ("ingest", *toy_corpus_paths()),
        ("train-sentiment",),
        ("train-classifier", "--bootstrap"),
        ("train-ranker", "--bootstrap", "--trees", "20"),
        ("pipeline", "--all", "--bootstrap"),
        ("propagate",),
    ]
    for step in steps:
        code, _, err = run_cli("--store", store, "--seed", seed, *step)
        assert code == 0, (step, err)
    return code


def read_tsv(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    return [ln.split("\t") for ln in lines[1:] if ln]
