"""On-disk corpus store: one directory per paper, plain-text artifacts.

Layout::

    <root>/manifest.json                 model registry and paper index
    <root>/models/<kind>.<ext>           trained models
    <root>/papers/<id>/paper.json        parsed ingestion record
    <root>/papers/<id>/analysis.json     pipeline outputs, stamped with model versions
    <root>/graph.txt, af_papers.tsv, af_authors.tsv, propagation.json
"""
from __future__ import annotations

import contextlib
import fcntl
import hashlib
import json
import os
from urllib.parse import quote

from .classifier import CitationNB
from .document import paper_from_dict, paper_to_dict
from .ranking import LambdaMARTRanker
from .sentiment import SentimentNB
from .span import SpanDetector

MODEL_KINDS = {
    "sentiment": ("sentiment.tsv", SentimentNB),
    "classifier": ("classifier.tsv", CitationNB),
    "ranker": ("ranker.txt", LambdaMARTRanker),
    "span": ("span.tsv", SpanDetector),
}


class StoreError(Exception):
    pass


class NotFound(StoreError):
    pass


class ModelMissing(StoreError):
    pass


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def file_digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:16]


def text_digest(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def write_if_changed(path, text):
    """Write ``text`` unless the file already holds exactly it; returns True if written."""
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            if fh.read() == text:
                return False
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return True


class CorpusStore:
    def __init__(self, root):
        self.root = os.path.abspath(root)

    # paths
    def path(self, *parts):
        return os.path.join(self.root, *parts)

    def paper_dir(self, paper_id):
        return self.path("papers", quote(paper_id, safe=""))

    def init(self):
        os.makedirs(self.path("papers"), exist_ok=True)
        os.makedirs(self.path("models"), exist_ok=True)
        if not os.path.exists(self.path("manifest.json")):
            write_if_changed(self.path("manifest.json"), _dumps({"format": 1, "models": {}, "papers": []}))
        return self

    def manifest(self):
        try:
            with open(self.path("manifest.json"), encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            return {"format": 1, "models": {}, "papers": []}

    def _save_manifest(self, manifest):
        manifest["papers"] = sorted(set(manifest["papers"]))
        write_if_changed(self.path("manifest.json"), _dumps(manifest))

    @contextlib.contextmanager
    def lock(self):
        os.makedirs(self.root, exist_ok=True)
        with open(self.path(".lock"), "w") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    # papers
    def paper_ids(self):
        return list(self.manifest()["papers"])

    def has_paper(self, paper_id):
        return paper_id in self.manifest()["papers"]

    def put_paper(self, paper):
        self.init()
        os.makedirs(self.paper_dir(paper.paper_id), exist_ok=True)
        write_if_changed(os.path.join(self.paper_dir(paper.paper_id), "paper.json"), _dumps(paper_to_dict(paper)))
        manifest = self.manifest()
        manifest["papers"].append(paper.paper_id)
        self._save_manifest(manifest)

    def get_paper(self, paper_id):
        path = os.path.join(self.paper_dir(paper_id), "paper.json")
        if not self.has_paper(paper_id) or not os.path.exists(path):
            raise NotFound(f"paper {paper_id!r} not in store")
        with open(path, encoding="utf-8") as fh:
            return paper_from_dict(json.load(fh))

    def paper_input_digest(self, paper_id):
        return file_digest(os.path.join(self.paper_dir(paper_id), "paper.json"))

    # models
    def put_model(self, kind, model):
        self.init()
        fname, _ = MODEL_KINDS[kind]
        path = self.path("models", fname)
        tmp = path + ".new"
        model.save(tmp)
        with open(tmp, encoding="utf-8") as fh:
            text = fh.read()
        os.remove(tmp)
        write_if_changed(path, text)
        version = text_digest(text)
        manifest = self.manifest()
        manifest["models"][kind] = {"file": f"models/{fname}", "version": version}
        self._save_manifest(manifest)
        return version

    def model_version(self, kind):
        entry = self.manifest()["models"].get(kind)
        return entry["version"] if entry else None

    def get_model(self, kind, stage=None):
        entry = self.manifest()["models"].get(kind)
        if entry is None:
            raise ModelMissing(f"{stage or kind}: no {kind} model registered; run train-{kind}")
        _, cls = MODEL_KINDS[kind]
        return cls.load(self.path(entry["file"]))

    # stage outputs
    def analysis_path(self, paper_id):
        return os.path.join(self.paper_dir(paper_id), "analysis.json")

    def get_analysis(self, paper_id):
        try:
            with open(self.analysis_path(paper_id), encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            return None

    def put_analysis(self, paper_id, record):
        return write_if_changed(self.analysis_path(paper_id), _dumps(record))

    def put_text(self, name, text):
        return write_if_changed(self.path(name), text)

    def put_json(self, name, obj):
        return write_if_changed(self.path(name), _dumps(obj))

    def get_json(self, name):
        try:
            with open(self.path(name), encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            return None

    def digest(self):
        """Hash over every file in the store (lock file excluded)."""
        h = hashlib.sha256()
        for dirpath, dirnames, filenames in sorted(os.walk(self.root)):
            dirnames.sort()
            for name in sorted(filenames):
                if name == ".lock":
                    continue
                full = os.path.join(dirpath, name)
                h.update(os.path.relpath(full, self.root).encode())
                with open(full, "rb") as fh:
                    h.update(fh.read())
        return h.hexdigest()
