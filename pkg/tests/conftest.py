"""Shared fixtures: bundled WordNet databases, the generated demo corpus
tree, and discovery of optional real datasets via environment variables.

Real-data tests (WordNet 3.0 WNDB files, WikiText-103) run only when
WORDNET_DIR / WIKITEXT103_DIR point at the data; they skip loudly otherwise.
"""

from __future__ import annotations

import os
from pathlib import Path

import pytest

from hypernym_lm import fixtures as fx
from hypernym_lm.config import load_config
from hypernym_lm.wordnet import load_fixture

WORDNET_ENV = "WORDNET_DIR"
WIKITEXT_ENV = "WIKITEXT103_DIR"


@pytest.fixture(scope="session")
def small_db():
    return load_fixture(fx.wordnet_small_path())


@pytest.fixture(scope="session")
def train_db():
    return load_fixture(fx.wordnet_train_path())


@pytest.fixture(scope="session")
def fixture_tree(tmp_path_factory):
    """Generated corpus + copied WordNet fixtures + demo config."""
    root = tmp_path_factory.mktemp("fixture_corpus")
    return fx.write_fixture_tree(root)


@pytest.fixture(scope="session")
def demo_cfg(fixture_tree):
    return load_config(fixture_tree["config"])


class PreparedPipeline:
    """Corpus artifacts shared by training/eval tests (built once)."""

    def __init__(self, fixture_tree):
        from hypernym_lm.classmap import ClassMapParams, build_classmap, count_frequencies
        from hypernym_lm.data import encode_corpus, read_documents, read_token_stream
        from hypernym_lm.vocab import build_partition
        from hypernym_lm.wordnet import load_fixture

        self.tree = fixture_tree
        self.config_path = fixture_tree["config"]
        self.db = load_fixture(fixture_tree["wordnet_train"])
        self.freqs = count_frequencies(read_token_stream(fixture_tree["train"]))
        self.cmap = build_classmap(self.freqs, self.db, ClassMapParams(depth=6),
                                   corpus_id="train")
        self.part = build_partition(self.freqs, self.cmap, unk_threshold=2)
        self.train_ids = encode_corpus(fixture_tree["train"], self.part)
        self.valid_ids = encode_corpus(fixture_tree["valid"], self.part)
        self.valid_docs = read_documents(fixture_tree["valid"])
        self.test_docs = read_documents(fixture_tree["test"])


@pytest.fixture(scope="session")
def prepared(fixture_tree):
    return PreparedPipeline(fixture_tree)


def real_wordnet_dir() -> Path | None:
    d = os.environ.get(WORDNET_ENV)
    if d and (Path(d) / "data.noun").exists() and (Path(d) / "index.noun").exists():
        return Path(d)
    return None


def wikitext_train_path() -> Path | None:
    d = os.environ.get(WIKITEXT_ENV)
    if not d:
        return None
    for name in ("wiki.train.tokens", "wikitext-103/wiki.train.tokens", "train.txt"):
        p = Path(d) / name
        if p.exists():
            return p
    return None


def require_real_wordnet() -> Path:
    d = real_wordnet_dir()
    if d is None:
        pytest.skip(
            f"real WordNet 3.0 WNDB files not available; set {WORDNET_ENV} to a "
            "directory containing index.noun/data.noun to run this test")
    return d


def require_wikitext() -> Path:
    p = wikitext_train_path()
    if p is None:
        pytest.skip(
            f"WikiText-103 training split not available; set {WIKITEXT_ENV} to the "
            "directory containing wiki.train.tokens to run this test")
    return p


@pytest.fixture(scope="session")
def real_wordnet():
    from hypernym_lm.wordnet import load_wndb

    return load_wndb(require_real_wordnet())


# -- acceptance reporting ----------------------------------------------------

_ACCEPTANCE_PREFIX = "tests/test_acceptance.py"


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.skipped):
        return
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.passed:
        status = "PASS"
    elif report.skipped:
        reason = ""
        if isinstance(report.longrepr, tuple):
            reason = f"  ({report.longrepr[2]})"
        status = f"SKIP{reason}"
    else:
        status = "FAIL"
    print(f"\n[acceptance] {name}: {status}", flush=True)
