"""Shared fixtures: the bundled corpus parsed once per session."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from mrminer.dataflow import method_writes_summary
from mrminer.discovery import discover_mtc
from mrminer.frontend import SourceFile, link_project, parse_source
from mrminer.synthesis import synthesize_all

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
GOLDEN = Path(__file__).resolve().parent / "golden"


def load_corpus_model():
    frags = [
        parse_source(SourceFile(str(p.relative_to(ROOT)), p.read_text()))
        for p in sorted(CORPUS.rglob("*.mt"))
    ]
    return link_project(frags, ["com.demo"])


@pytest.fixture(scope="session")
def corpus_model():
    return load_corpus_model()


@pytest.fixture(scope="session")
def summaries(corpus_model):
    return method_writes_summary(corpus_model, 3)


@pytest.fixture(scope="session")
def corpus_tests(corpus_model):
    return {
        tc.name: tc
        for suite in corpus_model.test_suites
        for tc in suite.test_cases
        if not tc.params
    }


@pytest.fixture(scope="session")
def discovery_results(corpus_model, summaries, corpus_tests):
    return {
        name: discover_mtc(tc, corpus_model, summaries, "conservative")
        for name, tc in corpus_tests.items()
    }


@pytest.fixture(scope="session")
def codified(corpus_model, discovery_results):
    results = [r for r in discovery_results.values() if r.is_mtc]
    results.sort(key=lambda r: r.test_name)
    return synthesize_all(corpus_model, results)


@pytest.fixture(scope="session")
def labels():
    return json.loads((CORPUS / "labels.json").read_text())
