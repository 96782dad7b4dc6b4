from __future__ import annotations

import csv
from pathlib import Path

import pytest
import yaml

from finlingua.config import AppConfig
from finlingua.fintools import ingest_funds, load_portfolios
from finlingua.gateway import build_deps
from finlingua.langid import load_lexicon

PKG_ROOT = Path(__file__).parent.parent / "src" / "finlingua"
FIXTURES = PKG_ROOT / "assets" / "fixtures"
FUNDS_CSV = PKG_ROOT / "assets" / "funds" / "funds.csv"
PORTFOLIOS_JSONL = PKG_ROOT / "assets" / "funds" / "portfolios.jsonl"
LANGID_CORPUS = FIXTURES / "langid_corpus.tsv"
DECOUPLING_PAIRS = FIXTURES / "decoupling_pairs.yaml"
GOLDEN_DIR = FIXTURES / "golden"
LOGS_DIR = FIXTURES / "logs"


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon()


@pytest.fixture(scope="session")
def store():
    return ingest_funds()


@pytest.fixture(scope="session")
def portfolios(store):
    return load_portfolios(store=store)


@pytest.fixture
def deps():
    # Function-scoped: a fresh SessionStore per test, so session state never
    # leaks between tests.
    return build_deps(AppConfig())


def load_langid_corpus():
    """(group, expected_tag, session_hint_or_None, text) rows from the TSV."""
    rows = []
    for raw in LANGID_CORPUS.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        group, tag, hint, text = line.split("\t")
        rows.append((group, tag, None if hint == "-" else hint, text))
    return rows


def load_decoupling_pairs():
    doc = yaml.safe_load(DECOUPLING_PAIRS.read_text(encoding="utf-8"))
    return [(p["mixed"], p["english"]) for p in doc["pairs"]]


def funds_rows():
    with FUNDS_CSV.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
