"""Shared fixtures: the demo build and corpus are expensive, so build once."""
from pathlib import Path

import pytest

from porous import build_family, generate_from_spec, load_config, \
    load_corpus_spec

ROOT = Path(__file__).resolve().parents[1]
DEMO_CONFIG_PATH = ROOT / "demos" / "config" / "demo.json"
DEMO_CORPUS_PATH = ROOT / "demos" / "config" / "corpus.json"


@pytest.fixture(scope="session")
def demo_config():
    return load_config(DEMO_CONFIG_PATH)


@pytest.fixture(scope="session")
def demo_build(demo_config):
    return build_family(demo_config.build)


@pytest.fixture(scope="session")
def demo_family(demo_build):
    return demo_build[0]


@pytest.fixture(scope="session")
def demo_log(demo_build):
    return demo_build[1]


@pytest.fixture(scope="session")
def corpus_spec():
    return load_corpus_spec(DEMO_CORPUS_PATH)


@pytest.fixture(scope="session")
def corpus_entries(corpus_spec):
    return generate_from_spec(corpus_spec)


@pytest.fixture(scope="session")
def plane_entries(corpus_entries):
    return [e for e in corpus_entries if e.kind == "plane"]


@pytest.fixture(scope="session")
def nonplane_entries(corpus_entries):
    return [e for e in corpus_entries if e.kind != "plane"]
