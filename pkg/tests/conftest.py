import json
from pathlib import Path

import pytest

from coda.corpus import load_dataset
from coda.textkit import HashedTfidfEmbedder, RuleBasedTagger

FIXTURES = Path(__file__).parent / "fixtures"
DATA = FIXTURES / "data"
GOLDENS = FIXTURES / "goldens"


@pytest.fixture(scope="session")
def news_dataset():
    return load_dataset(DATA / "news100.jsonl", "jsonl", "classification")


@pytest.fixture(scope="session")
def conll_dataset():
    return load_dataset(DATA / "mini.conll", "conll", "ner")


@pytest.fixture(scope="session")
def squad_dataset():
    return load_dataset(DATA / "mini_squad.json", "squad", "qa")


@pytest.fixture(scope="session")
def embedder(news_dataset):
    return HashedTfidfEmbedder().fit([d.text for d in news_dataset])


@pytest.fixture(scope="session")
def tagger():
    return RuleBasedTagger()


def load_golden(name: str):
    payload = json.loads((GOLDENS / f"{name}.json").read_text("utf-8"))
    text = (GOLDENS / f"{name}.txt").read_text("utf-8")
    return payload, text
