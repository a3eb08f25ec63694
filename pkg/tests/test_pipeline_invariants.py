import json
import threading
import time
from pathlib import Path

import pytest

from coda.backend import HttpGenerationBackend, MockGenerationBackend
from coda.pipeline import Pipeline, RunConfig, make_backend
from conftest import DATA


def config_for(tmp_path, n_docs=12, **overrides):
    lines = (DATA / "news100.jsonl").read_text().splitlines()[:n_docs]
    dataset_path = tmp_path / "subset.jsonl"
    dataset_path.write_text("\n".join(lines) + "\n")
    defaults = dict(
        task="classification",
        dataset_path=str(dataset_path),
        output_dir=str(tmp_path / "out"),
        seed=1,
    )
    defaults.update(overrides)
    return RunConfig.from_dict(defaults)


class CountingBackend:
    """Mock wrapper that tracks the number of in-flight generate calls."""

    backend_id = "counting"

    def __init__(self):
        self.inner = MockGenerationBackend()
        self.lock = threading.Lock()
        self.in_flight = 0
        self.max_in_flight = 0

    def generate(self, request):
        with self.lock:
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
        time.sleep(0.002)
        try:
            return self.inner.generate(request)
        finally:
            with self.lock:
                self.in_flight -= 1


def test_generation_fanout_bounded_by_concurrency(tmp_path):
    config = config_for(tmp_path, n_docs=12, concurrency=2)
    pipeline = Pipeline(config)
    counting = CountingBackend()
    pipeline.backend.inner = counting
    analysis = pipeline.analyze()
    records = pipeline.extract(analysis)
    pipeline.generate(records)
    assert counting.max_in_flight <= 2
    assert all(r.generation for r in records)


def test_env_var_overrides_backend(tmp_path, monkeypatch):
    monkeypatch.setenv("CODA_BACKEND_URL", "http://override:9000")
    config = config_for(tmp_path, backend_url=None)
    backend = make_backend(config)
    assert isinstance(backend, HttpGenerationBackend)
    assert backend.url == "http://override:9000"
    monkeypatch.delenv("CODA_BACKEND_URL")
    assert isinstance(make_backend(config), MockGenerationBackend)


def test_every_record_in_merged_or_rejections(tmp_path):
    config = config_for(tmp_path, n_docs=12, accept_policy="strict", k_keywords=4)
    result = Pipeline(config).run()
    out = Path(config.output_dir)
    merged_ids = {
        json.loads(line)["id"]
        for line in (out / "augmented.jsonl").read_text().splitlines()
        if "#" in json.loads(line)["id"]
    }
    rejected_ids = {
        json.loads(line)["id"] for line in (out / "rejections.jsonl").read_text().splitlines() if line.strip()
    }
    all_ids = {r.record_id for r in result.records}
    assert merged_ids | rejected_ids == all_ids
    assert not merged_ids & rejected_ids


def test_synonym_expansion_adds_same_pos_alternative(news_dataset, embedder, tagger):
    from coda.constraints import SynonymIndex, extract_lexical
    from coda.textkit import tokenize

    index = SynonymIndex.build(news_dataset, embedder, tagger)
    doc = news_dataset.documents[0]
    lex = extract_lexical(doc, 3, embedder, synonym_index=index, tagger=tagger)
    for group in lex.include:
        assert 1 <= len(group.alternatives) <= 2
        if len(group.alternatives) == 2:
            head, alt = group.alternatives
            assert alt != head.casefold()
            assert tagger.tag(tokenize(alt)).tags[0] == tagger.tag(tokenize(head)).tags[0]


def test_exclusions_pull_top_spurious_phrases(tmp_path):
    config = config_for(tmp_path, n_docs=100, enable_exclusions=True, min_support=3)
    pipeline = Pipeline(config)
    analysis = pipeline.analyze()
    records = pipeline.extract(analysis)
    spurious = {item.label: [] for item in analysis.spurious}
    for item in analysis.spurious:
        spurious[item.label].append(item.phrase)
    with_exclusions = [r for r in records if r.constraint_set.lexical.exclude]
    assert with_exclusions, "expected some excluded keywords at min_support=3"
    for record in with_exclusions:
        label = record.constraint_set.semantic.label
        includes = {
            a.casefold()
            for g in record.constraint_set.lexical.include
            for a in g.alternatives
        }
        for phrase in record.constraint_set.lexical.exclude:
            assert phrase in spurious[label]
            assert phrase.casefold() not in includes
        assert len(record.constraint_set.lexical.exclude) <= 3


def test_rounds_multiply_slots(tmp_path):
    config = config_for(tmp_path, n_docs=12, rounds=3)
    result = Pipeline(config).run()
    assert len(result.records) == 12 * 5 * 3
    rounds = {r.round for r in result.records}
    assert rounds == {1, 2, 3}
    per_round = {rd: sum(1 for r in result.records if r.round == rd) for rd in rounds}
    assert set(per_round.values()) == {60}


def test_diversity_bounded_by_total_types(news_dataset):
    from coda.metrics import diversity, lm_tokens

    sources = list(news_dataset.documents[:5])
    groups = {d.id: [d.text + " novel tokens", "fresh words here"] for d in sources}
    total_types = set()
    for augs in groups.values():
        for aug in augs:
            total_types.update(lm_tokens(aug))
    assert diversity(sources, groups) <= len(total_types)


def test_remote_embedder_error_payload():
    from coda.errors import BackendUnavailable
    from coda.textkit import RemoteEmbedder

    class FakeResponse:
        status_code = 503

        @staticmethod
        def json():
            return {"error": "overloaded"}

    class FakeSession:
        def post(self, *a, **k):
            return FakeResponse()

    with pytest.raises(BackendUnavailable, match="overloaded"):
        RemoteEmbedder("http://emb", session=FakeSession()).embed(["x"])
