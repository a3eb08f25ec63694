import json

import pytest

from coda.corpus import (
    ClassificationPayload,
    Dataset,
    Document,
    EntitySpan,
    TaskKind,
    load_dataset,
    merge_documents,
    sample_low_resource,
    write_dataset,
)
from coda.errors import InsufficientData, ParseError, TaskMismatch


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", "utf-8")


class TestJsonl:
    def test_two_line_parse(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_lines(path, [
            json.dumps({"text": "first text", "label": "a"}),
            json.dumps({"id": "x9", "text": "second text", "label": "b"}),
        ])
        ds = load_dataset(path, "jsonl", "classification")
        assert len(ds) == 2
        assert ds.documents[0].id == "doc0"
        assert ds.documents[1].id == "x9"
        assert ds.label_inventory == {"a", "b"}

    @pytest.mark.parametrize("record", [
        "{not json",
        json.dumps({"label": "a"}),
        json.dumps({"text": "t"}),
        json.dumps({"text": "", "label": "a"}),
        json.dumps({"text": "t", "label": "a", "id": 7}),
    ])
    def test_malformed_records_rejected(self, tmp_path, record):
        path = tmp_path / "d.jsonl"
        write_lines(path, [json.dumps({"text": "fine", "label": "a"}), record])
        with pytest.raises(ParseError) as err:
            load_dataset(path, "jsonl", "classification")
        assert ":2" in err.value.locator

    def test_task_mismatch(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_lines(path, [json.dumps({"text": "t", "label": "a"})])
        with pytest.raises(TaskMismatch):
            load_dataset(path, "jsonl", "ner")


class TestConll:
    def test_span_reconstruction(self, conll_dataset):
        doc = conll_dataset.documents[0]
        assert doc.text.startswith("Israel approves")
        assert doc.payload.spans[0] == EntitySpan(0, 1, "LOC")
        west_bank = doc.payload.spans[-1]
        assert (west_bank.start_token, west_bank.end_token, west_bank.entity_type) == (6, 8, "LOC")
        assert doc.payload.span_surface(west_bank) == "West Bank"

    def test_docstart_ignored(self, conll_dataset):
        assert all("DOCSTART" not in d.text for d in conll_dataset)

    def test_strict_bio(self, tmp_path):
        path = tmp_path / "bad.conll"
        write_lines(path, ["Rome B-LOC", "visits O", "Paris I-LOC", ""])
        with pytest.raises(ParseError):
            load_dataset(path, "conll", "ner")

    def test_single_column_rejected(self, tmp_path):
        path = tmp_path / "bad.conll"
        write_lines(path, ["justatoken", ""])
        with pytest.raises(ParseError):
            load_dataset(path, "conll", "ner")

    def test_type_change_needs_b(self, tmp_path):
        path = tmp_path / "bad.conll"
        write_lines(path, ["Rome B-LOC", "Rome I-PER", ""])
        with pytest.raises(ParseError):
            load_dataset(path, "conll", "ner")


class TestSquad:
    def test_answers_verified(self, squad_dataset):
        assert len(squad_dataset) == 3
        doc = squad_dataset.by_id("qa0")
        pl = doc.payload
        assert doc.text[pl.answer_start : pl.answer_start + len(pl.answer)] == pl.answer

    def test_bad_offset_rejected(self, tmp_path):
        payload = {"data": [{"paragraphs": [{"context": "The sky is blue.", "qas": [
            {"id": "q", "question": "What color?", "answers": [{"text": "blue", "answer_start": 0}]}
        ]}]}]}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(payload))
        with pytest.raises(ParseError):
            load_dataset(path, "squad", "qa")


class TestRoundTrips:
    @pytest.mark.parametrize("fixture_name,fmt,task", [
        ("news_dataset", "jsonl", "classification"),
        ("conll_dataset", "conll", "ner"),
        ("squad_dataset", "squad", "qa"),
    ])
    def test_load_write_load(self, request, tmp_path, fixture_name, fmt, task):
        original = request.getfixturevalue(fixture_name)
        path = tmp_path / f"out.{fmt}"
        write_dataset(original, path)
        reloaded = load_dataset(path, fmt, task)
        assert len(reloaded) == len(original)
        assert reloaded.label_inventory == original.label_inventory
        for a, b in zip(original, reloaded):
            assert a.text == b.text
            if task == "ner":
                assert a.payload.tokens == b.payload.tokens
                assert a.payload.spans == b.payload.spans
            else:
                assert a.payload == b.payload


def make_classification(n_labels=5, per_label=10):
    docs = []
    for li in range(n_labels):
        for i in range(per_label):
            docs.append(Document(f"d{li}_{i}", f"text {li} {i}", ClassificationPayload(f"label{li}")))
    return Dataset(TaskKind.CLASSIFICATION, tuple(docs), frozenset(f"label{li}" for li in range(n_labels)))


class TestSampling:
    def test_identity_when_full(self, news_dataset):
        assert sample_low_resource(news_dataset, len(news_dataset), 3) is news_dataset

    def test_deterministic(self, news_dataset, tmp_path):
        a = sample_low_resource(news_dataset, 30, seed=1)
        b = sample_low_resource(news_dataset, 30, seed=1)
        pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_dataset(a, pa)
        write_dataset(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_stratified_every_label_present(self):
        # oracle: brute-force label counts over the output
        ds = make_classification(n_labels=5, per_label=40)
        for seed in (7, 11, 99):
            out = sample_low_resource(ds, 8, seed=seed)
            counts = {}
            for doc in out:
                counts[doc.payload.label] = counts.get(doc.payload.label, 0) + 1
            assert set(counts) == ds.label_inventory
            assert sum(counts.values()) == 8

    def test_subset_and_order_preserved(self, news_dataset):
        out = sample_low_resource(news_dataset, 25, seed=5)
        ids = [d.id for d in news_dataset]
        out_ids = [d.id for d in out]
        assert out_ids == sorted(out_ids, key=ids.index)
        assert set(out_ids) <= set(ids)
        assert len(out) == 25

    def test_insufficient(self, news_dataset):
        with pytest.raises(InsufficientData):
            sample_low_resource(news_dataset, 101, seed=0)


class TestMerge:
    def test_counts(self, news_dataset):
        extra = [
            Document(f"{d.id}#novel0#r1", d.text + " more", d.payload)
            for d in news_dataset.documents[:5]
        ]
        merged = merge_documents(news_dataset, extra)
        assert len(merged) == len(news_dataset) + 5
        assert [d.id for d in merged.documents[:100]] == [d.id for d in news_dataset]

    def test_duplicate_ids_rejected(self, news_dataset):
        extra = [Document("sports0#novel0#r1", "text x", ClassificationPayload("sports"))]
        once = merge_documents(news_dataset, extra)
        with pytest.raises(ValueError):
            merge_documents(once, extra)
