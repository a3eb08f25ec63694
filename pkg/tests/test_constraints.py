import random
from fractions import Fraction

import numpy as np
import pytest

from coda.backend import GenerationResponse
from coda.constraints import (
    ExtractionContext,
    KeywordGroup,
    LexicalConstraint,
    Novel,
    Rephrase,
    build_constraint_set,
    constraint_set_from_dict,
    constraint_set_to_dict,
    default_keyword_count,
    extract_length,
    extract_lexical,
    extract_semantic,
    extract_syntactic,
)
from coda.corpus import Dataset
from coda.mining import build_index
from coda.textkit import LengthStats, extract_ngrams, split_sentences, tokenize


def oracle_lexical_heads(doc, k, embedder, blocked_positions=(), preselected=()):
    """Exhaustive selector: same score and overlap rule, independent code."""
    seq = tokenize(doc.text)
    ngrams = extract_ngrams(seq)
    vecs = embedder.embed([doc.text] + [ng.surface for ng in ngrams])
    dvec = vecs[0]

    def cos(u, v):
        nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
        return float(np.dot(u, v)) / (nu * nv) if nu and nv else 0.0

    ranked = sorted(
        range(len(ngrams)),
        key=lambda i: (-cos(vecs[i + 1], dvec), ngrams[i].start, ngrams[i].n),
    )
    taken, used, surfaces = [], set(blocked_positions), {s.casefold() for s in preselected}
    for i in ranked:
        if len(taken) == k:
            break
        ng = ngrams[i]
        span = set(range(ng.start, ng.start + ng.n))
        if span & used or ng.surface.casefold() in surfaces:
            continue
        taken.append(ng.surface)
        used |= span
        surfaces.add(ng.surface.casefold())
    return taken


class TestExtractLexical:
    def test_ner_spans_mandatory(self, conll_dataset, embedder):
        doc = conll_dataset.documents[0]
        lex = extract_lexical(doc, 1, embedder)
        heads = [g.head for g in lex.include]
        assert heads[:3] == ["Israel", "Arafat", "West Bank"]
        assert len(heads) == 4  # three spans + one scored keyword

    def test_single_content_word(self, embedder):
        from coda.corpus import ClassificationPayload, Document

        doc = Document("d", "malls.", ClassificationPayload("x"))
        lex = extract_lexical(doc, 1, embedder)
        assert [g.head for g in lex.include] == ["malls"]

    def test_matches_exhaustive_oracle(self, news_dataset, embedder):
        for doc in news_dataset.documents[:10]:
            lex = extract_lexical(doc, 3, embedder)
            assert [g.head for g in lex.include] == oracle_lexical_heads(doc, 3, embedder)

    def test_selected_positions_disjoint(self, news_dataset, embedder):
        for doc in news_dataset.documents[:10]:
            lex = extract_lexical(doc, 5, embedder)
            seq = tokenize(doc.text)
            surfaces = seq.surfaces()
            seen = set()
            for group in lex.include:
                head_tokens = group.head.split(" ")
                placed = None
                for start in range(len(surfaces) - len(head_tokens) + 1):
                    if surfaces[start : start + len(head_tokens)] == head_tokens:
                        positions = set(range(start, start + len(head_tokens)))
                        if not positions & seen:
                            placed = positions
                            break
                assert placed is not None, f"{group.head!r} overlaps or missing"
                seen |= placed

    def test_qa_answer_sentence_appended_quoted(self, squad_dataset, embedder):
        doc = squad_dataset.by_id("qa0")
        lex = extract_lexical(doc, 2, embedder)
        last = lex.include[-1]
        assert last.quote
        assert "1912" in last.head
        assert last.head.endswith("1956.")


class TestExtractSyntactic:
    def test_single_sentence(self, tagger, conll_dataset):
        doc = conll_dataset.documents[0]
        constraint = extract_syntactic(doc, random.Random(0), tagger)
        assert constraint.source_sentence_index == 0
        assert constraint.tags[-1] == "PUNCT"

    def test_seeded_choice_replays(self, tagger, news_dataset):
        # oracle: replay the same RNG draw
        from coda.corpus import ClassificationPayload, Document

        doc = Document("d", "One here. Two there. Three everywhere.", ClassificationPayload("x"))
        for seed in range(10):
            constraint = extract_syntactic(doc, random.Random(seed), tagger)
            assert constraint.source_sentence_index == random.Random(seed).randrange(3)

    def test_tag_count_matches_sentence(self, tagger, news_dataset):
        doc = news_dataset.documents[0]
        constraint = extract_syntactic(doc, random.Random(1), tagger)
        sentence = split_sentences(doc.text)[constraint.source_sentence_index][0]
        assert len(constraint.tags) == len(tokenize(sentence))


class TestExtractSemantic:
    def test_exactly_three_candidates(self):
        from coda.corpus import ClassificationPayload, Dataset, Document, TaskKind

        docs = [Document(f"d{i}", f"text number {i}", ClassificationPayload("a")) for i in range(4)]
        ds = Dataset(TaskKind.CLASSIFICATION, tuple(docs), frozenset({"a"}))
        constraint = extract_semantic(docs[0], ds, random.Random(0))
        assert sorted(constraint.exemplars) == sorted(d.text for d in docs[1:])

    def test_own_text_never_included(self, news_dataset):
        doc = news_dataset.documents[0]
        for seed in range(30):
            constraint = extract_semantic(doc, news_dataset, random.Random(seed))
            assert doc.text not in constraint.exemplars
            assert len(constraint.exemplars) == 3

    def test_rare_label_falls_back(self):
        from coda.corpus import ClassificationPayload, Dataset, Document, TaskKind

        docs = [
            Document("d0", "only text a", ClassificationPayload("rare")),
            Document("d1", "only text b", ClassificationPayload("rare")),
            Document("d2", "unrelated", ClassificationPayload("common")),
        ]
        ds = Dataset(TaskKind.CLASSIFICATION, tuple(docs), frozenset({"rare", "common"}))
        constraint = extract_semantic(docs[0], ds, random.Random(0))
        assert constraint.exemplars == ("only text b",)


class TestExtractLength:
    def make_doc(self, words):
        from coda.corpus import ClassificationPayload, Document

        return Document("d", " ".join(["word"] * words), ClassificationPayload("x"))

    def test_paper_window(self):
        constraint = extract_length(self.make_doc(16), LengthStats(0.0, 3.0))
        assert (constraint.lower, constraint.upper) == (13, 19)

    def test_zero_sd(self):
        constraint = extract_length(self.make_doc(9), LengthStats(0.0, 0.0))
        assert (constraint.lower, constraint.upper) == (9, 9)

    def test_clamped_at_one(self):
        constraint = extract_length(self.make_doc(2), LengthStats(0.0, 5.0))
        assert (constraint.lower, constraint.upper) == (1, 7)

    def test_randomized_closed_form(self):
        # oracle: exact Fraction arithmetic with round-half-away-from-zero
        rng = random.Random(123)
        for _ in range(1000):
            words = rng.randrange(1, 400)
            sd = Fraction(rng.randrange(0, 4000), 8)  # exact in binary floats
            constraint = extract_length(self.make_doc(words), LengthStats(0.0, float(sd)))

            def round_half_away(x: Fraction) -> int:
                floor = x.numerator // x.denominator
                return floor + (1 if (x - floor) >= Fraction(1, 2) else 0) if x >= 0 else -round_half_away(-x)

            lower = max(1, round_half_away(words - sd))
            upper = max(lower, round_half_away(words + sd))
            assert (constraint.lower, constraint.upper) == (lower, upper)


class FakeSummarizer:
    backend_id = "fake"

    def generate(self, request):
        return GenerationResponse("A compact summary.", self.backend_id)


def make_context(dataset, embedder, tagger, **overrides):
    defaults = dict(
        dataset=dataset,
        stats=LengthStats(12.0, 3.0),
        embedder=embedder,
        tagger=tagger,
        backend=FakeSummarizer(),
        index=build_index(dataset, embedder),
        retrieval_k=2,
    )
    defaults.update(overrides)
    return ExtractionContext(**defaults)


class TestBuildConstraintSet:
    def test_classification_novel(self, news_dataset, embedder, tagger):
        ctx = make_context(news_dataset, embedder, tagger)
        doc = news_dataset.documents[0]
        cs = build_constraint_set(doc, "novel", ctx, random.Random(0))
        assert isinstance(cs.mode, Novel)
        assert cs.semantic is not None and cs.semantic.label == doc.payload.label
        assert cs.syntactic is None
        assert cs.entity_clauses == () and cs.answer_clause is None

    def test_rephrase_carries_description(self, news_dataset, embedder, tagger):
        ctx = make_context(news_dataset, embedder, tagger)
        cs = build_constraint_set(news_dataset.documents[0], "rephrase", ctx, random.Random(0))
        assert isinstance(cs.mode, Rephrase)
        assert cs.mode.description == "A compact summary."
        assert cs.mode.partner_id != news_dataset.documents[0].id

    def test_ner_entity_clauses(self, conll_dataset, embedder, tagger):
        ctx = make_context(conll_dataset, embedder, tagger, index=None)
        cs = build_constraint_set(conll_dataset.documents[0], "novel", ctx, random.Random(0))
        assert cs.entity_clauses == (("Israel", "LOC"), ("Arafat", "PER"), ("West Bank", "LOC"))
        assert cs.semantic is None

    def test_qa_answer_clause_full_sentence(self, squad_dataset, embedder, tagger):
        ctx = make_context(squad_dataset, embedder, tagger, index=None)
        doc = squad_dataset.by_id("qa1")
        cs = build_constraint_set(doc, "novel", ctx, random.Random(0))
        assert cs.answer_clause == "The collection now exceeds one million volumes."

    def test_identical_seeds_identical_sets(self, news_dataset, embedder, tagger):
        ctx = make_context(news_dataset, embedder, tagger)
        doc = news_dataset.documents[4]
        a = build_constraint_set(doc, "rephrase", ctx, random.Random(7), order_seed=7)
        b = build_constraint_set(doc, "rephrase", ctx, random.Random(7), order_seed=7)
        assert a == b

    def test_keyword_count_default(self):
        assert default_keyword_count(13) == 3
        assert default_keyword_count(40) == 6


class TestSerialization:
    def test_round_trip(self, news_dataset, embedder, tagger):
        ctx = make_context(news_dataset, embedder, tagger)
        for mode in ("novel", "rephrase"):
            cs = build_constraint_set(news_dataset.documents[2], mode, ctx, random.Random(3))
            assert constraint_set_from_dict(constraint_set_to_dict(cs)) == cs

    def test_include_exclude_disjoint_enforced(self):
        with pytest.raises(ValueError):
            LexicalConstraint(include=(KeywordGroup(("word",)),), exclude=("Word",))
