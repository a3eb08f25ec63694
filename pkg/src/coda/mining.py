"""Corpus-level artifacts computed once per dataset before extraction:
label-associated (spurious) phrases, abstract concepts distilled from
them, a cosine similarity index for rephrase-partner retrieval, and
one-sentence abstract descriptions of documents.
"""

from __future__ import annotations

import json
import logging
import math
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .corpus import Dataset, Document, TaskKind
from .errors import ConceptParseError, EmptyReply, InsufficientData
from .textkit import EmbeddingBackend, LengthStats, extract_ngrams, split_sentences, tokenize

if TYPE_CHECKING:
    from .backend import GenerationBackend

logger = logging.getLogger(__name__)

__all__ = [
    "PhraseLabelScore",
    "ConceptTable",
    "SimilarityIndex",
    "AnalysisArtifacts",
    "spurious_phrases",
    "abstract_concepts",
    "build_index",
    "sample_partner",
    "abstract_description",
    "SUMMARY_PROMPT",
    "CONCEPT_PROMPT",
]

SUMMARY_PROMPT = "Summarize the following document in one short and concise sentence: {text}"
CONCEPT_PROMPT = (
    "These phrases appear in documents labeled {label}: {phrases}. "
    "Example sentences: {examples}. "
    "Return a short abstract concept (at most 8 words) that these phrases describe."
)


@dataclass(frozen=True)
class PhraseLabelScore:
    phrase: str
    label: str
    score: float
    support: int


def spurious_phrases(dataset: Dataset, min_support: int = 5, top_n: int = 10) -> list[PhraseLabelScore]:
    """Per label, the top_n 1-3 grams by PMI(phrase, label) * log(1 + support).

    Counts are document-level: a phrase counts once per document that
    contains it, casefolded. Only classification datasets carry label
    structure; other tasks return an empty list. Ties break
    lexicographically so the result is independent of document order.
    """
    if dataset.task is not TaskKind.CLASSIFICATION:
        return []
    df: Counter[str] = Counter()
    df_label: Counter[tuple[str, str]] = Counter()
    label_count: Counter[str] = Counter()
    n_docs = len(dataset)
    for doc in dataset:
        label = doc.payload.label
        label_count[label] += 1
        phrases = {ng.surface.casefold() for ng in extract_ngrams(tokenize(doc.text))}
        for phrase in phrases:
            df[phrase] += 1
            df_label[(phrase, label)] += 1

    per_label: dict[str, list[PhraseLabelScore]] = {}
    for (phrase, label), support in df_label.items():
        if support < min_support:
            continue
        pmi = math.log((support / n_docs) / ((df[phrase] / n_docs) * (label_count[label] / n_docs)))
        score = pmi * math.log(1 + support)
        per_label.setdefault(label, []).append(PhraseLabelScore(phrase, label, score, support))

    out: list[PhraseLabelScore] = []
    for label in sorted(per_label):
        ranked = sorted(per_label[label], key=lambda p: (-p.score, p.phrase))
        out.extend(ranked[:top_n])
    return out


@dataclass(frozen=True)
class ConceptTable:
    concepts: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        for label, items in self.concepts.items():
            if len(items) > 3:
                raise ValueError(f"label {label!r} carries more than 3 concepts")
            for concept in items:
                if not concept or "\n" in concept or len(concept.split()) > 8:
                    raise ValueError(f"bad concept {concept!r} for label {label!r}")

    def get(self, label: str) -> tuple[str, ...]:
        return tuple(self.concepts.get(label, ()))


def _parse_concept_reply(reply: str) -> str:
    for line in reply.splitlines():
        line = line.strip().strip('"').strip("'").rstrip(".!?").strip()
        if line:
            return " ".join(line.split()[:8])
    raise ConceptParseError(f"no concept line in reply {reply!r}")


def _example_sentences(dataset: Dataset, label: str, phrase: str, limit: int = 3) -> list[str]:
    found: list[str] = []
    needle = phrase.casefold()
    for doc in dataset:
        if doc.payload.label != label:
            continue
        for sentence, _ in split_sentences(doc.text):
            if needle in sentence.casefold():
                found.append(sentence)
                if len(found) == limit:
                    return found
    return found


def abstract_concepts(
    phrases: Sequence[PhraseLabelScore],
    dataset: Dataset,
    backend: "GenerationBackend",
    per_label: int = 3,
) -> ConceptTable:
    """Distill each label's spurious phrases into short abstract concepts.

    One backend call per phrase (with up to 3 example sentences that
    contain it); the first non-empty reply line, capped at 8 words, is
    the concept. Unparseable replies are skipped and logged. Keeps the
    first `per_label` distinct concepts in phrase-score order.
    """
    from .backend import GenerationRequest, SamplingParams

    table: dict[str, tuple[str, ...]] = {}
    by_label: dict[str, list[PhraseLabelScore]] = {}
    for item in phrases:
        by_label.setdefault(item.label, []).append(item)
    for label in sorted(by_label):
        kept: list[str] = []
        for item in by_label[label]:
            if len(kept) == per_label:
                break
            examples = _example_sentences(dataset, label, item.phrase)
            prompt = CONCEPT_PROMPT.format(label=label, phrases=item.phrase, examples=" ".join(examples))
            response = backend.generate(GenerationRequest(prompt, SamplingParams(max_tokens=32)))
            try:
                concept = _parse_concept_reply(response.text)
            except ConceptParseError as exc:
                logger.warning("skipping concept for %r under %r: %s", item.phrase, label, exc)
                continue
            if concept.casefold() not in {c.casefold() for c in kept}:
                kept.append(concept)
        if kept:
            table[label] = tuple(kept)
    return ConceptTable(table)


@dataclass(frozen=True)
class SimilarityIndex:
    ids: tuple[str, ...]
    matrix: np.ndarray  # unit-normalized rows, one per document

    def position(self, doc_id: str) -> int:
        try:
            return self.ids.index(doc_id)
        except ValueError:
            raise KeyError(doc_id) from None

    def similarities(self, doc_id: str) -> np.ndarray:
        return self.matrix @ self.matrix[self.position(doc_id)]


def build_index(dataset: Dataset, embedder: EmbeddingBackend) -> SimilarityIndex:
    matrix = embedder.embed([doc.text for doc in dataset])
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return SimilarityIndex(ids=tuple(doc.id for doc in dataset), matrix=matrix / norms)


def sample_partner(index: SimilarityIndex, doc: Document, k: int, rng: random.Random) -> str:
    """Uniform draw from the union of the k most- and k least-similar
    other documents. Returns the partner's id."""
    pos = index.position(doc.id)
    sims = index.similarities(doc.id)
    others = [(i, float(sims[i])) for i in range(len(index.ids)) if i != pos]
    if len(others) < 2 * k:
        raise InsufficientData(f"need at least {2 * k + 1} documents for k={k}, have {len(index.ids)}")
    ranked = sorted(others, key=lambda pair: (-pair[1], pair[0]))
    pool = ranked[:k] + ranked[-k:]
    return index.ids[pool[rng.randrange(len(pool))][0]]


def abstract_description(doc: Document, backend: "GenerationBackend") -> str:
    """One-sentence summary of `doc`, quoted verbatim into rephrase prompts."""
    from .backend import GenerationRequest, SamplingParams

    response = backend.generate(GenerationRequest(SUMMARY_PROMPT.format(text=doc.text), SamplingParams(max_tokens=64)))
    for line in response.text.splitlines():
        line = line.strip()
        if line:
            return line
    raise EmptyReply(f"summary backend returned no usable text for {doc.id!r}")


@dataclass(frozen=True)
class AnalysisArtifacts:
    concepts: ConceptTable
    spurious: tuple[PhraseLabelScore, ...]
    length_stats: LengthStats

    def to_json(self) -> dict:
        return {
            "concepts": {label: list(items) for label, items in sorted(self.concepts.concepts.items())},
            "spurious": [
                {"phrase": p.phrase, "label": p.label, "score": p.score, "support": p.support}
                for p in self.spurious
            ],
            "length_stats": {"mean": self.length_stats.mean, "sd": self.length_stats.sd},
        }

    @classmethod
    def from_json(cls, payload: dict) -> "AnalysisArtifacts":
        return cls(
            concepts=ConceptTable({label: tuple(items) for label, items in payload["concepts"].items()}),
            spurious=tuple(
                PhraseLabelScore(p["phrase"], p["label"], p["score"], p["support"])
                for p in payload["spurious"]
            ),
            length_stats=LengthStats(payload["length_stats"]["mean"], payload["length_stats"]["sd"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True, ensure_ascii=False), "utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "AnalysisArtifacts":
        return cls.from_json(json.loads(Path(path).read_text("utf-8")))
