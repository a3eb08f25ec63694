"""Per-document constraint extraction.

Five constraint families are extracted from each source document:
required keywords ranked by embedding similarity, a part-of-speech
sequence from one sentence, the class label with exemplars, a token
length window derived from the corpus length spread, and negated
abstract concepts. A ConstraintSet bundles the families that apply to
the document's task together with the generation mode (novel, or
rephrase of a retrieved partner's one-sentence description).
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Union

import numpy as np

from .corpus import Dataset, Document, NerPayload, QaPayload, TaskKind
from .mining import ConceptTable, SimilarityIndex, abstract_description, sample_partner
from .textkit import (
    EmbeddingBackend,
    LengthStats,
    PosTagger,
    extract_ngrams,
    round_half_away,
    split_sentences,
    stopwords,
    tokenize,
)

if TYPE_CHECKING:
    from .backend import GenerationBackend

logger = logging.getLogger(__name__)

__all__ = [
    "KeywordGroup",
    "LexicalConstraint",
    "SyntacticConstraint",
    "SemanticConstraint",
    "LengthConstraint",
    "ConceptConstraint",
    "Novel",
    "Rephrase",
    "ConstraintSet",
    "SynonymIndex",
    "ExtractionContext",
    "default_keyword_count",
    "extract_lexical",
    "extract_syntactic",
    "extract_semantic",
    "extract_length",
    "extract_concept",
    "build_constraint_set",
    "constraint_set_to_dict",
    "constraint_set_from_dict",
]


@dataclass(frozen=True)
class KeywordGroup:
    alternatives: tuple[str, ...]
    quote: bool = False  # render alternatives wrapped in double quotes

    def __post_init__(self):
        if not self.alternatives or any(not a for a in self.alternatives):
            raise ValueError("keyword group alternatives must be non-empty")

    @property
    def head(self) -> str:
        return self.alternatives[0]


@dataclass(frozen=True)
class LexicalConstraint:
    include: tuple[KeywordGroup, ...]
    exclude: tuple[str, ...] = ()

    def __post_init__(self):
        included = {a.casefold() for g in self.include for a in g.alternatives}
        clash = included & {e.casefold() for e in self.exclude}
        if clash:
            raise ValueError(f"keywords both required and excluded: {sorted(clash)}")


@dataclass(frozen=True)
class SyntacticConstraint:
    tags: tuple[str, ...]
    source_sentence_index: int

    def __post_init__(self):
        if not self.tags:
            raise ValueError("empty part-of-speech sequence")


@dataclass(frozen=True)
class SemanticConstraint:
    label: str
    exemplars: tuple[str, ...] = ()
    exemplar_order_seed: int = 0


@dataclass(frozen=True)
class LengthConstraint:
    lower: int
    upper: int

    def __post_init__(self):
        if not (1 <= self.lower <= self.upper):
            raise ValueError(f"bad length window [{self.lower}, {self.upper}]")


@dataclass(frozen=True)
class ConceptConstraint:
    negated_concepts: tuple[str, ...] = ()


@dataclass(frozen=True)
class Novel:
    kind: str = field(default="novel", init=False)


@dataclass(frozen=True)
class Rephrase:
    description: str
    partner_id: str
    kind: str = field(default="rephrase", init=False)


Mode = Union[Novel, Rephrase]


@dataclass(frozen=True)
class ConstraintSet:
    source_id: str
    mode: Mode
    lexical: LexicalConstraint
    length: LengthConstraint
    semantic: SemanticConstraint | None = None
    syntactic: SyntacticConstraint | None = None
    concept: ConceptConstraint | None = None
    entity_clauses: tuple[tuple[str, str], ...] = ()
    answer_clause: str | None = None


def default_keyword_count(words: int) -> int:
    return max(3, math.ceil(0.15 * words))


@dataclass(frozen=True)
class SynonymIndex:
    """Vocabulary unigrams with embeddings and isolated POS tags, used
    for optional keyword synonym expansion."""

    words: tuple[str, ...]
    matrix: np.ndarray  # unit rows aligned with `words`
    tags: tuple[str, ...]

    @classmethod
    def build(cls, dataset: Dataset, embedder: EmbeddingBackend, tagger: PosTagger) -> "SynonymIndex":
        sw = stopwords()
        vocab: set[str] = set()
        for doc in dataset:
            for token in tokenize(doc.text).tokens:
                folded = token.surface.casefold()
                if not token.is_punct and folded not in sw:
                    vocab.add(folded)
        words = tuple(sorted(vocab))
        matrix = embedder.embed(list(words)) if words else np.zeros((0, getattr(embedder, "dimension", 0)))
        norms = np.linalg.norm(matrix, axis=1, keepdims=True) if len(words) else matrix
        if len(words):
            norms[norms == 0] = 1.0
            matrix = matrix / norms
        tags = tuple(str(tagger.tag(tokenize(w)).tags[0]) for w in words)
        return cls(words=words, matrix=matrix, tags=tags)

    def nearest(self, word: str, embedder: EmbeddingBackend, tagger: PosTagger) -> str | None:
        folded = word.casefold()
        tag = tagger.tag(tokenize(word)).tags[0]
        vec = embedder.embed([word])[0]
        norm = np.linalg.norm(vec)
        if norm == 0:
            return None
        sims = self.matrix @ (vec / norm)
        best, best_sim = None, 0.0
        for i, candidate in enumerate(self.words):
            if candidate == folded or self.tags[i] != tag:
                continue
            if sims[i] > best_sim:
                best, best_sim = candidate, float(sims[i])
        return best


def _char_ranges(tokens: tuple[str, ...]) -> list[tuple[int, int]]:
    # payload tokens are joined with single spaces to form the text
    ranges = []
    pos = 0
    for tok in tokens:
        ranges.append((pos, pos + len(tok)))
        pos += len(tok) + 1
    return ranges


def extract_lexical(
    doc: Document,
    k: int,
    embedder: EmbeddingBackend,
    synonym_index: SynonymIndex | None = None,
    tagger: PosTagger | None = None,
) -> LexicalConstraint:
    """Top-k keywords by cosine(E(ngram), E(document)).

    Candidates are all 1-3 grams; selection is greedy by descending
    score (ties: earlier start, then shorter n-gram), skipping any
    candidate that shares a token position with an already-selected one
    or repeats a chosen surface case-insensitively. Entity spans (NER)
    are prepended and the answer-bearing sentence (QA) is appended as
    mandatory groups that do not count against k; their token positions
    are blocked for scored candidates.
    """
    seq = tokenize(doc.text)
    blocked: set[int] = set()
    mandatory_first: list[KeywordGroup] = []
    mandatory_last: list[KeywordGroup] = []

    def block_chars(lo: int, hi: int):
        for i, token in enumerate(seq.tokens):
            if lo <= token.offset < hi:
                blocked.add(i)

    if isinstance(doc.payload, NerPayload):
        ranges = _char_ranges(doc.payload.tokens)
        for span in doc.payload.spans:
            surface = doc.payload.span_surface(span)
            mandatory_first.append(KeywordGroup((surface,)))
            block_chars(ranges[span.start_token][0], ranges[span.end_token - 1][1])
    elif isinstance(doc.payload, QaPayload):
        sentence = answer_sentence(doc)
        offset = doc.text.index(sentence)
        mandatory_last.append(KeywordGroup((sentence,), quote=True))
        block_chars(offset, offset + len(sentence))

    ngrams = extract_ngrams(seq)
    vectors = embedder.embed([doc.text] + [ng.surface for ng in ngrams])
    doc_vec = vectors[0]
    doc_norm = np.linalg.norm(doc_vec)
    scores: list[tuple[float, int, int, int]] = []  # (-score, start, n, index)
    for idx, ng in enumerate(ngrams):
        vec = vectors[idx + 1]
        denom = doc_norm * np.linalg.norm(vec)
        score = float(np.dot(vec, doc_vec) / denom) if denom else 0.0
        scores.append((-score, ng.start, ng.n, idx))
    scores.sort()

    chosen_surfaces = {g.head.casefold() for g in mandatory_first + mandatory_last}
    used = set(blocked)
    selected: list[KeywordGroup] = []
    for _, start, n, idx in scores:
        if len(selected) == k:
            break
        ng = ngrams[idx]
        if any(p in used for p in ng.positions()):
            continue
        if ng.surface.casefold() in chosen_surfaces:
            continue
        alternatives = [ng.surface]
        if synonym_index is not None and tagger is not None and ng.n == 1:
            synonym = synonym_index.nearest(ng.surface, embedder=embedder, tagger=tagger)
            if synonym:
                alternatives.append(synonym)
        selected.append(KeywordGroup(tuple(alternatives)))
        used.update(ng.positions())
        chosen_surfaces.add(ng.surface.casefold())
    return LexicalConstraint(include=tuple(mandatory_first + selected + mandatory_last))


def extract_syntactic(doc: Document, rng: random.Random, tagger: PosTagger) -> SyntacticConstraint:
    """POS tags of one uniformly chosen sentence."""
    sentences = split_sentences(doc.text)
    if not sentences:
        sentences = [(doc.text, 0)]
    idx = rng.randrange(len(sentences))
    tags = tagger.tag(tokenize(sentences[idx][0])).tags
    return SyntacticConstraint(tags=tags, source_sentence_index=idx)


def extract_semantic(
    doc: Document, dataset: Dataset, rng: random.Random, order_seed: int = 0, exemplar_count: int = 3
) -> SemanticConstraint:
    """The document's label plus exemplar texts sharing it, in seeded
    random order. Falls back to fewer exemplars when the label is rare."""
    label = doc.payload.label
    eligible = [d for d in dataset if d.id != doc.id and d.payload.label == label and d.text != doc.text]
    if len(eligible) >= exemplar_count:
        picked = rng.sample(eligible, exemplar_count)
    else:
        picked = list(eligible)
        logger.info("label %r has only %d exemplar candidates for %s", label, len(picked), doc.id)
    return SemanticConstraint(label=label, exemplars=tuple(d.text for d in picked), exemplar_order_seed=order_seed)


def extract_length(doc: Document, stats: LengthStats) -> LengthConstraint:
    """Window of source word count +/- the corpus standard deviation,
    rounded half away from zero and floored at one."""
    words = tokenize(doc.text).word_count
    lower = max(1, round_half_away(words - stats.sd))
    upper = max(lower, round_half_away(words + stats.sd))
    return LengthConstraint(lower=lower, upper=upper)


def extract_concept(label: str, table: ConceptTable) -> ConceptConstraint:
    return ConceptConstraint(negated_concepts=table.get(label))


def answer_sentence(doc: Document) -> str:
    """The full sentence containing the gold answer span."""
    payload = doc.payload
    for sentence, offset in split_sentences(doc.text):
        if offset <= payload.answer_start < offset + len(sentence):
            return sentence
    return doc.text


@dataclass
class ExtractionContext:
    """Everything constraint extraction needs beyond the document itself."""

    dataset: Dataset
    stats: LengthStats
    embedder: EmbeddingBackend
    tagger: PosTagger
    backend: "GenerationBackend | None" = None
    index: SimilarityIndex | None = None
    concept_table: ConceptTable | None = None
    spurious_by_label: dict[str, list[str]] = field(default_factory=dict)
    k_keywords: int | None = None  # None -> max(3, ceil(0.15 * words))
    retrieval_k: int = 5
    exemplar_count: int = 3
    enable_syntactic: bool = False
    enable_concept: bool = True
    enable_synonyms: bool = False
    enable_exclusions: bool = False
    enable_exemplars: bool = True
    synonym_index: SynonymIndex | None = None

    def keyword_count(self, doc: Document) -> int:
        if self.k_keywords is not None:
            return self.k_keywords
        return default_keyword_count(tokenize(doc.text).word_count)


def _exclusions(ctx: ExtractionContext, label: str, lexical: LexicalConstraint) -> tuple[str, ...]:
    included = {a.casefold() for g in lexical.include for a in g.alternatives}
    picked = []
    for phrase in ctx.spurious_by_label.get(label, []):
        if phrase.casefold() not in included:
            picked.append(phrase)
        if len(picked) == 3:
            break
    return tuple(picked)


def build_constraint_set(
    doc: Document,
    mode_kind: str,
    ctx: ExtractionContext,
    rng: random.Random,
    order_seed: int = 0,
) -> ConstraintSet:
    """Assemble the task-appropriate ConstraintSet for one generation slot.

    Draw order on `rng` is fixed (syntactic sentence, exemplars, rephrase
    partner) so identical streams give identical sets.
    """
    task = ctx.dataset.task
    syntactic = extract_syntactic(doc, rng, ctx.tagger) if ctx.enable_syntactic else None

    semantic = None
    concept = None
    entity_clauses: tuple[tuple[str, str], ...] = ()
    answer_clause = None
    if task is TaskKind.CLASSIFICATION:
        semantic = extract_semantic(doc, ctx.dataset, rng, order_seed=order_seed, exemplar_count=ctx.exemplar_count)
        if not ctx.enable_exemplars:
            semantic = SemanticConstraint(label=semantic.label, exemplars=(), exemplar_order_seed=order_seed)
        if ctx.enable_concept and ctx.concept_table is not None:
            concept = extract_concept(semantic.label, ctx.concept_table)
    elif task is TaskKind.NER:
        entity_clauses = tuple(
            (doc.payload.span_surface(span), span.entity_type) for span in doc.payload.spans
        )
    else:
        answer_clause = answer_sentence(doc)

    lexical = extract_lexical(
        doc,
        ctx.keyword_count(doc),
        ctx.embedder,
        synonym_index=ctx.synonym_index if ctx.enable_synonyms else None,
        tagger=ctx.tagger if ctx.enable_synonyms else None,
    )
    if ctx.enable_exclusions and task is TaskKind.CLASSIFICATION and semantic is not None:
        exclude = _exclusions(ctx, semantic.label, lexical)
        if exclude:
            lexical = LexicalConstraint(include=lexical.include, exclude=exclude)

    length = extract_length(doc, ctx.stats)

    if mode_kind == "novel":
        mode: Mode = Novel()
    else:
        if ctx.index is None or ctx.backend is None:
            raise ValueError("rephrase slots need a similarity index and a generation backend")
        partner_id = sample_partner(ctx.index, doc, ctx.retrieval_k, rng)
        partner = ctx.dataset.by_id(partner_id)
        mode = Rephrase(description=abstract_description(partner, ctx.backend), partner_id=partner_id)

    return ConstraintSet(
        source_id=doc.id,
        mode=mode,
        lexical=lexical,
        length=length,
        semantic=semantic,
        syntactic=syntactic,
        concept=concept,
        entity_clauses=entity_clauses,
        answer_clause=answer_clause,
    )


# ---------------------------------------------------------------------------
# serialization (constraints.jsonl rows and stored fixtures)


def constraint_set_to_dict(cs: ConstraintSet) -> dict:
    mode: dict = {"kind": cs.mode.kind}
    if isinstance(cs.mode, Rephrase):
        mode["description"] = cs.mode.description
        mode["partner_id"] = cs.mode.partner_id
    return {
        "source_id": cs.source_id,
        "mode": mode,
        "lexical": {
            "include": [{"alternatives": list(g.alternatives), "quote": g.quote} for g in cs.lexical.include],
            "exclude": list(cs.lexical.exclude),
        },
        "length": {"lower": cs.length.lower, "upper": cs.length.upper},
        "semantic": None
        if cs.semantic is None
        else {
            "label": cs.semantic.label,
            "exemplars": list(cs.semantic.exemplars),
            "exemplar_order_seed": cs.semantic.exemplar_order_seed,
        },
        "syntactic": None
        if cs.syntactic is None
        else {"tags": list(cs.syntactic.tags), "source_sentence_index": cs.syntactic.source_sentence_index},
        "concept": None if cs.concept is None else {"negated_concepts": list(cs.concept.negated_concepts)},
        "entity_clauses": [[surface, etype] for surface, etype in cs.entity_clauses],
        "answer_clause": cs.answer_clause,
    }


def constraint_set_from_dict(payload: dict) -> ConstraintSet:
    mode_payload = payload["mode"]
    mode: Mode
    if mode_payload["kind"] == "novel":
        mode = Novel()
    else:
        mode = Rephrase(description=mode_payload["description"], partner_id=mode_payload["partner_id"])
    lex = payload["lexical"]
    semantic = payload.get("semantic")
    syntactic = payload.get("syntactic")
    concept = payload.get("concept")
    return ConstraintSet(
        source_id=payload["source_id"],
        mode=mode,
        lexical=LexicalConstraint(
            include=tuple(KeywordGroup(tuple(g["alternatives"]), g.get("quote", False)) for g in lex["include"]),
            exclude=tuple(lex.get("exclude", ())),
        ),
        length=LengthConstraint(payload["length"]["lower"], payload["length"]["upper"]),
        semantic=None
        if semantic is None
        else SemanticConstraint(
            label=semantic["label"],
            exemplars=tuple(semantic.get("exemplars", ())),
            exemplar_order_seed=semantic.get("exemplar_order_seed", 0),
        ),
        syntactic=None
        if syntactic is None
        else SyntacticConstraint(tuple(syntactic["tags"]), syntactic.get("source_sentence_index", 0)),
        concept=None if concept is None else ConceptConstraint(tuple(concept.get("negated_concepts", ()))),
        entity_clauses=tuple((s, t) for s, t in payload.get("entity_clauses", ())),
        answer_clause=payload.get("answer_clause"),
    )
