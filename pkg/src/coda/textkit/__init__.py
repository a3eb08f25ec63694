"""Deterministic text primitives shared across the pipeline."""

from .embeddings import EmbeddingBackend, HashedTfidfEmbedder, RemoteEmbedder, cosine
from .pos import UPOS_TAGS, PosSequence, PosTagger, RuleBasedTagger
from .tokens import (
    LengthStats,
    NGram,
    Token,
    TokenSequence,
    extract_ngrams,
    is_punctuation,
    length_stats,
    round_half_away,
    split_sentences,
    stopwords,
    tokenize,
    word_count,
)

__all__ = [
    "EmbeddingBackend",
    "HashedTfidfEmbedder",
    "RemoteEmbedder",
    "cosine",
    "UPOS_TAGS",
    "PosSequence",
    "PosTagger",
    "RuleBasedTagger",
    "LengthStats",
    "NGram",
    "Token",
    "TokenSequence",
    "extract_ngrams",
    "is_punctuation",
    "length_stats",
    "round_half_away",
    "split_sentences",
    "stopwords",
    "tokenize",
    "word_count",
]
