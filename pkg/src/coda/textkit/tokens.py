"""Deterministic text primitives: tokenization, sentence splitting,
n-gram enumeration, stopwords, and corpus length statistics.

Everything here is pure and offline so that downstream extraction and
validation are exactly reproducible.
"""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Iterator

__all__ = [
    "Token",
    "TokenSequence",
    "NGram",
    "LengthStats",
    "tokenize",
    "word_count",
    "split_sentences",
    "extract_ngrams",
    "stopwords",
    "is_punctuation",
    "length_stats",
    "round_half_away",
]


def _is_punct_char(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def is_punctuation(surface: str) -> bool:
    """True when the surface consists solely of punctuation characters."""
    return bool(surface) and all(_is_punct_char(c) for c in surface)


@dataclass(frozen=True)
class Token:
    surface: str
    offset: int

    @property
    def is_punct(self) -> bool:
        return is_punctuation(self.surface)


@dataclass(frozen=True)
class TokenSequence:
    text: str
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)

    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    @property
    def word_count(self) -> int:
        """Number of tokens that are not standalone punctuation."""
        return sum(1 for t in self.tokens if not t.is_punct)


def _split_chunk(chunk: str, offset: int) -> list[Token]:
    # Peel leading/trailing punctuation characters into their own tokens.
    # Trailing periods stay attached when the chunk has an internal
    # period, so abbreviations like "U.S." survive while "minute."
    # and "wait..." split.
    lead: list[Token] = []
    while len(chunk) > 1 and _is_punct_char(chunk[0]):
        lead.append(Token(chunk[0], offset))
        offset += 1
        chunk = chunk[1:]
    trail: list[Token] = []
    while len(chunk) > 1 and _is_punct_char(chunk[-1]):
        if chunk[-1] == "." and "." in chunk.rstrip("."):
            break
        trail.append(Token(chunk[-1], offset + len(chunk) - 1))
        chunk = chunk[:-1]
    return lead + [Token(chunk, offset)] + list(reversed(trail))


def tokenize(text: str) -> TokenSequence:
    """Split on Unicode whitespace, then peel punctuation off chunk edges.

    Offsets index into the original text, so surfaces placed back at
    their offsets reconstruct it exactly.
    """
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        tokens.extend(_split_chunk(text[i:j], i))
        i = j
    return TokenSequence(text, tuple(tokens))


def word_count(text: str) -> int:
    return tokenize(text).word_count


_TERMINALS = ".!?"


def split_sentences(text: str) -> list[tuple[str, int]]:
    """Split into (sentence, char offset) pairs.

    A sentence ends at '.', '!' or '?' when followed by whitespace or the
    end of the text. Whitespace between sentences is not part of either.
    """
    sentences: list[tuple[str, int]] = []
    start = 0
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in _TERMINALS and (i + 1 == n or text[i + 1].isspace()):
            piece = text[start : i + 1].strip()
            if piece:
                sentences.append((piece, start + text[start : i + 1].index(piece[0])))
            start = i + 1
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append((tail, start + text[start:].index(tail[0])))
    return sentences


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    """The bundled English function-word list, casefolded."""
    raw = resources.files("coda.textkit.data").joinpath("stopwords.txt").read_text("utf-8")
    words = set()
    for line in raw.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.casefold())
    return frozenset(words)


@dataclass(frozen=True)
class NGram:
    tokens: tuple[str, ...]
    start: int

    @property
    def n(self) -> int:
        return len(self.tokens)

    @property
    def surface(self) -> str:
        return " ".join(self.tokens)

    def positions(self) -> range:
        return range(self.start, self.start + self.n)


def extract_ngrams(seq: TokenSequence, max_n: int = 3) -> list[NGram]:
    """All contiguous 1..max_n-grams containing no standalone-punctuation
    token and at least one non-stopword, ordered by (n, start)."""
    sw = stopwords()
    surfaces = seq.surfaces()
    puncts = [t.is_punct for t in seq.tokens]
    out: list[NGram] = []
    for n in range(1, max_n + 1):
        for start in range(0, len(surfaces) - n + 1):
            window = surfaces[start : start + n]
            if any(puncts[start : start + n]):
                continue
            if all(w.casefold() in sw for w in window):
                continue
            out.append(NGram(tuple(window), start))
    return out


@dataclass(frozen=True)
class LengthStats:
    mean: float
    sd: float


def length_stats(documents: Iterable) -> LengthStats:
    """Mean and population standard deviation of per-document word counts.

    Accepts anything with a .text attribute, or plain strings.
    """
    counts = [word_count(getattr(d, "text", d)) for d in documents]
    if not counts:
        raise ValueError("length_stats requires at least one document")
    mean = sum(counts) / len(counts)
    var = sum((c - mean) ** 2 for c in counts) / len(counts)
    return LengthStats(mean=mean, sd=math.sqrt(var))


def round_half_away(x: float) -> int:
    """Round to the nearest integer, halves away from zero."""
    if x >= 0:
        return int(math.floor(x + 0.5))
    return int(math.ceil(x - 0.5))
