"""Corpus-level generation quality: perplexity under a pluggable
language-model scorer, token diversity, and length diversity.

The built-in scorer is an additively smoothed word n-gram model so the
whole metric stack runs offline and deterministically; a remote scoring
endpoint (POST /score) can stand in when available.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import requests

from .errors import GroupSizeMismatch, ScorerUnavailable
from .textkit import tokenize, word_count

__all__ = [
    "LmScorer",
    "NGramScorer",
    "RemoteScorer",
    "QualityReport",
    "lm_tokens",
    "perplexity",
    "diversity",
    "length_diversity",
]


def lm_tokens(text: str) -> list[str]:
    """Casefolded word tokens; standalone punctuation excluded."""
    return [t.surface.casefold() for t in tokenize(text).tokens if not t.is_punct]


class LmScorer(Protocol):
    def score(self, text: str) -> tuple[float, int]:
        """(sum of token log-likelihoods, token count) for one text."""


BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"


class NGramScorer:
    """Additively smoothed word n-gram model.

    Texts of order >= 2 are padded with (order - 1) BOS tokens and one
    EOS token; EOS is scored, BOS never is. The unigram model does no
    padding at all, so a model trained on a corpus where every type
    occurs equally often (and alpha = 0) assigns every known token
    probability 1/V, making its perplexity exactly the vocabulary size.
    Out-of-vocabulary tokens map to UNK.
    """

    def __init__(self, order: int = 3, alpha: float = 0.1):
        if order < 1:
            raise ValueError("order must be >= 1")
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.order = order
        self.alpha = alpha
        self.ngram_counts: Counter[tuple[str, ...]] = Counter()
        self.context_counts: Counter[tuple[str, ...]] = Counter()
        self.vocab: set[str] = set()
        self._fitted = False

    def _padded(self, tokens: list[str]) -> list[str]:
        if self.order == 1:
            return tokens
        return [BOS] * (self.order - 1) + tokens + [EOS]

    def fit(self, texts: Iterable[str]) -> "NGramScorer":
        for text in texts:
            tokens = lm_tokens(text)
            self.vocab.update(tokens)
            padded = self._padded(tokens)
            for i in range(self.order - 1, len(padded)):
                ngram = tuple(padded[i - self.order + 1 : i + 1])
                self.ngram_counts[ngram] += 1
                self.context_counts[ngram[:-1]] += 1
        self._fitted = True
        return self

    @property
    def prediction_vocab_size(self) -> int:
        # every training type plus UNK, plus EOS when padding is in play
        return len(self.vocab) + 1 + (1 if self.order > 1 else 0)

    def _map(self, token: str) -> str:
        return token if token in self.vocab else UNK

    def score(self, text: str) -> tuple[float, int]:
        if not self._fitted:
            raise ScorerUnavailable("scorer has not been fitted")
        tokens = [self._map(t) for t in lm_tokens(text)]
        padded = self._padded(tokens)
        v = self.prediction_vocab_size
        total = 0.0
        count = 0
        for i in range(self.order - 1, len(padded)):
            ngram = tuple(padded[i - self.order + 1 : i + 1])
            numer = self.ngram_counts[ngram] + self.alpha
            denom = self.context_counts[ngram[:-1]] + self.alpha * v
            if numer == 0 or denom == 0:
                total = -math.inf
            else:
                total += math.log(numer / denom)
            count += 1
        return total, count


class RemoteScorer:
    """Client for a scoring service: POST {url}/score {"texts": [...]}
    returning {"logprobs": [...], "token_counts": [...]}."""

    def __init__(self, url: str, timeout: float = 30.0, session: requests.Session | None = None):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()

    def score(self, text: str) -> tuple[float, int]:
        try:
            resp = self.session.post(f"{self.url}/score", json={"texts": [text]}, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ScorerUnavailable(f"scoring service unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ScorerUnavailable(f"scoring service HTTP {resp.status_code}")
        payload = resp.json()
        try:
            return float(payload["logprobs"][0]), int(payload["token_counts"][0])
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ScorerUnavailable(f"malformed scoring reply: {payload!r}") from exc


def perplexity(texts: Sequence[str], scorer: LmScorer) -> float:
    """exp(-mean per-token log-likelihood) pooled over all texts."""
    total_lp = 0.0
    total_tokens = 0
    for text in texts:
        lp, n = scorer.score(text)
        total_lp += lp
        total_tokens += n
    if total_tokens == 0:
        raise ScorerUnavailable("no scorable tokens in the given texts")
    return math.exp(-total_lp / total_tokens)


def _token_types(text: str) -> set[str]:
    return set(lm_tokens(text))


def _check_groups(sources: Sequence, augmentations: Mapping[str, Sequence[str]]) -> int:
    sizes = {len(augmentations.get(doc.id, ())) for doc in sources}
    if len(sizes) != 1:
        raise GroupSizeMismatch(f"augmentation group sizes differ: {sorted(sizes)}")
    return sizes.pop()


def diversity(sources: Sequence, augmentations: Mapping[str, Sequence[str]]) -> float:
    """Mean, over sources, of the number of token types its augmentations
    introduce that the source does not contain."""
    _check_groups(sources, augmentations)
    new_counts = []
    for doc in sources:
        source_types = _token_types(doc.text)
        aug_types: set[str] = set()
        for aug in augmentations[doc.id]:
            aug_types |= _token_types(aug)
        new_counts.append(len(aug_types - source_types))
    return sum(new_counts) / len(new_counts)


def length_diversity(sources: Sequence, augmentations: Mapping[str, Sequence[str]]) -> float:
    """Mean absolute word-count difference over all (source, augmentation) pairs."""
    r = _check_groups(sources, augmentations)
    if r == 0:
        return 0.0
    diffs = []
    for doc in sources:
        source_words = word_count(doc.text)
        diffs.extend(abs(word_count(aug) - source_words) for aug in augmentations[doc.id])
    return sum(diffs) / len(diffs)


@dataclass(frozen=True)
class QualityReport:
    perplexity: float
    diversity: float
    length_diversity: float
    augmentations_per_source: int

    def to_json(self) -> dict:
        return {
            "Perplexity": self.perplexity,
            "Diversity": self.diversity,
            "length_diversity": self.length_diversity,
            "augmentations_per_source": self.augmentations_per_source,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True), "utf-8")
