"""Text embedding access.

Two interchangeable backends: a fully offline hashed TF-IDF embedder
(deterministic, used by tests and as the default), and a client for a
remote embedding service speaking POST /embed.
"""

from __future__ import annotations

import hashlib
import math
from typing import Iterable, Protocol, Sequence

import numpy as np
import requests

from ..errors import BackendUnavailable, DimensionMismatch
from .tokens import tokenize

__all__ = [
    "EmbeddingBackend",
    "HashedTfidfEmbedder",
    "RemoteEmbedder",
    "cosine",
]


class EmbeddingBackend(Protocol):
    dimension: int

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """One row per input text, order preserved."""


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def _bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


class HashedTfidfEmbedder:
    """Hashed bag-of-words with TF-IDF weights, L2-normalized.

    Tokens are casefolded word tokens (standalone punctuation dropped),
    hashed into a fixed number of buckets. IDF weights come from
    `fit`; before fitting every token weighs 1.0, so the embedder is
    usable standalone. A text with no word tokens falls back to hashing
    its stripped raw form, keeping non-empty inputs at non-zero norm.
    """

    def __init__(self, dimension: int = 256):
        self.dimension = dimension
        self._idf: dict[str, float] = {}
        self._default_idf = 1.0

    @staticmethod
    def _tokens(text: str) -> list[str]:
        toks = [t.surface.casefold() for t in tokenize(text).tokens if not t.is_punct]
        if not toks and text.strip():
            toks = [text.strip().casefold()]
        return toks

    def fit(self, texts: Iterable[str]) -> "HashedTfidfEmbedder":
        df: dict[str, int] = {}
        n = 0
        for text in texts:
            n += 1
            for tok in set(self._tokens(text)):
                df[tok] = df.get(tok, 0) + 1
        self._idf = {t: math.log((1 + n) / (1 + c)) + 1.0 for t, c in df.items()}
        self._default_idf = math.log(1 + n) + 1.0 if n else 1.0
        return self

    def _vector(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension)
        for tok in self._tokens(text):
            weight = self._idf.get(tok, self._default_idf)
            vec[_bucket(tok, self.dimension)] += weight
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.array([self._vector(t) for t in texts]) if texts else np.zeros((0, self.dimension))


class RemoteEmbedder:
    """Client for an embedding service: POST {url}/embed {"texts": [...]}."""

    def __init__(self, url: str, timeout: float = 30.0, session: requests.Session | None = None):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()
        self.dimension = -1  # learned from the first successful batch

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        try:
            resp = self.session.post(
                f"{self.url}/embed", json={"texts": list(texts)}, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise BackendUnavailable(f"embedding service unreachable: {exc}") from exc
        if resp.status_code != 200:
            detail = ""
            try:
                detail = resp.json().get("error", "")
            except ValueError:
                pass
            raise BackendUnavailable(f"embedding service HTTP {resp.status_code}: {detail}")
        vectors = resp.json().get("vectors", [])
        if len(vectors) != len(texts):
            raise DimensionMismatch(f"asked for {len(texts)} vectors, got {len(vectors)}")
        dims = {len(v) for v in vectors}
        if len(dims) > 1:
            raise DimensionMismatch(f"ragged vector dimensions in batch: {sorted(dims)}")
        if vectors:
            dim = dims.pop()
            if self.dimension == -1:
                self.dimension = dim
            elif dim != self.dimension:
                raise DimensionMismatch(f"batch dimension {dim} != established {self.dimension}")
        return np.array(vectors, dtype=float)
