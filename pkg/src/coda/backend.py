"""Text-generation backends: an HTTP client for an inference server and
a deterministic mock used by tests and offline runs.

Wire protocol (normative): POST {base_url}/generate with JSON
{"prompt", "temperature", "top_p", "top_k", "max_tokens", "seed"}
returning {"text": "..."}; errors come back as non-200 responses.
"""

from __future__ import annotations

import hashlib
import random
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import requests

from .errors import BackendUnavailable, EmptyReply, TimeoutExceeded
from .mining import CONCEPT_PROMPT, SUMMARY_PROMPT
from .textkit import word_count

__all__ = [
    "SamplingParams",
    "GenerationRequest",
    "GenerationResponse",
    "GenerationBackend",
    "HttpGenerationBackend",
    "MockGenerationBackend",
]


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.5
    top_p: float = 1.0
    top_k: int = 50
    max_tokens: int = 256
    seed: int | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise ValueError("top_p must be in (0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    params: SamplingParams = field(default_factory=SamplingParams)


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    backend: str


class GenerationBackend(Protocol):
    backend_id: str

    def generate(self, request: GenerationRequest) -> GenerationResponse: ...


class HttpGenerationBackend:
    """Client with bounded retries and exponential backoff.

    Transient failures (connection errors, timeouts, HTTP 429/5xx) are
    retried up to `retries` times; anything else fails immediately.
    """

    RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})

    def __init__(
        self,
        url: str,
        token: str | None = None,
        timeout: float = 60.0,
        retries: int = 2,
        backoff: float = 0.5,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.url = url.rstrip("/")
        self.token = token
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._shared_session = session
        self._local = threading.local()
        self.sleep = sleep
        self.backend_id = f"http:{self.url}"

    @property
    def session(self) -> requests.Session:
        # one session per thread keeps concurrent fan-out safe
        if self._shared_session is not None:
            return self._shared_session
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        params = request.params
        body = {
            "prompt": request.prompt,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "top_k": params.top_k,
            "max_tokens": params.max_tokens,
            "seed": params.seed,
        }
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.session.post(
                    f"{self.url}/generate", json=body, headers=headers, timeout=self.timeout
                )
            except requests.Timeout as exc:
                last_error = TimeoutExceeded(f"no reply within {self.timeout}s: {exc}")
                continue
            except requests.RequestException as exc:
                last_error = BackendUnavailable(f"generation service unreachable: {exc}")
                continue
            if resp.status_code in self.RETRYABLE_STATUS:
                last_error = BackendUnavailable(f"generation service HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendUnavailable(f"generation service HTTP {resp.status_code}: {resp.text[:200]}")
            text = resp.json().get("text", "")
            if not text or not text.strip():
                raise EmptyReply("generation service returned empty text")
            return GenerationResponse(text=text, backend=self.backend_id)
        raise last_error if last_error else BackendUnavailable("generation failed")


# ---------------------------------------------------------------------------
# deterministic mock


def _split_outside_quotes(text: str, sep: str) -> list[str]:
    parts: list[str] = []
    buf: list[str] = []
    in_quote = False
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == '"':
            in_quote = not in_quote
        if not in_quote and text.startswith(sep, i):
            parts.append("".join(buf))
            buf = []
            i += len(sep)
            continue
        buf.append(ch)
        i += 1
    parts.append("".join(buf))
    return parts


_SUMMARY_PREFIX = SUMMARY_PROMPT.split("{text}")[0]
_CONCEPT_PREFIX = CONCEPT_PROMPT.split("{label}")[0]
_KEYWORDS_RE = re.compile(r"The document should have the following keywords\s*:\s*")
_LENGTH_RE = re.compile(r"length of (\d+)-(\d+) words")
_CLAUSE_BREAK_RE = re.compile(r"\.\s+\d+\.\s")
_FILLERS = ("the", "of", "and", "to", "in", "for", "with", "on", "that", "this")


class MockGenerationBackend:
    """Pure function of (prompt, seed); no I/O.

    Instruction prompts yield a document containing the first
    alternative of every required keyword group, padded with filler
    words to exactly the lower length bound. Summary and concept
    prompts yield fixed-shape replies derived from the prompt.
    """

    backend_id = "mock"

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        prompt = request.prompt
        if prompt.startswith(_SUMMARY_PREFIX):
            text = self._summary(prompt[len(_SUMMARY_PREFIX) :])
        elif prompt.startswith(_CONCEPT_PREFIX):
            text = self._concept(prompt)
        else:
            text = self._document(prompt, request.params.seed)
        return GenerationResponse(text=text, backend=self.backend_id)

    @staticmethod
    def _summary(source: str) -> str:
        words = [w for w in source.split() if w]
        return " ".join(words[:12]).rstrip(".,;:") + "."

    @staticmethod
    def _concept(prompt: str) -> str:
        match = re.search(r"labeled (.+?): (.+?)\. Example sentences:", prompt, re.DOTALL)
        phrase = match.group(2) if match else "something"
        return " ".join(("general notion of " + phrase).split()[:8])

    @staticmethod
    def _keyword_heads(prompt: str) -> list[str]:
        match = _KEYWORDS_RE.search(prompt)
        if not match:
            return []
        rest = prompt[match.end() :]
        cut = len(rest)
        exclusion = rest.find(", but should not have")
        if exclusion != -1:
            cut = exclusion
        boundary = _CLAUSE_BREAK_RE.search(rest)
        if boundary and boundary.start() < cut:
            cut = boundary.start()
        segment = rest[:cut].rstrip()
        heads = []
        for group in _split_outside_quotes(segment, ", "):
            first = _split_outside_quotes(group, " or ")[0].strip()
            first = first.strip('"').rstrip(".")
            if first:
                heads.append(first)
        return heads

    def _document(self, prompt: str, seed: int | None) -> str:
        heads = self._keyword_heads(prompt)
        match = _LENGTH_RE.search(prompt)
        lower = int(match.group(1)) if match else 12
        words: list[str] = []
        for head in heads:
            words.extend(head.split())
        digest = hashlib.blake2b(f"{seed}|{prompt}".encode("utf-8"), digest_size=8).digest()
        rng = random.Random(int.from_bytes(digest, "big"))
        # fillers are single plain words, so each adds exactly one to the count
        missing = lower - word_count(" ".join(words))
        words.extend(_FILLERS[rng.randrange(len(_FILLERS))] for _ in range(max(0, missing)))
        return " ".join(words) + "."
