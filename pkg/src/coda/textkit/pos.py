"""Part-of-speech tagging over the 17-tag Universal POS inventory.

The built-in tagger is a deterministic cascade: punctuation, numerals,
bundled lexicon, capitalization, suffix rules, NOUN fallback. It exists
so extraction and validation run offline and reproducibly; a remote
tagger can be plugged in through the same `tag` interface when fidelity
matters more than determinism.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Protocol

from .tokens import TokenSequence

__all__ = ["UPOS_TAGS", "PosSequence", "PosTagger", "RuleBasedTagger"]

UPOS_TAGS = frozenset(
    {
        "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
        "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
    }
)


@dataclass(frozen=True)
class PosSequence:
    tags: tuple[str, ...]

    def __post_init__(self):
        unknown = set(self.tags) - UPOS_TAGS
        if unknown:
            raise ValueError(f"tags outside the UPOS inventory: {sorted(unknown)}")

    def __len__(self) -> int:
        return len(self.tags)

    def __str__(self) -> str:
        return " ".join(self.tags)


class PosTagger(Protocol):
    def tag(self, seq: TokenSequence) -> PosSequence: ...


@lru_cache(maxsize=1)
def _lexicon() -> dict[str, str]:
    raw = resources.files("coda.textkit.data").joinpath("pos_lexicon.tsv").read_text("utf-8")
    table: dict[str, str] = {}
    for line in raw.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word, tag = line.split("\t")
        table[word.casefold()] = tag
    return table


# longest suffix wins; checked only for uncapitalized unknown words
_SUFFIX_RULES: tuple[tuple[str, str], ...] = (
    ("ization", "NOUN"),
    ("ability", "NOUN"),
    ("tion", "NOUN"),
    ("sion", "NOUN"),
    ("ment", "NOUN"),
    ("ness", "NOUN"),
    ("ship", "NOUN"),
    ("ance", "NOUN"),
    ("ence", "NOUN"),
    ("hood", "NOUN"),
    ("ity", "NOUN"),
    ("ism", "NOUN"),
    ("able", "ADJ"),
    ("ible", "ADJ"),
    ("ical", "ADJ"),
    ("ious", "ADJ"),
    ("eous", "ADJ"),
    ("less", "ADJ"),
    ("ful", "ADJ"),
    ("ive", "ADJ"),
    ("ous", "ADJ"),
    ("ize", "VERB"),
    ("ise", "VERB"),
    ("ify", "VERB"),
    ("ing", "VERB"),
    ("ed", "VERB"),
    ("ly", "ADV"),
    ("al", "ADJ"),
    ("ic", "ADJ"),
)


def _is_numeral(surface: str) -> bool:
    core = [c for c in surface if c.isalnum()]
    return bool(core) and all(c.isdigit() for c in core)


class RuleBasedTagger:
    """Lexicon + suffix rules + NOUN default. Pure and reentrant."""

    def _word_tag(self, surface: str) -> str:
        if not surface:
            return "X"
        folded = surface.casefold()
        if _is_numeral(surface):
            return "NUM"
        lex = _lexicon()
        if folded in lex:
            return lex[folded]
        if surface[0].isupper():
            return "PROPN"
        for suffix, tag in _SUFFIX_RULES:
            if len(folded) > len(suffix) + 1 and folded.endswith(suffix):
                return tag
        return "NOUN"

    def tag(self, seq: TokenSequence) -> PosSequence:
        tags: list[str] = []
        tokens = seq.tokens
        for i, token in enumerate(tokens):
            if token.is_punct:
                tags.append("PUNCT")
                continue
            if token.surface.casefold() == "to":
                # infinitival "to" before a verb, adposition otherwise
                nxt = next((t for t in tokens[i + 1 :] if not t.is_punct), None)
                if nxt is not None and self._word_tag(nxt.surface) in ("VERB", "AUX"):
                    tags.append("PART")
                else:
                    tags.append("ADP")
                continue
            tags.append(self._word_tag(token.surface))
        return PosSequence(tuple(tags))
