"""Faithfulness checks of generations against their constraints.

Lexical and length constraints get a strict verdict (complete
adherence) and a relaxed one (75% threshold). Concept negations are
checked by content-word stem overlap, and syntactic adherence is
scored as a normalized edit similarity; both of those are report-only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .constraints import ConceptConstraint, LengthConstraint, LexicalConstraint, SyntacticConstraint
from .textkit import PosTagger, split_sentences, stopwords, tokenize

__all__ = [
    "LexicalCheck",
    "LengthCheck",
    "FaithfulnessVerdict",
    "FaithfulnessReport",
    "check_lexical",
    "check_length",
    "check_concept",
    "check_syntactic",
    "validate_generation",
    "faithfulness_report",
    "stem",
]


def _contains_phrase(haystack: list[str], phrase: str) -> bool:
    needle = [t.surface.casefold() for t in tokenize(phrase).tokens]
    if not needle:
        return False
    n = len(needle)
    return any(haystack[i : i + n] == needle for i in range(len(haystack) - n + 1))


@dataclass(frozen=True)
class LexicalCheck:
    strict: bool
    relaxed: bool
    fraction: float
    hits: int
    total: int
    exclusion_violated: bool


def check_lexical(generation: str, constraint: LexicalConstraint) -> LexicalCheck:
    """A group is hit when any alternative occurs case-insensitively on
    token boundaries. Strict: every group hit and no excluded keyword
    present; relaxed: at least 75% of groups hit and no excluded keyword."""
    haystack = [t.surface.casefold() for t in tokenize(generation).tokens]
    hits = sum(
        1 for group in constraint.include if any(_contains_phrase(haystack, alt) for alt in group.alternatives)
    )
    total = len(constraint.include)
    fraction = hits / total if total else 1.0
    excluded = any(_contains_phrase(haystack, word) for word in constraint.exclude)
    return LexicalCheck(
        strict=hits == total and not excluded,
        relaxed=fraction >= 0.75 and not excluded,
        fraction=fraction,
        hits=hits,
        total=total,
        exclusion_violated=excluded,
    )


@dataclass(frozen=True)
class LengthCheck:
    strict: bool
    relaxed: bool
    words: int


def check_length(generation: str, constraint: LengthConstraint) -> LengthCheck:
    """Strict: word count within [lower, upper]. Relaxed: within
    [floor(0.75 * lower), ceil(1.25 * upper)]."""
    words = tokenize(generation).word_count
    strict = constraint.lower <= words <= constraint.upper
    lo = math.floor(0.75 * constraint.lower)
    hi = math.ceil(1.25 * constraint.upper)
    return LengthCheck(strict=strict, relaxed=lo <= words <= hi, words=words)


_STEM_SUFFIXES = ("ings", "ing", "ies", "es", "ed", "ly", "s")


def stem(word: str) -> str:
    """Tiny suffix stripper for concept matching; not a full stemmer."""
    word = word.casefold()
    for suffix in _STEM_SUFFIXES:
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            word = word[: -len(suffix)]
            if suffix == "ies":
                word += "y"
            break
    return word


def check_concept(generation: str, constraint: ConceptConstraint) -> bool:
    """True when no negated concept shows up in the generation, judged
    by its content-word stems all being present."""
    sw = stopwords()
    gen_stems = {
        stem(t.surface) for t in tokenize(generation).tokens if not t.is_punct and t.surface.casefold() not in sw
    }
    for concept in constraint.negated_concepts:
        content = [
            stem(t.surface) for t in tokenize(concept).tokens if not t.is_punct and t.surface.casefold() not in sw
        ]
        if content and all(s in gen_stems for s in content):
            return False
    return True


def _levenshtein(a: Sequence[str], b: Sequence[str]) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        current = [i]
        for j, y in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (x != y)))
        previous = current
    return previous[-1]


def check_syntactic(generation: str, constraint: SyntacticConstraint, tagger: PosTagger) -> float:
    """Best normalized edit similarity between the constraint tags and
    any sentence of the generation; 0.0 for an empty generation."""
    best = 0.0
    for sentence, _ in split_sentences(generation):
        tags = tagger.tag(tokenize(sentence)).tags
        longest = max(len(tags), len(constraint.tags))
        if longest == 0:
            continue
        similarity = 1.0 - _levenshtein(tags, constraint.tags) / longest
        best = max(best, similarity)
    return best


@dataclass(frozen=True)
class FaithfulnessVerdict:
    lexical_strict: bool
    lexical_relaxed: bool
    lexical_fraction: float
    exclusion_violated: bool
    length_strict: bool
    length_relaxed: bool
    generation_words: int
    concept_clean: bool | None = None
    syntactic_similarity: float | None = None

    def to_json(self) -> dict:
        return {
            "lexical_strict": self.lexical_strict,
            "lexical_relaxed": self.lexical_relaxed,
            "lexical_fraction": self.lexical_fraction,
            "exclusion_violated": self.exclusion_violated,
            "length_strict": self.length_strict,
            "length_relaxed": self.length_relaxed,
            "generation_words": self.generation_words,
            "concept_clean": self.concept_clean,
            "syntactic_similarity": self.syntactic_similarity,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "FaithfulnessVerdict":
        return cls(**payload)


def validate_generation(
    generation: str,
    lexical: LexicalConstraint,
    length: LengthConstraint,
    concept: ConceptConstraint | None = None,
    syntactic: SyntacticConstraint | None = None,
    tagger: PosTagger | None = None,
) -> FaithfulnessVerdict:
    lex = check_lexical(generation, lexical)
    ln = check_length(generation, length)
    return FaithfulnessVerdict(
        lexical_strict=lex.strict,
        lexical_relaxed=lex.relaxed,
        lexical_fraction=lex.fraction,
        exclusion_violated=lex.exclusion_violated,
        length_strict=ln.strict,
        length_relaxed=ln.relaxed,
        generation_words=ln.words,
        concept_clean=check_concept(generation, concept) if concept is not None else None,
        syntactic_similarity=(
            check_syntactic(generation, syntactic, tagger) if syntactic is not None and tagger is not None else None
        ),
    )


# ---------------------------------------------------------------------------
# aggregate report


_COLUMNS = ("Lexical", "Lexical 75%", "Length", "Length 75%")


@dataclass(frozen=True)
class FaithfulnessReport:
    """Mean strict/relaxed accuracy per constraint kind, in percent,
    one row per dataset plus an overall row."""

    rows: Mapping[str, Mapping[str, float]]
    counts: Mapping[str, int]

    def to_json(self) -> dict:
        return {
            "columns": list(_COLUMNS),
            "rows": {name: dict(values) for name, values in self.rows.items()},
            "counts": dict(self.counts),
        }

    def to_text(self) -> str:
        names = [n for n in self.rows if n != "overall"] + (["overall"] if "overall" in self.rows else [])
        width = max([len("Task")] + [len(n) for n in names]) + 2
        header = "Task".ljust(width) + "".join(c.rjust(14) for c in _COLUMNS)
        lines = [header]
        for name in names:
            row = self.rows[name]
            lines.append(name.ljust(width) + "".join(f"{row[c]:14.2f}" for c in _COLUMNS))
        return "\n".join(lines)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True), "utf-8")


def faithfulness_report(verdicts_by_dataset: Mapping[str, Iterable[FaithfulnessVerdict]]) -> FaithfulnessReport:
    rows: dict[str, dict[str, float]] = {}
    counts: dict[str, int] = {}
    pooled: list[FaithfulnessVerdict] = []

    def row(verdicts: list[FaithfulnessVerdict]) -> dict[str, float]:
        n = len(verdicts)
        if n == 0:
            return {c: 0.0 for c in _COLUMNS}
        return {
            "Lexical": 100.0 * sum(v.lexical_strict for v in verdicts) / n,
            "Lexical 75%": 100.0 * sum(v.lexical_relaxed for v in verdicts) / n,
            "Length": 100.0 * sum(v.length_strict for v in verdicts) / n,
            "Length 75%": 100.0 * sum(v.length_relaxed for v in verdicts) / n,
        }

    for name in sorted(verdicts_by_dataset):
        verdicts = list(verdicts_by_dataset[name])
        rows[name] = row(verdicts)
        counts[name] = len(verdicts)
        pooled.extend(verdicts)
    rows["overall"] = row(pooled)
    counts["overall"] = len(pooled)
    return FaithfulnessReport(rows=rows, counts=counts)
