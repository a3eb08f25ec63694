"""Render a ConstraintSet into a fixed natural-language instruction.

Templates are hand-written and normative: golden files in the test
suite pin the exact bytes. Alongside the prose, every instruction
carries a machine-readable clause map so validation can recover each
constraint's payload without re-parsing the text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .constraints import (
    ConceptConstraint,
    ConstraintSet,
    KeywordGroup,
    LengthConstraint,
    LexicalConstraint,
    Rephrase,
    SyntacticConstraint,
)
from .corpus import TaskKind
from .errors import MissingPhrasing

__all__ = [
    "Clause",
    "Instruction",
    "PhrasingTable",
    "verbalize",
    "instruction_to_dict",
    "instruction_from_dict",
    "clauses_to_constraints",
    "DEFAULT_ENTITY_TYPE_NAMES",
]

NOVEL_PREAMBLE = "Write a brief document with a single sentence or multiple sentences with the following constraints:"
NOVEL_PREAMBLE_QA = "Write a brief document with multiple sentences corresponding to the following constraints:"
REPHRASE_PREAMBLE = (
    "Write a brief document with a single sentence or multiple sentences corresponding "
    'to the following abstract description: "{description}". Additionally, the document '
    "should have the following constraints:"
)
REPHRASE_PREAMBLE_QA = (
    "Write a brief document with multiple sentences corresponding to the following "
    'abstract description: "{description}". Additionally, the document should have '
    "the following constraints:"
)

KEYWORDS_CLAUSE = "The document should have the following keywords: {groups}."
KEYWORDS_CLAUSE_WITH_EXCLUSIONS = (
    "The document should have the following keywords: {groups}, "
    "but should not have the following keywords : {exclusions}."
)
POS_CLAUSE = "The document should have a part-of-speech sequence similar to: {tags}."
LENGTH_CLAUSE = "The document should have a length of {lower}-{upper} words."
CONCEPT_CLAUSE = "Any sentence in the document should not include the abstract concept {concept}."
EXEMPLAR_HEADER = "Examples of documents with this label:"

DEFAULT_ENTITY_TYPE_NAMES: Mapping[str, str] = {
    "LOC": "location",
    "PER": "person",
    "ORG": "organization",
    "MISC": "miscellaneous",
}


@dataclass(frozen=True)
class PhrasingTable:
    """Dataset-specific wording for the label clause.

    `label_sentences` maps labels to complete hand-written sentences
    (used when present, and then every label must be covered);
    otherwise `label_template` is formatted with the label.
    """

    label_template: str | None = "The document should be on the topic of {label}."
    label_sentences: Mapping[str, str] | None = None
    entity_template: str = "{surface} is {type}"
    entity_type_names: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_ENTITY_TYPE_NAMES))

    def label_clause(self, label: str) -> str:
        if self.label_sentences is not None:
            if label not in self.label_sentences:
                raise MissingPhrasing(f"no label-clause sentence configured for label {label!r}")
            return self.label_sentences[label]
        if self.label_template is None:
            raise MissingPhrasing(f"no label-clause phrasing configured (label {label!r})")
        return self.label_template.format(label=label)

    def entity_clause(self, clauses: tuple[tuple[str, str], ...]) -> str:
        parts = [
            self.entity_template.format(surface=surface, type=self.entity_type_names.get(etype, etype))
            for surface, etype in clauses
        ]
        return ", ".join(parts) + "."


@dataclass(frozen=True)
class Clause:
    number: int
    kind: str  # keywords | label | entities | pos | length | concept
    payload: dict


@dataclass(frozen=True)
class Instruction:
    text: str
    clauses: tuple[Clause, ...]
    mode: str  # novel | rephrase


def _render_group(group: KeywordGroup) -> str:
    alts = [f'"{a}"' if group.quote else a for a in group.alternatives]
    return " or ".join(alts)


def _keywords_clause(lexical: LexicalConstraint) -> str:
    groups = ", ".join(_render_group(g) for g in lexical.include)
    if lexical.exclude:
        return KEYWORDS_CLAUSE_WITH_EXCLUSIONS.format(groups=groups, exclusions=", ".join(lexical.exclude))
    return KEYWORDS_CLAUSE.format(groups=groups)


def verbalize(cs: ConstraintSet, task: TaskKind | str, phrasing: PhrasingTable | None = None) -> Instruction:
    """Deterministically render `cs` into prompt text plus a clause map.

    Clause order: keywords, label (or entity-type statements), POS
    sequence, length window, then one clause per negated concept.
    Exemplars, when present, follow the numbered clauses unnumbered.
    """
    task = TaskKind.parse(task)
    phrasing = phrasing or PhrasingTable()
    clauses: list[Clause] = []
    texts: list[str] = []

    def add(kind: str, text: str, payload: dict):
        clauses.append(Clause(number=len(clauses) + 1, kind=kind, payload=payload))
        texts.append(text)

    add(
        "keywords",
        _keywords_clause(cs.lexical),
        {
            "include": [{"alternatives": list(g.alternatives), "quote": g.quote} for g in cs.lexical.include],
            "exclude": list(cs.lexical.exclude),
        },
    )
    if task is TaskKind.CLASSIFICATION and cs.semantic is not None:
        add("label", phrasing.label_clause(cs.semantic.label), {"label": cs.semantic.label})
    elif task is TaskKind.NER and cs.entity_clauses:
        add(
            "entities",
            phrasing.entity_clause(cs.entity_clauses),
            {"entities": [[s, t] for s, t in cs.entity_clauses]},
        )
    if cs.syntactic is not None:
        add(
            "pos",
            POS_CLAUSE.format(tags=" ".join(cs.syntactic.tags)),
            {"tags": list(cs.syntactic.tags), "source_sentence_index": cs.syntactic.source_sentence_index},
        )
    add(
        "length",
        LENGTH_CLAUSE.format(lower=cs.length.lower, upper=cs.length.upper),
        {"lower": cs.length.lower, "upper": cs.length.upper},
    )
    if cs.concept is not None:
        for concept in cs.concept.negated_concepts:
            add("concept", CONCEPT_CLAUSE.format(concept=concept), {"concept": concept})

    if isinstance(cs.mode, Rephrase):
        template = REPHRASE_PREAMBLE_QA if task is TaskKind.QA else REPHRASE_PREAMBLE
        preamble = template.format(description=cs.mode.description)
    else:
        preamble = NOVEL_PREAMBLE_QA if task is TaskKind.QA else NOVEL_PREAMBLE

    body = " ".join(f"{c.number}. {t}" for c, t in zip(clauses, texts))
    text = f"{preamble} {body}"
    if cs.semantic is not None and cs.semantic.exemplars:
        quoted = " ".join(f'"{e}"' for e in cs.semantic.exemplars)
        text = f"{text} {EXEMPLAR_HEADER} {quoted}"
    return Instruction(text=text, clauses=tuple(clauses), mode=cs.mode.kind)


# ---------------------------------------------------------------------------
# serialization and clause-map recovery


def instruction_to_dict(instr: Instruction, source_id: str, **extra) -> dict:
    record = {
        "source_id": source_id,
        "mode": instr.mode,
        "text": instr.text,
        "clauses": [{"number": c.number, "kind": c.kind, "payload": c.payload} for c in instr.clauses],
    }
    record.update(extra)
    return record


def instruction_from_dict(record: dict) -> Instruction:
    return Instruction(
        text=record["text"],
        clauses=tuple(Clause(c["number"], c["kind"], c["payload"]) for c in record["clauses"]),
        mode=record["mode"],
    )


def clauses_to_constraints(clauses: tuple[Clause, ...]) -> dict:
    """Rebuild checkable constraint objects from a clause map.

    Returns a dict with any of the keys: lexical, length, concept,
    syntactic, label, entities.
    """
    out: dict = {}
    concepts: list[str] = []
    for clause in clauses:
        payload = clause.payload
        if clause.kind == "keywords":
            out["lexical"] = LexicalConstraint(
                include=tuple(
                    KeywordGroup(tuple(g["alternatives"]), g.get("quote", False)) for g in payload["include"]
                ),
                exclude=tuple(payload.get("exclude", ())),
            )
        elif clause.kind == "length":
            out["length"] = LengthConstraint(payload["lower"], payload["upper"])
        elif clause.kind == "concept":
            concepts.append(payload["concept"])
        elif clause.kind == "pos":
            out["syntactic"] = SyntacticConstraint(tuple(payload["tags"]), payload.get("source_sentence_index", 0))
        elif clause.kind == "label":
            out["label"] = payload["label"]
        elif clause.kind == "entities":
            out["entities"] = [(s, t) for s, t in payload["entities"]]
    if concepts:
        out["concept"] = ConceptConstraint(tuple(concepts))
    return out
