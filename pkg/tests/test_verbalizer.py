import pytest

from coda.constraints import (
    ConceptConstraint,
    ConstraintSet,
    KeywordGroup,
    LengthConstraint,
    LexicalConstraint,
    Novel,
    SemanticConstraint,
    constraint_set_from_dict,
)
from coda.errors import MissingPhrasing
from coda.verbalizer import (
    PhrasingTable,
    clauses_to_constraints,
    instruction_from_dict,
    instruction_to_dict,
    verbalize,
)
from conftest import load_golden

OTS_PHRASING = PhrasingTable(
    label_template=None,
    label_sentences={"clearly_unfair": "The document's terms of service should be clearly unfair."},
)

PHRASINGS = {
    "yahoo_novel": PhrasingTable(),
    "yahoo_rephrase": PhrasingTable(),
    "ots_novel": OTS_PHRASING,
    "conll_novel": PhrasingTable(),
    "squad_novel": PhrasingTable(),
}


@pytest.mark.parametrize("name", sorted(PHRASINGS))
def test_golden_byte_match(name):
    payload, expected = load_golden(name)
    cs = constraint_set_from_dict(payload["constraint_set"])
    instruction = verbalize(cs, payload["task"], PHRASINGS[name])
    assert instruction.text == expected


def test_reverbalize_identical_bytes():
    payload, _ = load_golden("ots_novel")
    cs = constraint_set_from_dict(payload["constraint_set"])
    first = verbalize(cs, payload["task"], OTS_PHRASING)
    second = verbalize(cs, payload["task"], OTS_PHRASING)
    assert first.text == second.text and first == second


def simple_cs(**overrides):
    base = dict(
        source_id="s",
        mode=Novel(),
        lexical=LexicalConstraint(include=(KeywordGroup(("alpha",)), KeywordGroup(("beta",)))),
        length=LengthConstraint(5, 9),
        semantic=SemanticConstraint("label_a"),
    )
    base.update(overrides)
    return ConstraintSet(**base)


def test_clause_numbering_consecutive_without_gaps():
    with_concepts = simple_cs(concept=ConceptConstraint(("c one", "c two")))
    instruction = verbalize(with_concepts, "classification")
    assert [c.number for c in instruction.clauses] == [1, 2, 3, 4, 5]
    without = verbalize(simple_cs(), "classification")
    assert [c.number for c in without.clauses] == [1, 2, 3]
    for clause in instruction.clauses:
        assert f" {clause.number}. " in " " + instruction.text


def test_clause_map_recovers_constraints():
    cs = simple_cs(concept=ConceptConstraint(("growth charts",)))
    instruction = verbalize(cs, "classification")
    parts = clauses_to_constraints(instruction.clauses)
    assert parts["lexical"] == cs.lexical
    assert parts["length"] == cs.length
    assert parts["concept"] == cs.concept
    assert parts["label"] == "label_a"


def test_exemplar_block_appended():
    cs = simple_cs(semantic=SemanticConstraint("label_a", exemplars=("one text", "two text", "red text")))
    text = verbalize(cs, "classification").text
    assert 'Examples of documents with this label: "one text" "two text" "red text"' in text
    assert text.index("words.") < text.index("Examples of documents")


def test_missing_phrasing_raises():
    with pytest.raises(MissingPhrasing):
        verbalize(simple_cs(), "classification", PhrasingTable(label_template=None))
    with pytest.raises(MissingPhrasing):
        verbalize(simple_cs(), "classification", PhrasingTable(label_template=None, label_sentences={"other": "x."}))


def test_instruction_dict_round_trip():
    cs = simple_cs(concept=ConceptConstraint(("a thing",)))
    instruction = verbalize(cs, "classification")
    row = instruction_to_dict(instruction, "s", round=1, slot=0)
    assert row["source_id"] == "s" and row["round"] == 1
    assert instruction_from_dict(row) == instruction
