"""Rendering constraint sets into generation instructions.

Each task family gets its own clause mix: classification carries a label
clause and optional concept negations, NER states each entity's type,
QA quotes the answer-bearing sentence inside the keyword list.

    python demos/02_instructions.py
"""

from coda import (
    ConceptConstraint,
    ConstraintSet,
    KeywordGroup,
    LengthConstraint,
    LexicalConstraint,
    Novel,
    PhrasingTable,
    Rephrase,
    SemanticConstraint,
    verbalize,
)

topic_cs = ConstraintSet(
    source_id="demo_topic",
    mode=Novel(),
    lexical=LexicalConstraint(
        include=(
            KeywordGroup(("advertise", "marketing")),  # alternatives render as "A or B"
            KeywordGroup(("Shops",)),
            KeywordGroup(("malls",)),
        )
    ),
    length=LengthConstraint(13, 19),
    semantic=SemanticConstraint("Business & Finance"),
    concept=ConceptConstraint(("market volatility",)),
)
print("--- classification, novel mode ---")
print(verbalize(topic_cs, "classification").text)
print()

ner_cs = ConstraintSet(
    source_id="demo_ner",
    mode=Novel(),
    lexical=LexicalConstraint(
        include=(KeywordGroup(("Israel",)), KeywordGroup(("Arafat",)), KeywordGroup(("West Bank",)))
    ),
    length=LengthConstraint(5, 13),
    entity_clauses=(("Israel", "LOC"), ("Arafat", "PER"), ("West Bank", "LOC")),
)
print("--- NER, novel mode ---")
print(verbalize(ner_cs, "ner").text)
print()

rephrase_cs = ConstraintSet(
    source_id="demo_rephrase",
    mode=Rephrase(
        description="Christmas help wanted ads in malls often run until the last minute.",
        partner_id="partner42",
    ),
    lexical=LexicalConstraint(include=(KeywordGroup(("business",)), KeywordGroup(("profits",)))),
    length=LengthConstraint(13, 19),
    semantic=SemanticConstraint("Business & Finance"),
)
print("--- classification, rephrase mode ---")
print(verbalize(rephrase_cs, "classification").text)
print()

# Label phrasing is dataset-specific configuration: a template with
# {label}, or one hand-written sentence per label.
unfairness = PhrasingTable(
    label_template=None,
    label_sentences={"clearly_unfair": "The document's terms of service should be clearly unfair."},
)
legal_cs = ConstraintSet(
    source_id="demo_legal",
    mode=Novel(),
    lexical=LexicalConstraint(include=(KeywordGroup(("obligated",)),)),
    length=LengthConstraint(21, 31),
    semantic=SemanticConstraint("clearly_unfair"),
)
print("--- per-label phrasing ---")
print(verbalize(legal_cs, "classification", unfairness).text)
print()

# Every instruction carries a machine-readable clause map tying each
# numbered clause back to its constraint payload, so validation never
# re-parses the prose.
instruction = verbalize(topic_cs, "classification")
for clause in instruction.clauses:
    print(f"clause {clause.number} [{clause.kind}]: {clause.payload}")
