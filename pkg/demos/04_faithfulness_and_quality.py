"""Checking generations against their constraints, and scoring corpora.

Lexical and length constraints are graded twice: strictly (complete
adherence) and at a 75% relaxation. Concept negations use content-word
stems; POS adherence is a normalized edit similarity, report-only.

    python demos/04_faithfulness_and_quality.py
"""

from coda import (
    ConceptConstraint,
    KeywordGroup,
    LengthConstraint,
    LexicalConstraint,
    NGramScorer,
    check_concept,
    check_length,
    check_lexical,
    diversity,
    length_diversity,
    perplexity,
)
from coda.corpus import ClassificationPayload, Document

lexical = LexicalConstraint(
    include=(KeywordGroup(("advertise", "marketing")), KeywordGroup(("Shops",)), KeywordGroup(("malls",))),
    exclude=("discount",),
)
window = LengthConstraint(13, 19)

candidates = [
    "Shops in the malls advertise seasonal openings and hire extra help for the holidays.",
    "Marketing in malls peaked early.",
    "Shops in malls advertise steep discount days to draw crowds in from the cold streets.",
]
for text in candidates:
    lex = check_lexical(text, lexical)
    ln = check_length(text, window)
    print(f"{text[:60]:62} keywords {lex.hits}/{lex.total} "
          f"strict={lex.strict} relaxed={lex.relaxed}  "
          f"length={ln.words} strict={ln.strict} relaxed={ln.relaxed}")
print()

# Concept negation matches on stems, so reordered mentions still count.
# check_concept returns True when the generation is clean.
concept = ConceptConstraint(("market volatility",))
print("no mention anywhere      -> clean =", check_concept("calm gardens and tea", concept))
print("reordered, restemmed hit -> clean =", check_concept("the volatility of markets rose", concept))
print()

# Corpus quality: perplexity under an additively smoothed trigram model
# trained on the gold split, plus token and length diversity of the
# augmentations relative to their sources.
gold = [
    Document("g0", "The home team won the championship game after a tense second half.", ClassificationPayload("s")),
    Document("g1", "A regional bank posted record revenue following the audit.", ClassificationPayload("b")),
]
augmentations = {
    "g0": ["The visiting team won a tense playoff game in extra time.",
           "A young squad celebrated the championship before a roaring crowd."],
    "g1": ["The bank doubled quarterly profits despite rising costs.",
           "A family business raised its annual forecast to reassure shareholders."],
}

scorer = NGramScorer(order=3, alpha=0.1).fit(d.text for d in gold)
texts = [t for group in augmentations.values() for t in group]
print(f"perplexity:       {perplexity(texts, scorer):.2f}")
print(f"diversity:        {diversity(gold, augmentations):.2f} new token types per source")
print(f"length diversity: {length_diversity(gold, augmentations):.2f} words")
