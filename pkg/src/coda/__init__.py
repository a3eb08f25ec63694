"""Constraint-driven data augmentation for low-resource NLP datasets.

The package extracts simple per-document constraints (keywords, label,
length window, POS sequence, negated concepts) from a small training
set, verbalizes them into instructions for a text-generation backend,
converts the generations back into labeled training records, and
measures how faithfully the constraints were followed.
"""

from .backend import (
    GenerationBackend,
    GenerationRequest,
    GenerationResponse,
    HttpGenerationBackend,
    MockGenerationBackend,
    SamplingParams,
)
from .constraints import (
    ConceptConstraint,
    ConstraintSet,
    ExtractionContext,
    KeywordGroup,
    LengthConstraint,
    LexicalConstraint,
    Novel,
    Rephrase,
    SemanticConstraint,
    SyntacticConstraint,
    build_constraint_set,
    extract_concept,
    extract_length,
    extract_lexical,
    extract_semantic,
    extract_syntactic,
)
from .corpus import (
    ClassificationPayload,
    Dataset,
    Document,
    EntitySpan,
    NerPayload,
    QaPayload,
    TaskKind,
    load_dataset,
    sample_low_resource,
    write_dataset,
)
from .metrics import NGramScorer, QualityReport, diversity, length_diversity, perplexity
from .mining import (
    AnalysisArtifacts,
    ConceptTable,
    PhraseLabelScore,
    SimilarityIndex,
    abstract_concepts,
    abstract_description,
    build_index,
    sample_partner,
    spurious_phrases,
)
from .pipeline import (
    AugmentationRecord,
    Pipeline,
    PipelineResult,
    RunConfig,
    accept,
    merge_augmentations,
    relabel_classification,
    relabel_ner,
    relabel_qa,
    run_augmentation,
)
from .textkit import (
    HashedTfidfEmbedder,
    LengthStats,
    PosSequence,
    RuleBasedTagger,
    TokenSequence,
    extract_ngrams,
    length_stats,
    split_sentences,
    tokenize,
    word_count,
)
from .validator import (
    FaithfulnessReport,
    FaithfulnessVerdict,
    check_concept,
    check_length,
    check_lexical,
    check_syntactic,
    faithfulness_report,
    validate_generation,
)
from .verbalizer import Instruction, PhrasingTable, verbalize

__version__ = "0.1.0"
