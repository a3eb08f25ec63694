"""End-to-end orchestration.

For every document and round the pipeline builds 3 novel and 2
rephrase constraint sets, verbalizes them, asks the generation backend
for text, turns raw generations back into labeled training records,
checks constraint faithfulness, and merges accepted records into the
gold dataset. All randomness flows through per-(seed, doc, slot, round)
streams, so a run with the mock backend is a pure function of its
configuration; artifacts are written in canonical document/slot order
regardless of generation completion order.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .backend import (
    GenerationBackend,
    GenerationRequest,
    HttpGenerationBackend,
    MockGenerationBackend,
    SamplingParams,
)
from .constraints import (
    ConstraintSet,
    ExtractionContext,
    SynonymIndex,
    build_constraint_set,
    constraint_set_from_dict,
    constraint_set_to_dict,
)
from .corpus import (
    FORMAT_FOR_TASK,
    ClassificationPayload,
    Dataset,
    Document,
    EntitySpan,
    NerPayload,
    Payload,
    QaPayload,
    TaskKind,
    load_dataset,
    merge_documents,
    write_dataset,
)
from .errors import CodaError, PayloadInvalid
from .metrics import NGramScorer, QualityReport, RemoteScorer, diversity, length_diversity, perplexity
from .mining import AnalysisArtifacts, ConceptTable, abstract_concepts, build_index, spurious_phrases
from .textkit import HashedTfidfEmbedder, RemoteEmbedder, RuleBasedTagger, length_stats, tokenize
from .validator import FaithfulnessVerdict, FaithfulnessReport, faithfulness_report, validate_generation
from .verbalizer import (
    Instruction,
    PhrasingTable,
    clauses_to_constraints,
    instruction_from_dict,
    instruction_to_dict,
    verbalize,
)

logger = logging.getLogger(__name__)

__all__ = [
    "RunConfig",
    "AugmentationRecord",
    "Reject",
    "PipelineResult",
    "Pipeline",
    "run_augmentation",
    "relabel_classification",
    "relabel_ner",
    "relabel_qa",
    "accept",
    "merge_augmentations",
    "rng_stream",
    "ARTIFACTS",
]

ARTIFACTS = (
    "analysis.json",
    "constraints.jsonl",
    "instructions.jsonl",
    "generations.jsonl",
    "faithfulness.json",
    "quality.json",
    "rejections.jsonl",
)

_AUGMENTED_NAME = {
    TaskKind.CLASSIFICATION: "augmented.jsonl",
    TaskKind.NER: "augmented.conll",
    TaskKind.QA: "augmented.json",
}

ACCEPT_POLICIES = ("all", "relaxed", "strict")


@dataclass
class RunConfig:
    task: str
    dataset_path: str
    output_dir: str
    dataset_name: str = "dataset"
    format: str | None = None  # None -> the task's native format
    seed: int = 0
    rounds: int = 1
    novel_slots: int = 3
    rephrase_slots: int = 2
    k_keywords: int | None = None  # None -> max(3, ceil(0.15 * words))
    retrieval_k: int = 5
    exemplar_count: int = 3
    min_support: int = 5
    top_spurious: int = 10
    enable_syntactic: bool = False
    enable_concept: bool = True
    enable_synonyms: bool = False
    enable_exclusions: bool = False
    enable_exemplars: bool = True
    temperature: float = 0.5
    top_p: float = 1.0
    top_k: int = 50
    max_tokens: int | None = None  # None -> 2 * upper length bound + 32
    backend_url: str | None = None  # None -> deterministic mock
    backend_token: str | None = None
    embedder_url: str | None = None  # None -> hashed TF-IDF fallback
    scorer_url: str | None = None  # None -> built-in trigram scorer
    timeout: float = 60.0
    retries: int = 2
    concurrency: int = 4
    accept_policy: str = "all"
    label_phrasing: dict | None = None

    def __post_init__(self):
        if self.accept_policy not in ACCEPT_POLICIES:
            raise ValueError(f"accept_policy must be one of {ACCEPT_POLICIES}")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.novel_slots < 0 or self.rephrase_slots < 0 or self.novel_slots + self.rephrase_slots == 0:
            raise ValueError("need at least one generation slot per document")

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def rng_stream(seed: int, *parts) -> tuple[random.Random, int]:
    """Independent RNG stream keyed by (seed, *parts); also returns the
    derived integer seed for recording/replay."""
    key = "|".join([str(seed), *map(str, parts)])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "big")
    return random.Random(value), value


@dataclass(frozen=True)
class Reject:
    reason: str


@dataclass
class AugmentationRecord:
    source_id: str
    mode: str  # novel | rephrase
    round: int
    slot: int  # index within its mode
    constraint_set: ConstraintSet
    instruction: Instruction
    generation: str = ""
    payload: Payload | None = None
    reject_reason: str | None = None
    verdict: FaithfulnessVerdict | None = None
    stream_seed: int = 0

    @property
    def record_id(self) -> str:
        return f"{self.source_id}#{self.mode}{self.slot}#r{self.round}"


# ---------------------------------------------------------------------------
# relabeling


def relabel_classification(generation: str, cs: ConstraintSet) -> ClassificationPayload:
    """The generation inherits the source label carried by the semantic
    constraint, verbatim."""
    if cs.semantic is None:
        raise PayloadInvalid(f"{cs.source_id}: no semantic constraint to take the label from")
    return ClassificationPayload(cs.semantic.label)


def relabel_ner(generation: str, entity_clauses: Sequence[tuple[str, str]]) -> NerPayload | Reject:
    """Tag every case-insensitive token-boundary match of each clause
    surface; overlaps resolved longest-first, then leftmost, then clause
    order. Rejects generations containing no clause surface at all."""
    seq = tokenize(generation)
    surfaces = [t.surface for t in seq.tokens]
    folded = [s.casefold() for s in surfaces]
    candidates: list[tuple[int, int, int, str]] = []  # (-len, start, clause_idx, type)
    for clause_idx, (surface, etype) in enumerate(entity_clauses):
        needle = [t.surface.casefold() for t in tokenize(surface).tokens]
        if not needle:
            continue
        n = len(needle)
        for start in range(len(folded) - n + 1):
            if folded[start : start + n] == needle:
                candidates.append((-n, start, clause_idx, etype))
    candidates.sort()
    used: set[int] = set()
    spans = []
    for neg_n, start, _, etype in candidates:
        n = -neg_n
        positions = range(start, start + n)
        if any(p in used for p in positions):
            continue
        used.update(positions)
        spans.append((start, start + n, etype))
    if not spans:
        return Reject("no_entity")
    spans.sort()
    return NerPayload(tuple(surfaces), tuple(EntitySpan(s, e, t) for s, e, t in spans))


def relabel_qa(generation: str, cs: ConstraintSet, question: str, answer: str) -> QaPayload | Reject:
    """Reuse the source question/answer; the answer must occur verbatim
    (case-sensitive) in the generated context, first occurrence wins."""
    offset = generation.find(answer)
    if offset == -1:
        return Reject("answer_missing")
    return QaPayload(question=question, answer=answer, answer_start=offset)


def accept(record: AugmentationRecord, policy: str) -> bool:
    """'all' keeps every record with a valid payload; 'relaxed' and
    'strict' additionally require the matching lexical+length verdicts."""
    if policy not in ACCEPT_POLICIES:
        raise ValueError(f"unknown accept policy {policy!r}")
    if record.payload is None:
        return False
    if policy == "all":
        return True
    verdict = record.verdict
    if verdict is None:
        return False
    if policy == "strict":
        return verdict.lexical_strict and verdict.length_strict
    return verdict.lexical_relaxed and verdict.length_relaxed


def _document_for(record: AugmentationRecord, task: TaskKind) -> Document:
    if task is TaskKind.NER:
        text = " ".join(record.payload.tokens)
    else:
        text = record.generation
    return Document(id=record.record_id, text=text, payload=record.payload)


def merge_augmentations(dataset: Dataset, records: Sequence[AugmentationRecord]) -> Dataset:
    """Gold documents followed by the given records as new documents."""
    additions = []
    for record in records:
        if record.payload is None:
            raise PayloadInvalid(f"record {record.record_id} has no reconstructed payload")
        additions.append(_document_for(record, dataset.task))
    return merge_documents(dataset, additions)


# ---------------------------------------------------------------------------
# phrasing / backend / embedder wiring


def make_phrasing(config: RunConfig) -> PhrasingTable:
    overrides = dict(config.label_phrasing or {})
    kwargs: dict = {}
    if "label_template" in overrides:
        kwargs["label_template"] = overrides["label_template"]
    if "label_sentences" in overrides:
        kwargs["label_sentences"] = overrides["label_sentences"]
        kwargs.setdefault("label_template", None)
    if "entity_template" in overrides:
        kwargs["entity_template"] = overrides["entity_template"]
    if "entity_type_names" in overrides:
        kwargs["entity_type_names"] = overrides["entity_type_names"]
    return PhrasingTable(**kwargs)


def make_backend(config: RunConfig) -> GenerationBackend:
    url = os.environ.get("CODA_BACKEND_URL") or config.backend_url
    if url:
        return HttpGenerationBackend(
            url, token=config.backend_token, timeout=config.timeout, retries=config.retries
        )
    return MockGenerationBackend()


class RecordingBackend:
    """Wraps a backend and keeps a transcript entry per exchange."""

    def __init__(self, inner: GenerationBackend):
        self.inner = inner
        self.backend_id = inner.backend_id
        self.entries: list[dict] = []
        self.context: dict = {}

    def generate(self, request: GenerationRequest):
        response = self.inner.generate(request)
        params = request.params
        self.entries.append(
            {
                **self.context,
                "prompt": request.prompt,
                "temperature": params.temperature,
                "top_p": params.top_p,
                "top_k": params.top_k,
                "max_tokens": params.max_tokens,
                "seed": params.seed,
                "response": response.text,
                "backend": response.backend,
            }
        )
        return response


# ---------------------------------------------------------------------------
# the pipeline


@dataclass
class PipelineResult:
    dataset: Dataset
    faithfulness: FaithfulnessReport
    quality: QualityReport
    records: list[AugmentationRecord]


def _write_jsonl(path: Path, rows: Sequence[dict]) -> None:
    with path.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


class Pipeline:
    def __init__(self, config: RunConfig):
        self.config = config
        self.task = TaskKind.parse(config.task)
        fmt = config.format or FORMAT_FOR_TASK[self.task]
        self.dataset = load_dataset(config.dataset_path, fmt, self.task)
        self.out = Path(config.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.tagger = RuleBasedTagger()
        if config.embedder_url:
            self.embedder = RemoteEmbedder(config.embedder_url, timeout=config.timeout)
        else:
            self.embedder = HashedTfidfEmbedder().fit([d.text for d in self.dataset])
        self.backend = RecordingBackend(make_backend(config))
        self.phrasing = make_phrasing(config)
        self.slot_plan = [("novel", i) for i in range(config.novel_slots)] + [
            ("rephrase", i) for i in range(config.rephrase_slots)
        ]

    # -- analyze ------------------------------------------------------

    def analyze(self) -> AnalysisArtifacts:
        """Corpus statistics, spurious phrases, and abstract concepts."""
        stats = length_stats(self.dataset)
        spurious = tuple(
            spurious_phrases(self.dataset, min_support=self.config.min_support, top_n=self.config.top_spurious)
        )
        concepts = ConceptTable({})
        if self.task is TaskKind.CLASSIFICATION and self.config.enable_concept and spurious:
            self.backend.context = {"kind": "concept"}
            concepts = abstract_concepts(spurious, self.dataset, self.backend)
        analysis = AnalysisArtifacts(concepts=concepts, spurious=spurious, length_stats=stats)
        analysis.save(self.out / "analysis.json")
        return analysis

    # -- extract ------------------------------------------------------

    def _context(self, analysis: AnalysisArtifacts) -> ExtractionContext:
        config = self.config
        spurious_by_label: dict[str, list[str]] = {}
        for item in analysis.spurious:
            spurious_by_label.setdefault(item.label, []).append(item.phrase)
        synonym_index = None
        if config.enable_synonyms:
            synonym_index = SynonymIndex.build(self.dataset, self.embedder, self.tagger)
        index = None
        if config.rephrase_slots > 0:
            index = build_index(self.dataset, self.embedder)
        return ExtractionContext(
            dataset=self.dataset,
            stats=analysis.length_stats,
            embedder=self.embedder,
            tagger=self.tagger,
            backend=self.backend,
            index=index,
            concept_table=analysis.concepts,
            spurious_by_label=spurious_by_label,
            k_keywords=config.k_keywords,
            retrieval_k=config.retrieval_k,
            exemplar_count=config.exemplar_count,
            enable_syntactic=config.enable_syntactic,
            enable_concept=config.enable_concept,
            enable_synonyms=config.enable_synonyms,
            enable_exclusions=config.enable_exclusions,
            enable_exemplars=config.enable_exemplars,
            synonym_index=synonym_index,
        )

    def extract(self, analysis: AnalysisArtifacts) -> list[AugmentationRecord]:
        """Build the ConstraintSet and Instruction for every slot."""
        ctx = self._context(analysis)
        records: list[AugmentationRecord] = []
        for round_no in range(1, self.config.rounds + 1):
            for doc in self.dataset:
                for mode_kind, slot in self.slot_plan:
                    rng, stream_seed = rng_stream(self.config.seed, doc.id, mode_kind, slot, round_no)
                    self.backend.context = {
                        "kind": "description",
                        "source_id": doc.id,
                        "round": round_no,
                        "slot": slot,
                    }
                    cs = build_constraint_set(doc, mode_kind, ctx, rng, order_seed=stream_seed)
                    instruction = verbalize(cs, self.task, self.phrasing)
                    records.append(
                        AugmentationRecord(
                            source_id=doc.id,
                            mode=mode_kind,
                            round=round_no,
                            slot=slot,
                            constraint_set=cs,
                            instruction=instruction,
                            stream_seed=stream_seed,
                        )
                    )
        self._write_constraints(records)
        self._write_instructions(records)
        return records

    def _write_constraints(self, records: Sequence[AugmentationRecord]) -> None:
        rows = []
        for r in records:
            row = constraint_set_to_dict(r.constraint_set)
            row.update({"round": r.round, "slot": r.slot})
            rows.append(row)
        _write_jsonl(self.out / "constraints.jsonl", rows)

    def _write_instructions(self, records: Sequence[AugmentationRecord]) -> None:
        rows = [
            instruction_to_dict(
                r.instruction, r.source_id, round=r.round, slot=r.slot, stream_seed=r.stream_seed
            )
            for r in records
        ]
        _write_jsonl(self.out / "instructions.jsonl", rows)

    # -- generate -----------------------------------------------------

    def _params_for(self, record: AugmentationRecord) -> SamplingParams:
        config = self.config
        max_tokens = config.max_tokens
        if max_tokens is None:
            max_tokens = 2 * record.constraint_set.length.upper + 32
        return SamplingParams(
            temperature=config.temperature,
            top_p=config.top_p,
            top_k=config.top_k,
            max_tokens=max_tokens,
            seed=record.stream_seed,
        )

    def generate(self, records: list[AugmentationRecord]) -> list[AugmentationRecord]:
        """Fan generation out over a bounded pool; failures become
        rejected records, never aborts."""

        def worker(record: AugmentationRecord):
            request = GenerationRequest(record.instruction.text, self._params_for(record))
            try:
                return self.backend.inner.generate(request), request, None
            except CodaError as exc:
                return None, request, exc

        with ThreadPoolExecutor(max_workers=max(1, self.config.concurrency)) as pool:
            outcomes = list(pool.map(worker, records))

        for record, (response, request, error) in zip(records, outcomes):
            params = request.params
            entry = {
                "kind": "augmentation",
                "source_id": record.source_id,
                "mode": record.mode,
                "round": record.round,
                "slot": record.slot,
                "prompt": request.prompt,
                "temperature": params.temperature,
                "top_p": params.top_p,
                "top_k": params.top_k,
                "max_tokens": params.max_tokens,
                "seed": params.seed,
            }
            if response is not None:
                record.generation = response.text
                entry["response"] = response.text
                entry["backend"] = response.backend
            else:
                record.reject_reason = f"generation_failed:{type(error).__name__}"
                entry["error"] = str(error)
                logger.warning("generation failed for %s: %s", record.record_id, error)
            self.backend.entries.append(entry)
        _write_jsonl(self.out / "generations.jsonl", self.backend.entries)
        return records

    # -- relabel + validate -------------------------------------------

    def relabel(self, records: list[AugmentationRecord]) -> None:
        for record in records:
            if not record.generation:
                continue
            cs = record.constraint_set
            if self.task is TaskKind.CLASSIFICATION:
                record.payload = relabel_classification(record.generation, cs)
            elif self.task is TaskKind.NER:
                result = relabel_ner(record.generation, cs.entity_clauses)
                if isinstance(result, Reject):
                    record.reject_reason = result.reason
                else:
                    record.payload = result
            else:
                source = self.dataset.by_id(record.source_id)
                result = relabel_qa(record.generation, cs, source.payload.question, source.payload.answer)
                if isinstance(result, Reject):
                    record.reject_reason = result.reason
                else:
                    record.payload = result

    def compute_verdicts(self, records: list[AugmentationRecord]) -> None:
        for record in records:
            if not record.generation:
                continue
            cs = record.constraint_set
            record.verdict = validate_generation(
                record.generation,
                cs.lexical,
                cs.length,
                concept=cs.concept,
                syntactic=cs.syntactic,
                tagger=self.tagger,
            )

    def validate(self, records: list[AugmentationRecord]) -> FaithfulnessReport:
        self.compute_verdicts(records)
        report = faithfulness_report(
            {self.config.dataset_name: [r.verdict for r in records if r.verdict is not None]}
        )
        report.save(self.out / "faithfulness.json")
        return report

    # -- accept + merge -----------------------------------------------

    def merge(self, records: list[AugmentationRecord]) -> Dataset:
        accepted: list[AugmentationRecord] = []
        rejected: list[AugmentationRecord] = []
        for record in records:
            (accepted if accept(record, self.config.accept_policy) else rejected).append(record)
        merged = merge_augmentations(self.dataset, accepted)
        write_dataset(merged, self.out / _AUGMENTED_NAME[self.task])
        rows = []
        for record in rejected:
            reason = record.reject_reason or f"policy:{self.config.accept_policy}"
            rows.append(
                {
                    "id": record.record_id,
                    "source_id": record.source_id,
                    "mode": record.mode,
                    "round": record.round,
                    "slot": record.slot,
                    "reason": reason,
                }
            )
        _write_jsonl(self.out / "rejections.jsonl", rows)
        return merged

    # -- quality metrics ----------------------------------------------

    def quality(self, records: list[AugmentationRecord]) -> QualityReport:
        groups: dict[str, list[str]] = {doc.id: [] for doc in self.dataset}
        for record in records:
            if record.generation:
                groups[record.source_id].append(record.generation)
        report = quality_report(self.dataset, groups, self.config)
        report.save(self.out / "quality.json")
        return report

    # -- everything ---------------------------------------------------

    def run(self) -> PipelineResult:
        analysis = self.analyze()
        records = self.extract(analysis)
        self.generate(records)
        self.relabel(records)
        faithfulness = self.validate(records)
        merged = self.merge(records)
        quality = self.quality(records)
        return PipelineResult(dataset=merged, faithfulness=faithfulness, quality=quality, records=records)

    # -- staged-command support ----------------------------------------

    def load_records(self) -> list[AugmentationRecord]:
        """Rebuild extraction records from constraints.jsonl + instructions.jsonl."""
        constraints: dict[tuple, ConstraintSet] = {}
        for row in _read_jsonl(self.out / "constraints.jsonl"):
            cs = constraint_set_from_dict(row)
            constraints[(row["source_id"], cs.mode.kind, row["round"], row["slot"])] = cs
        records = []
        for row in _read_jsonl(self.out / "instructions.jsonl"):
            key = (row["source_id"], row["mode"], row["round"], row["slot"])
            records.append(
                AugmentationRecord(
                    source_id=row["source_id"],
                    mode=row["mode"],
                    round=row["round"],
                    slot=row["slot"],
                    constraint_set=constraints[key],
                    instruction=instruction_from_dict(row),
                    stream_seed=row.get("stream_seed", 0),
                )
            )
        return records


def quality_report(dataset: Dataset, groups: dict[str, list[str]], config: RunConfig) -> QualityReport:
    """Quality metrics over generation groups; sources with incomplete
    groups (failed generations) are left out rather than aborting."""
    r_expected = config.rounds * (config.novel_slots + config.rephrase_slots)
    complete = [doc for doc in dataset if len(groups.get(doc.id, ())) == r_expected]
    if len(complete) < len(dataset):
        logger.warning("quality metrics cover %d/%d sources with complete groups", len(complete), len(dataset))
    texts = [g for doc in complete for g in groups[doc.id]]
    if config.scorer_url:
        scorer = RemoteScorer(config.scorer_url, timeout=config.timeout)
    else:
        scorer = NGramScorer(order=3, alpha=0.1).fit([d.text for d in dataset])
    if complete and texts:
        return QualityReport(
            perplexity=perplexity(texts, scorer),
            diversity=diversity(complete, groups),
            length_diversity=length_diversity(complete, groups),
            augmentations_per_source=r_expected,
        )
    return QualityReport(math.nan, 0.0, 0.0, r_expected)


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def validate_from_artifacts(out_dir: str | Path, dataset_name: str = "dataset") -> FaithfulnessReport:
    """Recompute faithfulness purely from instructions.jsonl clause maps
    joined with generations.jsonl, writing faithfulness.json."""
    out = Path(out_dir)
    generations: dict[tuple, str] = {}
    for row in _read_jsonl(out / "generations.jsonl"):
        if row.get("kind") == "augmentation" and "response" in row:
            generations[(row["source_id"], row["mode"], row["round"], row["slot"])] = row["response"]
    tagger = RuleBasedTagger()
    verdicts = []
    for row in _read_jsonl(out / "instructions.jsonl"):
        key = (row["source_id"], row["mode"], row["round"], row["slot"])
        if key not in generations:
            continue
        parts = clauses_to_constraints(instruction_from_dict(row).clauses)
        verdicts.append(
            validate_generation(
                generations[key],
                parts["lexical"],
                parts["length"],
                concept=parts.get("concept"),
                syntactic=parts.get("syntactic"),
                tagger=tagger,
            )
        )
    report = faithfulness_report({dataset_name: verdicts})
    report.save(out / "faithfulness.json")
    return report


def metrics_from_artifacts(config: RunConfig) -> QualityReport:
    """Recompute quality metrics from generations.jsonl and the gold
    dataset, writing quality.json."""
    task = TaskKind.parse(config.task)
    dataset = load_dataset(config.dataset_path, config.format or FORMAT_FOR_TASK[task], task)
    out = Path(config.output_dir)
    groups: dict[str, list[str]] = {doc.id: [] for doc in dataset}
    for row in _read_jsonl(out / "generations.jsonl"):
        if row.get("kind") == "augmentation" and "response" in row:
            groups.setdefault(row["source_id"], []).append(row["response"])
    report = quality_report(dataset, groups, config)
    report.save(out / "quality.json")
    return report


def run_augmentation(config: RunConfig) -> PipelineResult:
    """Run the full pipeline per `config`; see the module docstring."""
    return Pipeline(config).run()
