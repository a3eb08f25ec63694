"""Dataset parsing, validation, sampling, and serialization.

Three task families are supported, each tied to one on-disk format:

* classification -- JSON lines: {"id": optional, "text": ..., "label": ...}
* NER            -- CoNLL: whitespace-separated token/BIO-tag columns,
                    blank line between sentences, "-DOCSTART-" ignored
* QA             -- SQuAD-shaped JSON (data -> paragraphs -> context,
                    qas -> question / answers[0].text / answer_start)

All values are immutable after construction and validated eagerly:
malformed records raise ParseError instead of being skipped.
"""

from __future__ import annotations

import enum
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence, Union

from .errors import InsufficientData, ParseError, PayloadInvalid, TaskMismatch

__all__ = [
    "TaskKind",
    "EntitySpan",
    "ClassificationPayload",
    "NerPayload",
    "QaPayload",
    "Document",
    "Dataset",
    "load_dataset",
    "write_dataset",
    "sample_low_resource",
    "merge_documents",
]


class TaskKind(enum.Enum):
    CLASSIFICATION = "classification"
    NER = "ner"
    QA = "qa"

    @classmethod
    def parse(cls, value: "TaskKind | str") -> "TaskKind":
        if isinstance(value, TaskKind):
            return value
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(f"unknown task kind: {value!r}") from None


FORMAT_FOR_TASK = {
    TaskKind.CLASSIFICATION: "jsonl",
    TaskKind.NER: "conll",
    TaskKind.QA: "squad",
}


@dataclass(frozen=True)
class EntitySpan:
    start_token: int
    end_token: int  # exclusive
    entity_type: str

    def __post_init__(self):
        if not (0 <= self.start_token < self.end_token):
            raise ValueError(f"bad span bounds [{self.start_token}, {self.end_token})")


@dataclass(frozen=True)
class ClassificationPayload:
    label: str


@dataclass(frozen=True)
class NerPayload:
    tokens: tuple[str, ...]
    spans: tuple[EntitySpan, ...]

    def __post_init__(self):
        last_end = 0
        for span in sorted(self.spans, key=lambda s: s.start_token):
            if span.start_token < last_end:
                raise ValueError(f"overlapping spans at token {span.start_token}")
            if span.end_token > len(self.tokens):
                raise ValueError(f"span [{span.start_token}, {span.end_token}) exceeds {len(self.tokens)} tokens")
            last_end = span.end_token

    def span_surface(self, span: EntitySpan) -> str:
        return " ".join(self.tokens[span.start_token : span.end_token])


@dataclass(frozen=True)
class QaPayload:
    question: str
    answer: str
    answer_start: int


Payload = Union[ClassificationPayload, NerPayload, QaPayload]


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    payload: Payload


_PAYLOAD_FOR_TASK = {
    TaskKind.CLASSIFICATION: ClassificationPayload,
    TaskKind.NER: NerPayload,
    TaskKind.QA: QaPayload,
}


@dataclass(frozen=True)
class Dataset:
    task: TaskKind
    documents: tuple[Document, ...]
    label_inventory: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.documents:
            raise ValueError("a dataset must contain at least one document")
        seen: set[str] = set()
        expected = _PAYLOAD_FOR_TASK[self.task]
        for doc in self.documents:
            if doc.id in seen:
                raise ValueError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)
            if not isinstance(doc.payload, expected):
                raise ValueError(f"document {doc.id!r} has a {type(doc.payload).__name__} payload for task {self.task.value}")
            if isinstance(doc.payload, ClassificationPayload) and doc.payload.label not in self.label_inventory:
                raise ValueError(f"document {doc.id!r} label {doc.payload.label!r} not in inventory")
            if isinstance(doc.payload, NerPayload):
                for span in doc.payload.spans:
                    if span.entity_type not in self.label_inventory:
                        raise ValueError(f"document {doc.id!r} entity type {span.entity_type!r} not in inventory")
            if isinstance(doc.payload, QaPayload):
                pl = doc.payload
                if doc.text[pl.answer_start : pl.answer_start + len(pl.answer)] != pl.answer:
                    raise ValueError(f"document {doc.id!r}: answer does not occur at offset {pl.answer_start}")

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def by_id(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)


# ---------------------------------------------------------------------------
# readers


def _load_jsonl(path: Path) -> tuple[list[Document], set[str]]:
    docs: list[Document] = []
    labels: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            locator = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(locator, f"invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise ParseError(locator, "record is not a JSON object")
            text = record.get("text")
            label = record.get("label")
            if not isinstance(text, str) or not text.strip():
                raise ParseError(locator, "missing or empty 'text' field")
            if not isinstance(label, str) or not label:
                raise ParseError(locator, "missing or empty 'label' field")
            doc_id = record.get("id")
            if doc_id is None:
                doc_id = f"doc{len(docs)}"
            elif not isinstance(doc_id, str):
                raise ParseError(locator, "'id' must be a string when present")
            labels.add(label)
            docs.append(Document(id=doc_id, text=text, payload=ClassificationPayload(label)))
    return docs, labels


def _spans_from_bio(tags: Sequence[str], locator: str) -> list[EntitySpan]:
    spans: list[EntitySpan] = []
    current: tuple[int, str] | None = None  # (start, type)
    for i, tag in enumerate(tags):
        if tag == "O":
            if current:
                spans.append(EntitySpan(current[0], i, current[1]))
                current = None
            continue
        if len(tag) < 3 or tag[1] != "-" or tag[0] not in "BI":
            raise ParseError(locator, f"malformed BIO tag {tag!r} at token {i}")
        marker, etype = tag[0], tag[2:]
        if marker == "B":
            if current:
                spans.append(EntitySpan(current[0], i, current[1]))
            current = (i, etype)
        else:  # I-
            if current is None or current[1] != etype:
                raise ParseError(locator, f"I-{etype} at token {i} without a preceding B-{etype}/I-{etype}")
    if current:
        spans.append(EntitySpan(current[0], len(tags), current[1]))
    return spans


def _load_conll(path: Path) -> tuple[list[Document], set[str]]:
    docs: list[Document] = []
    types: set[str] = set()
    tokens: list[str] = []
    tags: list[str] = []
    sentence_start = 1

    def flush(locator: str):
        nonlocal tokens, tags
        if not tokens:
            return
        spans = _spans_from_bio(tags, locator)
        types.update(s.entity_type for s in spans)
        docs.append(
            Document(
                id=f"doc{len(docs)}",
                text=" ".join(tokens),
                payload=NerPayload(tuple(tokens), tuple(spans)),
            )
        )
        tokens, tags = [], []

    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if stripped.startswith("-DOCSTART-"):
                continue
            if not stripped:
                flush(f"{path}:{sentence_start}")
                sentence_start = lineno + 1
                continue
            columns = stripped.split()
            if len(columns) < 2:
                raise ParseError(f"{path}:{lineno}", f"expected token and tag columns, got {stripped!r}")
            if not tokens:
                sentence_start = lineno
            tokens.append(columns[0])
            tags.append(columns[-1])
    flush(f"{path}:{sentence_start}")
    return docs, types


def _load_squad(path: Path) -> tuple[list[Document], set[str]]:
    locator = str(path)
    try:
        payload = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(locator, f"invalid JSON: {exc}") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("data"), list):
        raise ParseError(locator, "expected a top-level object with a 'data' list")
    docs: list[Document] = []
    for ai, article in enumerate(payload["data"]):
        for pi, paragraph in enumerate(article.get("paragraphs", [])):
            context = paragraph.get("context")
            where = f"{locator}#data[{ai}].paragraphs[{pi}]"
            if not isinstance(context, str) or not context:
                raise ParseError(where, "missing paragraph context")
            for qi, qa in enumerate(paragraph.get("qas", [])):
                qwhere = f"{where}.qas[{qi}]"
                question = qa.get("question")
                answers = qa.get("answers")
                if not isinstance(question, str) or not question:
                    raise ParseError(qwhere, "missing question")
                if not answers:
                    raise ParseError(qwhere, "missing answers")
                answer = answers[0].get("text")
                start = answers[0].get("answer_start")
                if not isinstance(answer, str) or not isinstance(start, int):
                    raise ParseError(qwhere, "answer must have 'text' and integer 'answer_start'")
                if context[start : start + len(answer)] != answer:
                    raise ParseError(qwhere, f"answer text does not occur at offset {start}")
                doc_id = qa.get("id") or f"doc{len(docs)}"
                docs.append(Document(id=str(doc_id), text=context, payload=QaPayload(question, answer, start)))
    return docs, set()


_READERS = {"jsonl": _load_jsonl, "conll": _load_conll, "squad": _load_squad}
_TASK_FOR_FORMAT = {"jsonl": TaskKind.CLASSIFICATION, "conll": TaskKind.NER, "squad": TaskKind.QA}


def load_dataset(path: str | Path, format: str, task: TaskKind | str) -> Dataset:
    """Parse `path` under the declared format into a validated Dataset."""
    task = TaskKind.parse(task)
    if format not in _READERS:
        raise ValueError(f"unknown format {format!r}; expected one of {sorted(_READERS)}")
    if _TASK_FOR_FORMAT[format] is not task:
        raise TaskMismatch(f"format {format!r} stores {_TASK_FOR_FORMAT[format].value} data, not {task.value}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    docs, labels = _READERS[format](path)
    if not docs:
        raise ParseError(str(path), "file contains no records")
    return Dataset(task=task, documents=tuple(docs), label_inventory=frozenset(labels))


# ---------------------------------------------------------------------------
# writers


def _bio_tags(payload: NerPayload) -> list[str]:
    tags = ["O"] * len(payload.tokens)
    for span in payload.spans:
        tags[span.start_token] = f"B-{span.entity_type}"
        for i in range(span.start_token + 1, span.end_token):
            tags[i] = f"I-{span.entity_type}"
    return tags


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    """Serialize in the task's native format (see module docstring)."""
    path = Path(path)
    if dataset.task is TaskKind.CLASSIFICATION:
        with path.open("w", encoding="utf-8") as handle:
            for doc in dataset:
                record = {"id": doc.id, "text": doc.text, "label": doc.payload.label}
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    elif dataset.task is TaskKind.NER:
        with path.open("w", encoding="utf-8") as handle:
            for doc in dataset:
                for token, tag in zip(doc.payload.tokens, _bio_tags(doc.payload)):
                    handle.write(f"{token} {tag}\n")
                handle.write("\n")
    else:
        data = []
        for doc in dataset:
            pl = doc.payload
            data.append(
                {
                    "title": doc.id,
                    "paragraphs": [
                        {
                            "context": doc.text,
                            "qas": [
                                {
                                    "id": doc.id,
                                    "question": pl.question,
                                    "answers": [{"text": pl.answer, "answer_start": pl.answer_start}],
                                }
                            ],
                        }
                    ],
                }
            )
        path.write_text(json.dumps({"version": "1.1", "data": data}, ensure_ascii=False, indent=1), "utf-8")


# ---------------------------------------------------------------------------
# sampling and merging


def _stratified_allocation(counts: dict[str, int], n: int) -> dict[str, int]:
    # proportional allocation with a guaranteed minimum of one per label,
    # remainders settled deterministically by label order
    total = sum(counts.values())
    labels = sorted(counts)
    quota = {lab: n * counts[lab] / total for lab in labels}
    alloc = {lab: min(counts[lab], max(1, math.floor(quota[lab]))) for lab in labels}
    while sum(alloc.values()) < n:
        candidates = [lab for lab in labels if alloc[lab] < counts[lab]]
        candidates.sort(key=lambda lab: (-(quota[lab] - alloc[lab]), lab))
        alloc[candidates[0]] += 1
    while sum(alloc.values()) > n:
        candidates = [lab for lab in labels if alloc[lab] > 1]
        candidates.sort(key=lambda lab: (quota[lab] - alloc[lab], lab))
        alloc[candidates[0]] -= 1
    return alloc


def sample_low_resource(dataset: Dataset, n: int, seed: int) -> Dataset:
    """Deterministic subsample preserving document order.

    Classification samples are stratified whenever n covers the label
    inventory (every label keeps at least one document); NER/QA use
    simple random sampling.
    """
    if n > len(dataset):
        raise InsufficientData(f"asked for {n} documents, dataset has {len(dataset)}")
    if n == len(dataset):
        return dataset
    rng = random.Random(seed)
    if dataset.task is TaskKind.CLASSIFICATION and n >= len(dataset.label_inventory):
        by_label: dict[str, list[int]] = {}
        for i, doc in enumerate(dataset):
            by_label.setdefault(doc.payload.label, []).append(i)
        alloc = _stratified_allocation({lab: len(ids) for lab, ids in by_label.items()}, n)
        chosen: list[int] = []
        for label in sorted(by_label):
            chosen.extend(rng.sample(by_label[label], alloc[label]))
    else:
        chosen = rng.sample(range(len(dataset)), n)
    docs = tuple(dataset.documents[i] for i in sorted(chosen))
    return Dataset(task=dataset.task, documents=docs, label_inventory=dataset.label_inventory)


def merge_documents(dataset: Dataset, additions: Sequence[Document]) -> Dataset:
    """Gold documents followed by accepted augmentations, ids kept unique."""
    seen = {doc.id for doc in dataset}
    for doc in additions:
        if doc.payload is None:
            raise PayloadInvalid(f"augmentation {doc.id!r} has no reconstructed payload")
        if doc.id in seen:
            raise ValueError(f"duplicate document id {doc.id!r} in merge")
        seen.add(doc.id)
    return Dataset(
        task=dataset.task,
        documents=dataset.documents + tuple(additions),
        label_inventory=dataset.label_inventory,
    )
