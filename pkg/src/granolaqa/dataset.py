"""Domain types and JSONL serialization for multi-granularity QA data.

Dataset files are UTF-8 JSONL, one example per line:

    {"id": ..., "question": ..., "relation": ..., "entity": {"surface": ..., "qid"?},
     "answers": [["fine", ...], ["coarser", ...], ...], "popularity"?, "provenance"?}

Answer levels are ordered fine to coarse; level 1 holds the original
dataset answers. Unknown extra fields are preserved opaquely.

Predictions files are JSONL with "id", "method", and either "answer" or
"idk": true, plus optional "samples" and "metadata".
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import DatasetParseError, ValidationError
from .textmatch import normalize

QID_PATTERN = re.compile(r"^Q[0-9]+$")

_EXAMPLE_KEYS = ("id", "question", "relation", "entity", "answers", "popularity", "provenance")
_PREDICTION_KEYS = ("id", "method", "answer", "idk", "samples", "metadata")


@dataclass(frozen=True)
class EntityRef:
    """The question entity as it appears in the source dataset."""

    surface: str
    qid: str | None = None


@dataclass(frozen=True)
class QAExample:
    """One question with an ordered list of multi-granularity answer levels."""

    id: str
    question: str
    relation: str
    entity: EntityRef
    answers: tuple[tuple[str, ...], ...]
    popularity: int | None = None
    provenance: Mapping[str, Any] | None = None
    extra: Mapping[str, Any] = field(default_factory=dict)

    @property
    def num_levels(self) -> int:
        return len(self.answers)


@dataclass(frozen=True)
class Prediction:
    """A method's answer for one example, or an explicit abstention."""

    example_id: str
    method: str
    answer: str | None = None
    idk: bool = False
    samples: tuple[str, ...] | None = None
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if (self.answer is None) != self.idk:
            raise ValidationError(
                "exactly one of answer / idk must be set", field="answer"
            )


@dataclass(frozen=True)
class CorpusStats:
    num_examples: int
    num_relations: int
    mean_answers_per_question: float
    answer_count_histogram: Mapping[int, float]


def validate_example(example: QAExample) -> list[str]:
    """Return invariant violations for one example (empty list if valid)."""
    issues: list[str] = []
    if not example.id:
        issues.append("id: must be a non-empty string")
    if not example.entity.surface:
        issues.append("entity.surface: must be a non-empty string")
    if example.entity.qid is not None and not QID_PATTERN.match(example.entity.qid):
        issues.append(f"entity.qid: {example.entity.qid!r} does not match ^Q[0-9]+$")
    if example.popularity is not None and example.popularity < 0:
        issues.append("popularity: must be >= 0")

    if not example.answers:
        issues.append("answers: must have at least one level")
    seen: dict[str, str] = {}
    for level_no, level in enumerate(example.answers, start=1):
        if not level:
            issues.append(f"answers: level {level_no} is empty")
        for alias in level:
            if not isinstance(alias, str) or not alias:
                issues.append(f"answers: level {level_no} contains an empty answer")
                continue
            key = normalize(alias).text
            if key in seen:
                issues.append(
                    f"answers: {alias!r} duplicates {seen[key]!r} after normalization"
                )
            else:
                seen[key] = alias
    return issues


def example_from_record(record: Mapping[str, Any]) -> QAExample:
    """Build a QAExample from a parsed JSON record.

    Raises ValidationError naming the field on structural problems.
    Invariants beyond structure are checked by validate_example.
    """
    if not isinstance(record, Mapping):
        raise ValidationError("record must be a JSON object")
    for name in ("id", "question", "relation"):
        value = record.get(name)
        if not isinstance(value, str):
            raise ValidationError(f"{name}: required string field", field=name)
    entity_rec = record.get("entity")
    if not isinstance(entity_rec, Mapping) or not isinstance(entity_rec.get("surface"), str):
        raise ValidationError("entity.surface: required string field", field="entity")
    qid = entity_rec.get("qid")
    if qid is not None and not isinstance(qid, str):
        raise ValidationError("entity.qid: must be a string", field="entity")

    answers_rec = record.get("answers")
    if not isinstance(answers_rec, Sequence) or isinstance(answers_rec, (str, bytes)):
        raise ValidationError("answers: required array of arrays", field="answers")
    answers = []
    for level in answers_rec:
        if not isinstance(level, Sequence) or isinstance(level, (str, bytes)):
            raise ValidationError("answers: each level must be an array", field="answers")
        if not all(isinstance(alias, str) for alias in level):
            raise ValidationError("answers: answers must be strings", field="answers")
        answers.append(tuple(level))

    popularity = record.get("popularity")
    if popularity is not None and (isinstance(popularity, bool) or not isinstance(popularity, int)):
        raise ValidationError("popularity: must be an integer", field="popularity")
    provenance = record.get("provenance")
    if provenance is not None and not isinstance(provenance, Mapping):
        raise ValidationError("provenance: must be an object", field="provenance")

    extra = {k: v for k, v in record.items() if k not in _EXAMPLE_KEYS}
    return QAExample(
        id=record["id"],
        question=record["question"],
        relation=record["relation"],
        entity=EntityRef(surface=entity_rec["surface"], qid=qid),
        answers=tuple(answers),
        popularity=popularity,
        provenance=dict(provenance) if provenance is not None else None,
        extra=extra,
    )


def record_from_example(example: QAExample) -> dict[str, Any]:
    record: dict[str, Any] = {
        "id": example.id,
        "question": example.question,
        "relation": example.relation,
        "entity": {"surface": example.entity.surface},
        "answers": [list(level) for level in example.answers],
    }
    if example.entity.qid is not None:
        record["entity"]["qid"] = example.entity.qid
    if example.popularity is not None:
        record["popularity"] = example.popularity
    if example.provenance is not None:
        record["provenance"] = dict(example.provenance)
    for key in sorted(example.extra):
        record[key] = example.extra[key]
    return record


def load_dataset(
    path: str | Path,
    strict: bool = True,
    errors: list[str] | None = None,
) -> list[QAExample]:
    """Load a JSONL dataset file.

    In strict mode the first malformed line or invariant violation raises.
    Otherwise invalid rows are skipped and, when ``errors`` is given, a
    message per bad row (with its line number) is appended to it.
    """
    examples: list[QAExample] = []
    seen_ids: set[str] = set()

    def report(line_number: int, message: str, exc: Exception | None = None):
        if strict:
            if isinstance(exc, DatasetParseError):
                raise exc
            raise ValidationError(f"line {line_number}: {message}") from exc
        if errors is not None:
            errors.append(f"line {line_number}: {message}")

    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                report(
                    line_number,
                    f"malformed JSON ({exc.msg})",
                    DatasetParseError(f"malformed JSON ({exc.msg})", line_number),
                )
                continue
            try:
                example = example_from_record(record)
            except ValidationError as exc:
                report(line_number, str(exc), exc)
                continue
            issues = validate_example(example)
            if example.id in seen_ids:
                issues.append(f"id: duplicate id {example.id!r}")
            if issues:
                report(line_number, "; ".join(issues))
                continue
            seen_ids.add(example.id)
            examples.append(example)
    return examples


def write_dataset(examples: Iterable[QAExample], path: str | Path) -> None:
    """Write examples as JSONL; round-trips through load_dataset."""
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(json.dumps(record_from_example(example), ensure_ascii=False))
            handle.write("\n")


def prediction_from_record(record: Mapping[str, Any]) -> Prediction:
    if not isinstance(record, Mapping):
        raise ValidationError("record must be a JSON object")
    example_id = record.get("id")
    method = record.get("method")
    if not isinstance(example_id, str) or not isinstance(method, str):
        raise ValidationError("id and method are required string fields", field="id")
    idk = bool(record.get("idk", False))
    answer = record.get("answer")
    if answer is not None and not isinstance(answer, str):
        raise ValidationError("answer: must be a string", field="answer")
    samples = record.get("samples")
    if samples is not None:
        if not isinstance(samples, Sequence) or isinstance(samples, (str, bytes)):
            raise ValidationError("samples: must be an array of strings", field="samples")
        samples = tuple(str(s) for s in samples)
    metadata = record.get("metadata") or {}
    if not isinstance(metadata, Mapping):
        raise ValidationError("metadata: must be an object", field="metadata")
    return Prediction(
        example_id=example_id,
        method=method,
        answer=answer,
        idk=idk,
        samples=samples,
        metadata=dict(metadata),
    )


def record_from_prediction(prediction: Prediction) -> dict[str, Any]:
    record: dict[str, Any] = {"id": prediction.example_id, "method": prediction.method}
    if prediction.idk:
        record["idk"] = True
    else:
        record["answer"] = prediction.answer
    if prediction.samples is not None:
        record["samples"] = list(prediction.samples)
    if prediction.metadata:
        record["metadata"] = dict(prediction.metadata)
    return record


def load_predictions(path: str | Path) -> list[Prediction]:
    predictions: list[Prediction] = []
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(f"malformed JSON ({exc.msg})", line_number) from exc
            try:
                predictions.append(prediction_from_record(record))
            except ValidationError as exc:
                raise ValidationError(f"line {line_number}: {exc}", field=exc.field) from exc
    return predictions


def write_predictions(predictions: Iterable[Prediction], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for prediction in predictions:
            handle.write(json.dumps(record_from_prediction(prediction), ensure_ascii=False))
            handle.write("\n")


def compute_stats(examples: Sequence[QAExample]) -> CorpusStats:
    """Exact corpus counts plus a histogram over answer-level counts."""
    if not examples:
        return CorpusStats(0, 0, 0.0, {})
    counts = [example.num_levels for example in examples]
    histogram = {
        levels: sum(1 for c in counts if c == levels) / len(counts)
        for levels in sorted(set(counts))
    }
    return CorpusStats(
        num_examples=len(examples),
        num_relations=len({example.relation for example in examples}),
        mean_answers_per_question=sum(counts) / len(counts),
        answer_count_histogram=histogram,
    )
