"""Pipeline that turns a single-granularity QA dataset into one with
ordered multi-granularity answers.

Stages, per row: relation allow-list filter, entity extraction from the
relation template, knowledge-graph lookup with smallest-qid
disambiguation, description consistency filtering by an LLM judge,
LLM generation of coarser answers, and cleaning. Rows degrade or drop
individually; a single bad row never aborts the run, and output order
follows input order.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .dataset import EntityRef, QAExample, record_from_example
from .errors import ExtractionError, LevelParseError, ValidationError
from .gateway import Gateway, GenerationRequest
from .kg import KGClient, KGEntity, disambiguate
from .prompts import PromptKind, render_prompt
from .textmatch import normalize

logger = logging.getLogger(__name__)

# Coarse answers derivable from a question template alone; never kept as
# gold levels.
TRIVIAL_ANSWERS = (
    "person",
    "people",
    "human",
    "place",
    "location",
    "country",
    "city",
    "company",
    "organization",
    "university",
    "writer",
    "author",
    "entity",
)

# Relation templates with the inclusion flag; relations whose answers are
# inherently coarse are excluded from enrichment.
DEFAULT_RELATIONS: dict[str, dict[str, object]] = {
    "P17": {"template": "Which country is [X] located in?", "included": False},
    "P19": {"template": "Where was [X] born?", "included": True},
    "P20": {"template": "Where did [X] die?", "included": True},
    "P26": {"template": "Who is [X] married to?", "included": True},
    "P30": {"template": "Which continent is [X] located?", "included": False},
    "P36": {"template": "What is the capital of [X]?", "included": False},
    "P40": {"template": "Who is [X]'s child?", "included": True},
    "P50": {"template": "Who is the author of [X]?", "included": True},
    "P69": {"template": "Where was [X] educated?", "included": True},
    "P106": {"template": "What kind of work does [X] do?", "included": False},
    "P112": {"template": "Who founded [X]?", "included": True},
    "P127": {"template": "Who owns [X]?", "included": True},
    "P131": {"template": "Where is [X] located?", "included": True},
    "P136": {"template": "What type of music does [X] play?", "included": False},
    "P159": {"template": "Where is the headquarter of [X]?", "included": True},
    "P170": {"template": "Who was [X] created by?", "included": True},
    "P175": {"template": "Who performed [X]?", "included": True},
    "P176": {"template": "Which company is [X] produced by?", "included": True},
    "P264": {"template": "What music label is [X] represented by?", "included": True},
    "P276": {"template": "Where is [X] located?", "included": True},
    "P407": {"template": "Which language was [X] written in?", "included": False},
    "P413": {"template": "What position does [X] play?", "included": False},
    "P495": {"template": "Which country was [X] created in?", "included": False},
    "P800": {"template": "What is [X] famous for?", "included": True},
}

_LEVEL_LINE = re.compile(r"^\s*(\d+)::\s*(.+?)\s*$")


class EnrichmentStatus(str, Enum):
    OK = "ok"
    FILTERED_INCONSISTENT = "filtered_inconsistent"
    PARSE_FAILED = "parse_failed"
    MISSING_DESCRIPTION = "missing_description"
    CLEANED_OUT = "cleaned_out"


@dataclass(frozen=True)
class EnrichmentRecord:
    """Intermediate result of enriching one source row."""

    source: QAExample
    question_entity: KGEntity | None = None
    answer_entity: KGEntity | None = None
    generated_levels: tuple[str, ...] = ()
    consistency_score: float | None = None
    status: EnrichmentStatus = EnrichmentStatus.OK


@dataclass
class EnrichConfig:
    relations: Mapping[str, Mapping[str, object]] = field(
        default_factory=lambda: dict(DEFAULT_RELATIONS)
    )
    judge_samples: int = 5
    consistency_threshold: float = 0.5
    blacklist: Sequence[str] = TRIVIAL_ANSWERS
    generation_max_tokens: int = 256
    judge_max_tokens: int = 8


def load_relations(path: str | Path) -> dict[str, dict[str, object]]:
    """Load a relation allow-list file: {relation: {template, included}}."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValidationError(f"relations file {path} must be a JSON object")
    return data


def extract_entities(question: str, template: str) -> str:
    """Surface form filling the [X] slot of a relation template."""
    if template.count("[X]") != 1:
        raise ExtractionError(f"template {template!r} must contain exactly one [X] slot")
    prefix, suffix = template.split("[X]")
    if (
        not question.startswith(prefix)
        or not question.endswith(suffix)
        or len(question) <= len(prefix) + len(suffix)
    ):
        raise ExtractionError(f"question {question!r} does not match template {template!r}")
    return question[len(prefix) : len(question) - len(suffix)]


def _blacklist_keys(blacklist: Sequence[str]) -> frozenset[str]:
    return frozenset(normalize(entry).text for entry in blacklist)


def parse_levels(output: str) -> list[str]:
    """Parse '<int>:: <text>' lines from raw LLM output.

    Indices must start at 1 and be consecutive; lines that do not match
    the format are ignored. Returns the texts in index order.
    """
    found: list[tuple[int, str]] = []
    for line in output.splitlines():
        match = _LEVEL_LINE.match(line)
        if match:
            found.append((int(match.group(1)), match.group(2)))
    if not found:
        raise LevelParseError("no '<int>:: answer' lines in output")
    found.sort(key=lambda pair: pair[0])
    indices = [index for index, _ in found]
    if indices != list(range(1, len(indices) + 1)):
        raise LevelParseError(f"answer indices {indices} are not consecutive from 1")
    return [text for _, text in found]


def generate_levels(
    question: str,
    answer: str,
    question_description: str,
    answer_description: str,
    llm: Gateway,
    blacklist: Sequence[str] = TRIVIAL_ANSWERS,
    max_tokens: int = 256,
) -> tuple[str, ...]:
    """One greedy LLM call producing the ordered coarser-answer list.

    Index consecutiveness is checked on the raw output; trivial-blacklist
    answers are dropped afterwards, as cleaning.
    """
    prompt = render_prompt(
        PromptKind.ENRICHMENT,
        {
            "question": question,
            "answer": answer,
            "question_description": question_description,
            "answer_description": answer_description,
        },
    )
    output = llm.generate(
        GenerationRequest(
            prompt=prompt, temperature=0.0, num_samples=1, max_tokens=max_tokens, stop_sequences=()
        )
    )[0]
    parsed = parse_levels(output)
    keys = _blacklist_keys(blacklist)
    return tuple(text for text in parsed if normalize(text).text not in keys)


def consistency_score(
    question: str,
    description: str,
    llm: Gateway,
    k: int = 5,
    max_tokens: int = 8,
) -> float:
    """Fraction of 'No' judgments over k unit-temperature judge samples.

    A judgment that normalizes to neither yes nor no counts as No.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    prompt = render_prompt(
        PromptKind.CONSISTENCY_JUDGE, {"question": question, "description": description}
    )
    judgments = llm.generate(
        GenerationRequest(prompt=prompt, temperature=1.0, num_samples=k, max_tokens=max_tokens)
    )
    yes = sum(1 for judgment in judgments if normalize(judgment).text == "yes")
    return (k - yes) / k


def _unique_ground_truth(example: QAExample) -> str | None:
    """The single original answer, or None when the row is ambiguous."""
    if example.num_levels != 1 or len(example.answers[0]) != 1:
        return None
    return example.answers[0][0]


def clean(
    records: Sequence[EnrichmentRecord],
    blacklist: Sequence[str] = TRIVIAL_ANSWERS,
) -> tuple[list[QAExample], dict[str, object]]:
    """Turn enrichment records into validated examples plus a removal report.

    Rows that failed the consistency filter or answer parsing are dropped;
    rows without a unique ground truth are dropped; rows lacking usable
    descriptions degrade to one-level examples. Within kept rows,
    normalized-duplicate levels are removed keeping the finest, and
    trivial-blacklist answers are removed (level 1, the original answer,
    always survives).
    """
    keys = _blacklist_keys(blacklist)
    examples: list[QAExample] = []
    dropped: dict[str, int] = {}
    levels_removed = {"duplicate": 0, "trivial": 0}

    def drop(reason: str):
        dropped[reason] = dropped.get(reason, 0) + 1

    for record in records:
        if record.status in (EnrichmentStatus.FILTERED_INCONSISTENT, EnrichmentStatus.PARSE_FAILED):
            drop(record.status.value)
            continue
        if record.status is EnrichmentStatus.CLEANED_OUT:
            drop("non_unique_ground_truth")
            continue
        original = _unique_ground_truth(record.source)
        if original is None:
            drop("non_unique_ground_truth")
            continue

        if record.status is EnrichmentStatus.MISSING_DESCRIPTION:
            raw_levels: Sequence[str] = (original,)
        else:
            raw_levels = record.generated_levels or (original,)
        if raw_levels and normalize(raw_levels[0]).text == normalize(original).text:
            rest = raw_levels[1:]
        else:
            rest = raw_levels

        levels = [original]
        seen = {normalize(original).text}
        for candidate in rest:
            key = normalize(candidate).text
            if key in seen:
                levels_removed["duplicate"] += 1
                continue
            if key in keys:
                levels_removed["trivial"] += 1
                continue
            seen.add(key)
            levels.append(candidate)

        source = record.source
        provenance = {
            "status": record.status.value,
            "question_qid": record.question_entity.qid if record.question_entity else None,
            "question_description": record.question_entity.description
            if record.question_entity
            else None,
            "answer_qid": record.answer_entity.qid if record.answer_entity else None,
            "answer_description": record.answer_entity.description
            if record.answer_entity
            else None,
            "consistency_score": record.consistency_score,
        }
        examples.append(
            QAExample(
                id=source.id,
                question=source.question,
                relation=source.relation,
                entity=EntityRef(
                    surface=source.entity.surface,
                    qid=record.question_entity.qid if record.question_entity else source.entity.qid,
                ),
                answers=tuple((level,) for level in levels),
                popularity=source.popularity,
                provenance=provenance,
            )
        )

    report = {
        "rows_in": len(records),
        "rows_out": len(examples),
        "dropped": dict(sorted(dropped.items())),
        "levels_removed": levels_removed,
    }
    return examples, report


def _usable_description(entity: KGEntity | None) -> bool:
    return entity is not None and bool(entity.description.strip())


def enrich_row(
    example: QAExample,
    template: str,
    kg: KGClient,
    llm: Gateway,
    config: EnrichConfig,
) -> EnrichmentRecord:
    """Run the per-row enrichment stages and record the outcome."""
    original = _unique_ground_truth(example)
    if original is None:
        return EnrichmentRecord(source=example, status=EnrichmentStatus.CLEANED_OUT)

    try:
        surface = extract_entities(example.question, template)
    except ExtractionError:
        surface = example.entity.surface

    question_entity = _lookup(kg, surface)
    answer_entity = _lookup(kg, original)
    if not _usable_description(question_entity) or not _usable_description(answer_entity):
        return EnrichmentRecord(
            source=example,
            question_entity=question_entity,
            answer_entity=answer_entity,
            status=EnrichmentStatus.MISSING_DESCRIPTION,
        )

    score = max(
        consistency_score(
            example.question, question_entity.description, llm, config.judge_samples,
            max_tokens=config.judge_max_tokens,
        ),
        consistency_score(
            example.question, answer_entity.description, llm, config.judge_samples,
            max_tokens=config.judge_max_tokens,
        ),
    )
    if score > config.consistency_threshold:
        return EnrichmentRecord(
            source=example,
            question_entity=question_entity,
            answer_entity=answer_entity,
            consistency_score=score,
            status=EnrichmentStatus.FILTERED_INCONSISTENT,
        )

    try:
        generated = generate_levels(
            example.question,
            original,
            question_entity.description,
            answer_entity.description,
            llm,
            blacklist=config.blacklist,
            max_tokens=config.generation_max_tokens,
        )
    except LevelParseError:
        return EnrichmentRecord(
            source=example,
            question_entity=question_entity,
            answer_entity=answer_entity,
            consistency_score=score,
            status=EnrichmentStatus.PARSE_FAILED,
        )

    # Pin level 1 to the source answer verbatim; the model is asked to
    # echo it, so drop its first level when it does.
    if generated and normalize(generated[0]).text == normalize(original).text:
        levels = (original,) + generated[1:]
    else:
        levels = (original,) + generated

    return EnrichmentRecord(
        source=example,
        question_entity=question_entity,
        answer_entity=answer_entity,
        generated_levels=levels,
        consistency_score=score,
        status=EnrichmentStatus.OK,
    )


def _lookup(kg: KGClient, surface: str) -> KGEntity | None:
    candidates = kg.search(surface)
    if not candidates:
        return None
    entity = disambiguate(candidates)
    if not entity.description.strip():
        description = kg.describe(entity.qid)
        if description.strip():
            entity = KGEntity(qid=entity.qid, label=entity.label, description=description)
    return entity


def enrich_dataset(
    input_path: str | Path,
    output_path: str | Path,
    kg: KGClient,
    llm: Gateway,
    config: EnrichConfig | None = None,
) -> dict[str, object]:
    """End-to-end enrichment of a JSONL dataset file.

    Writes the enriched dataset to output_path (input order preserved)
    and returns a removal/keep report. Per-row problems are recorded in
    the report; they never abort the run.
    """
    from .dataset import load_dataset  # local import keeps module load light

    config = config or EnrichConfig()
    load_errors: list[str] = []
    rows = load_dataset(input_path, strict=False, errors=load_errors)
    for message in load_errors:
        logger.warning("skipping input row: %s", message)

    records: list[EnrichmentRecord] = []
    excluded_relations = 0
    for example in rows:
        relation = config.relations.get(example.relation)
        if relation is None or not relation.get("included", False):
            excluded_relations += 1
            continue
        records.append(enrich_row(example, str(relation["template"]), kg, llm, config))

    examples, clean_report = clean(records, blacklist=config.blacklist)

    output_path = Path(output_path)
    with open(output_path, "w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(json.dumps(record_from_example(example), ensure_ascii=False))
            handle.write("\n")

    status_counts: dict[str, int] = {}
    for record in records:
        status_counts[record.status.value] = status_counts.get(record.status.value, 0) + 1

    return {
        "rows_loaded": len(rows),
        "load_errors": len(load_errors),
        "excluded_relations": excluded_relations,
        "status_counts": dict(sorted(status_counts.items())),
        **clean_report,
    }
