"""Multi-granularity accuracy and informativeness metrics.

A prediction is matched against the ordered answer levels of an example:
the match index is the smallest level containing an answer whose token-F1
with the prediction reaches the threshold tau. GRANOLA accuracy is the
indicator that any level matched; informativeness decays exponentially
with the matched level; standard accuracy only consults level 1, so
GRANOLA accuracy dominates it by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

from .dataset import Prediction, QAExample
from .errors import EvaluationError, ValidationError
from .textmatch import normalize, token_f1

DEFAULT_TAU = 0.8
DEFAULT_LAMBDA = math.log(2.0)
DEFAULT_IDK_MARKERS = ("idk", "i dont know")

IDK_BUCKET = "idk"
ERROR_BUCKET = "error"


@dataclass(frozen=True)
class EvalConfig:
    """Threshold, decay rate, and abstention markers used for evaluation."""

    tau: float = DEFAULT_TAU
    lambda_: float = DEFAULT_LAMBDA
    idk_markers: frozenset[str] = frozenset(DEFAULT_IDK_MARKERS)

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValidationError("tau must be in (0, 1]", field="tau")
        if self.lambda_ < 0.0:
            raise ValidationError("lambda must be >= 0", field="lambda")
        if not self.idk_markers:
            raise ValidationError("idk_markers must be non-empty", field="idk_markers")
        # markers are compared on normalized form
        object.__setattr__(
            self,
            "idk_markers",
            frozenset(normalize(marker).text for marker in self.idk_markers),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "tau": self.tau,
            "lambda": self.lambda_,
            "idk_markers": sorted(self.idk_markers),
        }


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching a prediction against an example's levels."""

    matched_level: int | None
    matched_answer: str | None
    score: float

    @property
    def matched(self) -> bool:
        return self.matched_level is not None


@dataclass(frozen=True)
class MetricsReport:
    """Corpus-level metrics, histogram, and optional nested strata."""

    n_total: int
    n_idk: int
    n_nonidk: int
    accuracy_standard: float
    accuracy_granola: float
    selective_accuracy_granola: float
    mean_informativeness: float
    knowledge_gap: float
    match_level_histogram: Mapping[str, float] = field(default_factory=dict)
    strata_key: str | None = None
    strata: Mapping[str, "MetricsReport"] | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "n_total": self.n_total,
            "n_idk": self.n_idk,
            "n_nonidk": self.n_nonidk,
            "accuracy_standard": self.accuracy_standard,
            "accuracy_granola": self.accuracy_granola,
            "selective_accuracy_granola": self.selective_accuracy_granola,
            "mean_informativeness": self.mean_informativeness,
            "knowledge_gap": self.knowledge_gap,
            "match_level_histogram": dict(self.match_level_histogram),
        }
        if self.strata_key is not None:
            out["strata_key"] = self.strata_key
        if self.strata is not None:
            out["strata"] = {key: report.to_dict() for key, report in self.strata.items()}
        return out


def is_idk(text: str | None, config: EvalConfig) -> bool:
    """True iff the text's normalization equals a configured marker."""
    if text is None:
        return False
    return normalize(text).text in config.idk_markers


def find_match_index(prediction: str, example: QAExample, tau: float = DEFAULT_TAU) -> MatchResult:
    """Smallest level with a token-F1 match at threshold tau.

    Within a level the answer with the highest F1 is reported; equal-F1
    ties go to the first answer in stored order.
    """
    for level_no, level in enumerate(example.answers, start=1):
        best_score = 0.0
        best_answer = None
        for answer in level:
            score = token_f1(prediction, answer)
            if score > best_score:
                best_score = score
                best_answer = answer
        if best_score >= tau:
            return MatchResult(level_no, best_answer, best_score)
    return MatchResult(None, None, 0.0)


def granola_accuracy(match: MatchResult) -> int:
    return 1 if match.matched else 0


def informativeness(match: MatchResult, lambda_: float = DEFAULT_LAMBDA) -> float:
    """exp(-lambda * (level - 1)) for a match, 0.0 otherwise."""
    if not match.matched:
        return 0.0
    return math.exp(-lambda_ * (match.matched_level - 1))


def standard_accuracy(prediction: str, example: QAExample, tau: float = DEFAULT_TAU) -> int:
    """1 iff some level-1 answer matches at threshold tau."""
    return int(any(token_f1(prediction, answer) >= tau for answer in example.answers[0]))


def _index_examples(examples: Sequence[QAExample]) -> dict[str, QAExample]:
    return {example.id: example for example in examples}


def evaluate_corpus(
    predictions: Sequence[Prediction],
    examples: Sequence[QAExample],
    config: EvalConfig = EvalConfig(),
) -> MetricsReport:
    """Aggregate metrics over a corpus of predictions.

    Accuracy and informativeness average over all predictions with IDK
    counted as 0; selective accuracy averages only over non-IDK
    predictions (reported as 0 with n_nonidk = 0 when all abstain). Each
    prediction lands in exactly one histogram bucket: its matched level,
    "idk", or "error".
    """
    by_id = _index_examples(examples)
    seen: set[str] = set()

    n_idk = 0
    sum_standard = 0
    sum_granola = 0
    sum_granola_nonidk = 0
    sum_informativeness = 0.0
    level_counts: dict[int, int] = {}
    error_count = 0
    max_levels = 0

    for prediction in predictions:
        example = by_id.get(prediction.example_id)
        if example is None:
            raise EvaluationError(f"prediction references unknown example id {prediction.example_id!r}")
        if prediction.example_id in seen:
            raise EvaluationError(f"duplicate prediction for example id {prediction.example_id!r}")
        seen.add(prediction.example_id)
        max_levels = max(max_levels, example.num_levels)

        if prediction.idk or is_idk(prediction.answer, config):
            n_idk += 1
            continue

        match = find_match_index(prediction.answer, example, config.tau)
        sum_standard += standard_accuracy(prediction.answer, example, config.tau)
        acc = granola_accuracy(match)
        sum_granola += acc
        sum_granola_nonidk += acc
        sum_informativeness += informativeness(match, config.lambda_)
        if match.matched:
            level_counts[match.matched_level] = level_counts.get(match.matched_level, 0) + 1
        else:
            error_count += 1

    n_total = len(predictions)
    n_nonidk = n_total - n_idk
    histogram: dict[str, float] = {}
    if n_total:
        for level_no in range(1, max_levels + 1):
            histogram[str(level_no)] = level_counts.get(level_no, 0) / n_total
        histogram[IDK_BUCKET] = n_idk / n_total
        histogram[ERROR_BUCKET] = error_count / n_total

    accuracy_standard = sum_standard / n_total if n_total else 0.0
    accuracy_granola = sum_granola / n_total if n_total else 0.0
    return MetricsReport(
        n_total=n_total,
        n_idk=n_idk,
        n_nonidk=n_nonidk,
        accuracy_standard=accuracy_standard,
        accuracy_granola=accuracy_granola,
        selective_accuracy_granola=sum_granola_nonidk / n_nonidk if n_nonidk else 0.0,
        mean_informativeness=sum_informativeness / n_total if n_total else 0.0,
        knowledge_gap=accuracy_granola - accuracy_standard,
        match_level_histogram=histogram,
    )


def _popularity_bins(
    items: list[tuple[int, Prediction]], bins: int
) -> list[list[Prediction]]:
    """Equal-count quantile bins over (popularity, prediction) pairs.

    Predictions with equal popularity always share a bin, so bins can be
    unequal (or fewer than requested) on tied corpora.
    """
    items = sorted(items, key=lambda pair: pair[0])
    n = len(items)
    out: list[list[Prediction]] = []
    start = 0
    for b in range(1, bins + 1):
        if start >= n:
            break
        end = max(start + 1, (b * n) // bins)
        while end < n and items[end][0] == items[end - 1][0]:
            end += 1
        out.append([prediction for _, prediction in items[start:end]])
        start = end
    return out


def stratify(
    predictions: Sequence[Prediction],
    examples: Sequence[QAExample],
    key: str,
    bins: int = 10,
    config: EvalConfig = EvalConfig(),
) -> MetricsReport:
    """Overall report plus nested per-stratum reports.

    key "relation" makes one stratum per relation string; key "popularity"
    makes ascending equal-count quantile bins (ties kept together), with
    examples lacking a popularity value collected in an "unknown" stratum.
    """
    overall = evaluate_corpus(predictions, examples, config)
    by_id = _index_examples(examples)
    strata: dict[str, MetricsReport] = {}

    if key == "relation":
        groups: dict[str, list[Prediction]] = {}
        for prediction in predictions:
            relation = by_id[prediction.example_id].relation
            groups.setdefault(relation, []).append(prediction)
        for relation in sorted(groups):
            strata[relation] = evaluate_corpus(groups[relation], examples, config)
    elif key == "popularity":
        if bins < 1:
            raise EvaluationError("bins must be >= 1")
        known: list[tuple[int, Prediction]] = []
        unknown: list[Prediction] = []
        for prediction in predictions:
            popularity = by_id[prediction.example_id].popularity
            if popularity is None:
                unknown.append(prediction)
            else:
                known.append((popularity, prediction))
        for index, group in enumerate(_popularity_bins(known, bins), start=1):
            strata[f"bin{index:02d}"] = evaluate_corpus(group, examples, config)
        if unknown:
            strata["unknown"] = evaluate_corpus(unknown, examples, config)
    else:
        raise EvaluationError(f"unknown stratification key {key!r}")

    return replace(overall, strata_key=key, strata=strata)
