"""End-to-end runs: decode a dataset, evaluate, and emit report artifacts.

A run writes predictions JSONL (flushed incrementally so partial output
survives an abort), a metrics report JSON embedding the full resolved
configuration and seed, and CSV exports for histograms and strata. With
mock providers and a fixed seed, two runs produce byte-identical
artifacts.
"""

from __future__ import annotations

import csv
import json
import logging
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .dataset import Prediction, QAExample, load_dataset, record_from_prediction
from .errors import ConfigError, EvaluationError, ProviderRefusal
from .gateway import Gateway, HTTPProvider, MockProvider, Provider
from .metrics import (
    EvalConfig,
    MetricsReport,
    evaluate_corpus,
    find_match_index,
    is_idk,
    standard_accuracy,
    stratify,
)
from .prompts import PromptKind

logger = logging.getLogger(__name__)

Scorer = Callable[[str, str], float]

META_CELLS = ("both_correct", "granola_only", "standard_only", "both_incorrect")


@dataclass
class RunConfig:
    """Everything needed to reproduce one decode-and-evaluate run."""

    dataset: Path
    out_dir: Path
    method: str = "greedy"
    n: int = 1
    temperature: float = 0.0
    aggregator: str = "llm"
    prompt: PromptKind = PromptKind.VANILLA
    eval_config: EvalConfig = field(default_factory=EvalConfig)
    stratify_by: str | None = None
    bins: int = 10
    seed: int = 0
    mock_script: Path | None = None
    provider_config: Path | None = None
    max_in_flight: int = 8
    min_interval: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset": str(self.dataset),
            "out_dir": str(self.out_dir),
            "method": self.method,
            "n": self.n,
            "temperature": self.temperature,
            "aggregator": self.aggregator,
            "prompt": self.prompt.value,
            "eval": self.eval_config.to_dict(),
            "stratify_by": self.stratify_by,
            "bins": self.bins,
            "seed": self.seed,
            "mock_script": str(self.mock_script) if self.mock_script else None,
            "provider_config": str(self.provider_config) if self.provider_config else None,
        }


@dataclass
class RunArtifacts:
    predictions_path: Path
    report_path: Path
    histogram_csv: Path
    strata_csv: Path | None
    report: MetricsReport


@dataclass(frozen=True)
class MetaEvalCell:
    count: int
    fraction: float
    mean_score: float | None
    n_scored: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "count": self.count,
            "fraction": self.fraction,
            "mean_score": self.mean_score,
            "n_scored": self.n_scored,
        }


@dataclass(frozen=True)
class MetaEvalTable:
    """2x2 stratification by standard vs multi-granularity correctness."""

    n_total: int
    cells: Mapping[str, MetaEvalCell]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_total": self.n_total,
            "cells": {key: cell.to_dict() for key, cell in self.cells.items()},
        }


def build_provider(config: RunConfig) -> Provider:
    if config.mock_script is not None:
        return MockProvider.from_file(config.mock_script, seed=config.seed)
    if config.provider_config is not None:
        provider_config = json.loads(Path(config.provider_config).read_text(encoding="utf-8"))
        return HTTPProvider.from_config(provider_config)
    raise ConfigError("no provider configured: set mock_script or provider_config")


def decode_to_file(
    gateway: Gateway,
    examples: Sequence[QAExample],
    config: RunConfig,
    path: Path,
) -> list[Prediction]:
    """Decode every example, flushing each prediction line as it is made.

    Provider refusals are recorded on the prediction (empty answer plus an
    error note) rather than aborting; any other failure aborts after the
    partial file is flushed, naming the failing example.
    """
    from .drag import run_method

    predictions: list[Prediction] = []
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            try:
                prediction = run_method(
                    gateway,
                    example.id,
                    example.question,
                    config.method,
                    n=config.n,
                    temperature=config.temperature,
                    aggregator=config.aggregator,
                    prompt_kind=config.prompt,
                    eval_config=config.eval_config,
                )
            except ProviderRefusal as exc:
                logger.warning("provider refused example %s: %s", example.id, exc)
                prediction = Prediction(
                    example_id=example.id,
                    method=config.method,
                    answer="",
                    metadata={"provider_error": str(exc)},
                )
            except Exception as exc:
                handle.flush()
                exc.args = (f"example {example.id}: {exc}",)
                raise
            handle.write(json.dumps(record_from_prediction(prediction), ensure_ascii=False))
            handle.write("\n")
            handle.flush()
            predictions.append(prediction)
    return predictions


def write_report_json(report: MetricsReport, config: RunConfig, path: Path) -> None:
    document = {"run": config.to_dict(), "metrics": report.to_dict()}
    path.write_text(json.dumps(document, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def write_histogram_csv(report: MetricsReport, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["bucket", "fraction"])
        for bucket, fraction in report.match_level_histogram.items():
            writer.writerow([bucket, fraction])


_STRATA_COLUMNS = (
    "stratum",
    "n_total",
    "n_idk",
    "accuracy_standard",
    "accuracy_granola",
    "selective_accuracy_granola",
    "mean_informativeness",
    "knowledge_gap",
)


def write_strata_csv(report: MetricsReport, path: Path) -> None:
    if report.strata is None:
        raise EvaluationError("report has no strata to export")
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(_STRATA_COLUMNS)
        for name, stratum in report.strata.items():
            writer.writerow(
                [
                    name,
                    stratum.n_total,
                    stratum.n_idk,
                    stratum.accuracy_standard,
                    stratum.accuracy_granola,
                    stratum.selective_accuracy_granola,
                    stratum.mean_informativeness,
                    stratum.knowledge_gap,
                ]
            )


def run(config: RunConfig, provider: Provider | None = None) -> RunArtifacts:
    """Decode the dataset, evaluate, and write all artifacts."""
    dataset_path = Path(config.dataset)
    if not dataset_path.exists():
        raise FileNotFoundError(f"dataset not found: {dataset_path}")
    examples = load_dataset(dataset_path, strict=True)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if provider is None:
        provider = build_provider(config)
    gateway = Gateway(
        provider, max_in_flight=config.max_in_flight, min_interval=config.min_interval
    )

    predictions_path = out_dir / "predictions.jsonl"
    predictions = decode_to_file(gateway, examples, config, predictions_path)

    if config.stratify_by:
        report = stratify(
            predictions, examples, config.stratify_by, bins=config.bins, config=config.eval_config
        )
    else:
        report = evaluate_corpus(predictions, examples, config.eval_config)

    report_path = out_dir / "report.json"
    write_report_json(report, config, report_path)
    histogram_csv = out_dir / "histogram.csv"
    write_histogram_csv(report, histogram_csv)
    strata_csv = None
    if report.strata is not None:
        strata_csv = out_dir / "strata.csv"
        write_strata_csv(report, strata_csv)

    return RunArtifacts(
        predictions_path=predictions_path,
        report_path=report_path,
        histogram_csv=histogram_csv,
        strata_csv=strata_csv,
        report=report,
    )


def meta_eval(
    predictions: Sequence[Prediction],
    examples: Sequence[QAExample],
    scorer: Scorer | None = None,
    config: EvalConfig = EvalConfig(),
) -> MetaEvalTable:
    """Bucket predictions into the 2x2 standard-vs-granola table.

    Each cell reports its fraction of examples and, when a scorer is
    plugged in, the mean scorer value of the prediction against the first
    level-1 gold answer. Scorer failures exclude the example from the
    mean but not from the fraction. The (standard correct, granola
    incorrect) cell is structurally empty.
    """
    by_id = {example.id: example for example in examples}
    seen: set[str] = set()
    counts = {key: 0 for key in META_CELLS}
    score_sums = {key: 0.0 for key in META_CELLS}
    score_counts = {key: 0 for key in META_CELLS}

    for prediction in predictions:
        example = by_id.get(prediction.example_id)
        if example is None:
            raise EvaluationError(f"prediction references unknown example id {prediction.example_id!r}")
        if prediction.example_id in seen:
            raise EvaluationError(f"duplicate prediction for example id {prediction.example_id!r}")
        seen.add(prediction.example_id)

        if prediction.idk or is_idk(prediction.answer, config):
            standard_ok = granola_ok = False
            answer = None
        else:
            answer = prediction.answer
            standard_ok = bool(standard_accuracy(answer, example, config.tau))
            granola_ok = find_match_index(answer, example, config.tau).matched

        if standard_ok and granola_ok:
            key = "both_correct"
        elif granola_ok:
            key = "granola_only"
        elif standard_ok:
            key = "standard_only"
        else:
            key = "both_incorrect"
        counts[key] += 1

        if scorer is not None and answer is not None:
            reference = example.answers[0][0]
            try:
                score = float(scorer(answer, reference))
            except Exception as exc:
                logger.warning("scorer failed on example %s: %s", example.id, exc)
                continue
            score_sums[key] += score
            score_counts[key] += 1

    n_total = len(predictions)
    cells = {
        key: MetaEvalCell(
            count=counts[key],
            fraction=counts[key] / n_total if n_total else 0.0,
            mean_score=score_sums[key] / score_counts[key] if score_counts[key] else None,
            n_scored=score_counts[key],
        )
        for key in META_CELLS
    }
    return MetaEvalTable(n_total=n_total, cells=cells)


class CommandScorer:
    """Semantic-scorer plug-in that shells out to an external command.

    The command is invoked with the prediction and the reference answer
    appended as two arguments and must print a float to stdout.
    """

    def __init__(self, command: Sequence[str], timeout: float = 60.0):
        if not command:
            raise ConfigError("scorer command must be non-empty")
        self.command = list(command)
        self.timeout = timeout

    def __call__(self, prediction: str, reference: str) -> float:
        result = subprocess.run(
            self.command + [prediction, reference],
            capture_output=True,
            text=True,
            timeout=self.timeout,
            check=True,
        )
        return float(result.stdout.strip())


def plot_data(report: MetricsReport, method: str = "") -> dict[str, list[dict[str, Any]]]:
    """Data-only plot series derived from a stratified report.

    Returns rows for accuracy vs popularity (one per bin) and the overall
    standard-vs-granola scatter point for the method. Requires popularity
    strata.
    """
    if report.strata is None or report.strata_key != "popularity":
        raise EvaluationError("report has no popularity strata")
    popularity_rows = [
        {
            "method": method,
            "stratum": name,
            "n_total": stratum.n_total,
            "accuracy_standard": stratum.accuracy_standard,
            "accuracy_granola": stratum.accuracy_granola,
        }
        for name, stratum in report.strata.items()
    ]
    scatter_rows = [
        {
            "method": method,
            "n_total": report.n_total,
            "accuracy_standard": report.accuracy_standard,
            "accuracy_granola": report.accuracy_granola,
            "knowledge_gap": report.knowledge_gap,
        }
    ]
    return {
        "accuracy_vs_popularity": popularity_rows,
        "standard_vs_granola": scatter_rows,
    }


def write_plot_csvs(
    series: Mapping[str, list[dict[str, Any]]], out_dir: Path
) -> dict[str, Path]:
    """Write each plot series to <name>.csv under out_dir."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    for name, rows in series.items():
        path = out_dir / f"{name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as handle:
            if rows:
                writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
                writer.writeheader()
                writer.writerows(rows)
        paths[name] = path
    return paths
