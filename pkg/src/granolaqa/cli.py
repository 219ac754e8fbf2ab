"""Command-line interface.

Subcommands: enrich, decode, eval, meta-eval, report, stats.
Exit codes: 0 success, 1 config error, 2 data error, 3 provider error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .dataset import compute_stats, load_dataset, load_predictions
from .enrich import EnrichConfig, enrich_dataset, load_relations
from .errors import ConfigError, DataError, ProviderError
from .gateway import Gateway, HTTPProvider, MockProvider, Provider
from .harness import (
    CommandScorer,
    RunConfig,
    decode_to_file,
    meta_eval,
    plot_data,
    write_histogram_csv,
    write_plot_csvs,
    write_report_json,
    write_strata_csv,
)
from .kg import FixtureKG, KGClient, WikidataClient
from .metrics import DEFAULT_IDK_MARKERS, DEFAULT_TAU, EvalConfig, evaluate_corpus, stratify
from .prompts import PromptKind


def _eval_config(args: argparse.Namespace) -> EvalConfig:
    markers = args.idk_markers.split(",") if getattr(args, "idk_markers", None) else DEFAULT_IDK_MARKERS
    return EvalConfig(tau=args.tau, lambda_=args.decay, idk_markers=frozenset(markers))


def _provider(args: argparse.Namespace) -> Provider:
    if args.mock_llm:
        return MockProvider.from_file(args.mock_llm, seed=args.seed)
    if getattr(args, "model", None):
        config = json.loads(Path(args.model).read_text(encoding="utf-8"))
        return HTTPProvider.from_config(config)
    raise ConfigError("no model configured: pass --model <config.json> or --mock-llm <script.json>")


def _kg_client(args: argparse.Namespace) -> KGClient:
    if args.mock_kg:
        return FixtureKG.from_file(args.mock_kg)
    kg = getattr(args, "kg", None)
    if not kg:
        raise ConfigError("no knowledge graph configured: pass --kg <endpoint|fixture.json>")
    if kg.startswith("http://") or kg.startswith("https://"):
        return WikidataClient(endpoint=kg)
    return FixtureKG.from_file(kg)


def cmd_enrich(args: argparse.Namespace) -> int:
    config = EnrichConfig(judge_samples=args.judge_samples)
    if args.relations:
        config.relations = load_relations(args.relations)
    provider = _provider(args)
    report = enrich_dataset(
        args.input,
        args.output,
        kg=_kg_client(args),
        llm=Gateway(provider),
        config=config,
    )
    print(json.dumps(report, indent=2))
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    examples = load_dataset(args.dataset, strict=True)
    config = RunConfig(
        dataset=Path(args.dataset),
        out_dir=Path(args.out).parent,
        method=args.method,
        n=args.n,
        temperature=args.temperature,
        aggregator=args.aggregator,
        prompt=PromptKind(args.prompt),
        eval_config=_eval_config(args),
        seed=args.seed,
    )
    gateway = Gateway(_provider(args))
    predictions = decode_to_file(gateway, examples, config, Path(args.out))
    print(f"wrote {len(predictions)} predictions to {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    examples = load_dataset(args.dataset, strict=True)
    predictions = load_predictions(args.predictions)
    config = _eval_config(args)
    if args.stratify_by:
        report = stratify(predictions, examples, args.stratify_by, bins=args.bins, config=config)
    else:
        report = evaluate_corpus(predictions, examples, config)

    run_config = RunConfig(
        dataset=Path(args.dataset),
        out_dir=Path(args.out).parent,
        method=args.method,
        eval_config=config,
        stratify_by=args.stratify_by,
        bins=args.bins,
        seed=args.seed,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_report_json(report, run_config, out)
    if args.csv_dir:
        csv_dir = Path(args.csv_dir)
        csv_dir.mkdir(parents=True, exist_ok=True)
        write_histogram_csv(report, csv_dir / "histogram.csv")
        if report.strata is not None:
            write_strata_csv(report, csv_dir / "strata.csv")
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_meta_eval(args: argparse.Namespace) -> int:
    examples = load_dataset(args.dataset, strict=True)
    predictions = load_predictions(args.predictions)
    scorer = CommandScorer(args.scorer_cmd.split()) if args.scorer_cmd else None
    table = meta_eval(predictions, examples, scorer=scorer, config=_eval_config(args))
    document = json.dumps(table.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(document + "\n", encoding="utf-8")
    print(document)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    popularity_rows = []
    scatter_rows = []
    for report_path in args.reports:
        document = json.loads(Path(report_path).read_text(encoding="utf-8"))
        metrics = document.get("metrics", document)
        method = document.get("run", {}).get("method", Path(report_path).stem)
        strata = metrics.get("strata")
        if not strata or metrics.get("strata_key") != "popularity":
            raise DataError(f"report {report_path} has no popularity strata")
        for name, stratum in strata.items():
            popularity_rows.append(
                {
                    "method": method,
                    "stratum": name,
                    "n_total": stratum["n_total"],
                    "accuracy_standard": stratum["accuracy_standard"],
                    "accuracy_granola": stratum["accuracy_granola"],
                }
            )
        scatter_rows.append(
            {
                "method": method,
                "n_total": metrics["n_total"],
                "accuracy_standard": metrics["accuracy_standard"],
                "accuracy_granola": metrics["accuracy_granola"],
                "knowledge_gap": metrics["knowledge_gap"],
            }
        )
    paths = write_plot_csvs(
        {"accuracy_vs_popularity": popularity_rows, "standard_vs_granola": scatter_rows},
        Path(args.out_dir),
    )
    for name, path in paths.items():
        print(f"wrote {name} to {path}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    examples = load_dataset(args.dataset, strict=not args.lax)
    stats = compute_stats(examples)
    print(
        json.dumps(
            {
                "num_examples": stats.num_examples,
                "num_relations": stats.num_relations,
                "mean_answers_per_question": stats.mean_answers_per_question,
                "answer_count_histogram": {
                    str(k): v for k, v in stats.answer_count_histogram.items()
                },
            },
            indent=2,
        )
    )
    return 0


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="granolaqa",
        description="Multi-granularity QA evaluation toolkit",
    )
    parser.add_argument("--config", help="JSON file with default values for flags")
    parser.add_argument("--seed", type=int, default=0, help="seed for mock providers")
    parser.add_argument("--mock-llm", help="scripted mock LLM JSON file")
    parser.add_argument("--mock-kg", help="knowledge-graph fixture JSON file")
    sub = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    def add_eval_flags(p: argparse.ArgumentParser):
        p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="token-F1 match threshold")
        p.add_argument(
            "--decay",
            type=float,
            default=math.log(2.0),
            help="informativeness decay rate per coarser level",
        )
        p.add_argument("--idk-markers", help="comma-separated abstention markers")

    p = commands["enrich"] = sub.add_parser("enrich", help="add coarser answer levels to a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--relations", help="relation allow-list JSON file")
    p.add_argument("--kg", help="KG endpoint URL or fixture JSON path")
    p.add_argument("--model", help="LLM provider config JSON")
    p.add_argument("--judge-samples", type=int, default=5)
    p.set_defaults(func=cmd_enrich)

    p = commands["decode"] = sub.add_parser("decode", help="produce predictions for a dataset")
    p.add_argument(
        "--method",
        required=True,
        choices=["greedy", "idk", "idk-uncertain", "idk-agg", "self-consistency", "drag"],
    )
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--aggregator", choices=["llm", "majority", "identity"], default="llm")
    p.add_argument(
        "--prompt",
        default=PromptKind.VANILLA.value,
        choices=[k.value for k in PromptKind],
        help="prompt used to elicit samples",
    )
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", help="LLM provider config JSON")
    p.add_argument("--out", required=True)
    add_eval_flags(p)
    p.set_defaults(func=cmd_decode)

    p = commands["eval"] = sub.add_parser("eval", help="score predictions against a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--method", default="unknown", help="method label for the report")
    p.add_argument("--stratify-by", choices=["popularity", "relation"])
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out", required=True)
    p.add_argument("--csv-dir", help="directory for histogram/strata CSV exports")
    add_eval_flags(p)
    p.set_defaults(func=cmd_eval)

    p = commands["meta-eval"] = sub.add_parser("meta-eval", help="2x2 standard-vs-granola stratification")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--scorer-cmd", help="external similarity scorer command")
    p.add_argument("--out")
    add_eval_flags(p)
    p.set_defaults(func=cmd_meta_eval)

    p = commands["report"] = sub.add_parser("report", help="emit plot-data CSVs from report JSON files")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = commands["stats"] = sub.add_parser("stats", help="corpus statistics for a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--lax", action="store_true", help="skip invalid rows instead of failing")
    p.set_defaults(func=cmd_stats)

    return parser, commands


def _load_config_overrides(path: str) -> dict:
    try:
        overrides = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(overrides, dict):
        raise ConfigError(f"config file {path} must be a JSON object")
    return overrides


def main(argv: list[str] | None = None) -> int:
    parser, commands = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            # config values become new flag defaults, then a re-parse keeps
            # the precedence CLI > config file > built-in default
            overrides = {
                key.replace("-", "_"): value
                for key, value in _load_config_overrides(args.config).items()
            }
            parser.set_defaults(**overrides)
            commands[args.command].set_defaults(**overrides)
            args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
