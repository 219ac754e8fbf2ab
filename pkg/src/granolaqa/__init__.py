"""Multi-granularity QA evaluation toolkit.

Evaluates predictions against ordered coarse-to-fine answer levels
(GRANOLA accuracy and informativeness), implements sample-and-aggregate
decoding (DRAG) with the standard baselines, and enriches
single-granularity datasets with coarser answers via a knowledge graph
and an LLM.
"""

from .dataset import (
    CorpusStats,
    EntityRef,
    Prediction,
    QAExample,
    compute_stats,
    load_dataset,
    load_predictions,
    write_dataset,
    write_predictions,
)
from .drag import (
    AggregationOutcome,
    SampleSet,
    aggregate_llm,
    aggregate_majority,
    drag,
    run_method,
    sample_responses,
)
from .enrich import EnrichConfig, EnrichmentRecord, EnrichmentStatus, enrich_dataset
from .gateway import Gateway, GenerationRequest, HTTPProvider, MockProvider, Provider, generate
from .harness import MetaEvalTable, RunConfig, meta_eval, plot_data, run
from .kg import FixtureKG, KGEntity, WikidataClient, disambiguate
from .metrics import (
    EvalConfig,
    MatchResult,
    MetricsReport,
    evaluate_corpus,
    find_match_index,
    granola_accuracy,
    informativeness,
    standard_accuracy,
    stratify,
)
from .prompts import PromptKind, render_prompt
from .textmatch import NormalizedText, exact_match, normalize, token_f1

__version__ = "0.1.0"

__all__ = [
    "AggregationOutcome",
    "CorpusStats",
    "EnrichConfig",
    "EnrichmentRecord",
    "EnrichmentStatus",
    "EntityRef",
    "EvalConfig",
    "FixtureKG",
    "Gateway",
    "GenerationRequest",
    "HTTPProvider",
    "KGEntity",
    "MatchResult",
    "MetaEvalTable",
    "MetricsReport",
    "MockProvider",
    "NormalizedText",
    "Prediction",
    "PromptKind",
    "Provider",
    "QAExample",
    "RunConfig",
    "SampleSet",
    "WikidataClient",
    "aggregate_llm",
    "aggregate_majority",
    "compute_stats",
    "disambiguate",
    "drag",
    "enrich_dataset",
    "evaluate_corpus",
    "exact_match",
    "find_match_index",
    "generate",
    "granola_accuracy",
    "informativeness",
    "load_dataset",
    "load_predictions",
    "meta_eval",
    "normalize",
    "plot_data",
    "render_prompt",
    "run",
    "run_method",
    "sample_responses",
    "standard_accuracy",
    "stratify",
    "token_f1",
    "write_dataset",
    "write_predictions",
]
