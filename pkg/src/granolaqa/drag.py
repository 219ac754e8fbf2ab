"""Sample-and-aggregate decoding plus the standard decoding baselines.

The two-stage strategy samples N responses at temperature T and then
emits the most specific answer consistent with all of them, or IDK. With
N = 1 and the identity aggregator it degenerates to standard decoding;
with the majority aggregator it is self-consistency.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .dataset import Prediction
from .errors import ConfigError, ProviderError
from .gateway import Gateway, GenerationRequest
from .metrics import EvalConfig, is_idk
from .prompts import PromptKind, render_prompt
from .textmatch import normalize

METHODS = ("greedy", "idk", "idk-uncertain", "idk-agg", "self-consistency", "drag")
AGGREGATORS = ("llm", "majority", "identity")

_BASELINE_PROMPTS: Mapping[str, PromptKind] = {
    "greedy": PromptKind.VANILLA,
    "idk": PromptKind.IDK,
    "idk-uncertain": PromptKind.IDK_IF_UNCERTAIN,
    "idk-agg": PromptKind.IDK_WITH_AGGREGATION,
}


@dataclass(frozen=True)
class SampleSet:
    """The N temperature-T responses feeding an aggregator."""

    question: str
    responses: tuple[str, ...]
    temperature: float
    method_prompt: PromptKind = PromptKind.VANILLA

    def __post_init__(self):
        if not self.responses:
            raise ValueError("a sample set needs at least one response")


@dataclass(frozen=True)
class AggregationOutcome:
    """Aggregated answer or abstention, tagged with the aggregator used."""

    aggregator: str
    answer: str | None = None
    idk: bool = False

    def __post_init__(self):
        if (self.answer is None) != self.idk:
            raise ValueError("exactly one of answer / idk must be set")


def sample_responses(
    llm: Gateway,
    question: str,
    n: int,
    temperature: float,
    prompt_kind: PromptKind = PromptKind.VANILLA,
    max_tokens: int = 64,
) -> SampleSet:
    """Draw n responses for the question through the gateway."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    prompt = render_prompt(prompt_kind, {"question": question})
    responses = llm.generate(
        GenerationRequest(
            prompt=prompt, temperature=temperature, num_samples=n, max_tokens=max_tokens
        )
    )
    return SampleSet(
        question=question,
        responses=tuple(responses),
        temperature=temperature,
        method_prompt=prompt_kind,
    )


def aggregate_majority(samples: SampleSet) -> AggregationOutcome:
    """Majority vote over normalized responses; never abstains.

    Returns the raw string of the earliest sample in the largest group;
    ties between equal-size groups go to the group seen first.
    """
    counts: dict[str, int] = {}
    first_index: dict[str, int] = {}
    for index, response in enumerate(samples.responses):
        key = normalize(response).text
        counts[key] = counts.get(key, 0) + 1
        first_index.setdefault(key, index)
    winner = max(counts, key=lambda key: (counts[key], -first_index[key]))
    return AggregationOutcome(aggregator="majority", answer=samples.responses[first_index[winner]])


def aggregate_identity(samples: SampleSet) -> AggregationOutcome:
    """Pass the first sample through unchanged (trivial N = 1 aggregation)."""
    return AggregationOutcome(aggregator="identity", answer=samples.responses[0])


def aggregate_llm(
    samples: SampleSet,
    llm: Gateway,
    eval_config: EvalConfig = EvalConfig(),
    on_error: str = "raise",
    max_tokens: int = 64,
) -> AggregationOutcome:
    """One greedy LLM call that replaces the samples with the most
    specific answer consistent with all of them, or IDK.

    on_error="majority" falls back to the majority vote when the
    aggregation call fails; the default re-raises.
    """
    if on_error not in ("raise", "majority"):
        raise ConfigError(f"unknown aggregation fallback {on_error!r}")
    prompt = render_prompt(
        PromptKind.AGGREGATION,
        {"question": samples.question, "responses": list(samples.responses)},
    )
    try:
        output = llm.generate(
            GenerationRequest(prompt=prompt, temperature=0.0, num_samples=1, max_tokens=max_tokens)
        )[0]
    except ProviderError:
        if on_error == "majority":
            outcome = aggregate_majority(samples)
            return AggregationOutcome(aggregator="llm", answer=outcome.answer)
        raise
    if is_idk(output, eval_config):
        return AggregationOutcome(aggregator="llm", idk=True)
    return AggregationOutcome(aggregator="llm", answer=output)


def _aggregate(
    samples: SampleSet,
    aggregator: str,
    llm: Gateway,
    eval_config: EvalConfig,
    on_error: str,
) -> AggregationOutcome:
    if aggregator == "majority":
        return aggregate_majority(samples)
    if aggregator == "identity":
        return aggregate_identity(samples)
    if aggregator == "llm":
        return aggregate_llm(samples, llm, eval_config=eval_config, on_error=on_error)
    raise ConfigError(f"unknown aggregator {aggregator!r}")


def drag(
    question: str,
    llm: Gateway,
    n: int = 5,
    temperature: float = 0.7,
    aggregator: str = "llm",
    prompt_kind: PromptKind = PromptKind.VANILLA,
    eval_config: EvalConfig = EvalConfig(),
    example_id: str = "",
    on_error: str = "raise",
) -> Prediction:
    """Sample n responses, aggregate, and return the prediction.

    The raw samples are always preserved on the prediction for audit.
    """
    samples = sample_responses(llm, question, n, temperature, prompt_kind)
    outcome = _aggregate(samples, aggregator, llm, eval_config, on_error)
    return Prediction(
        example_id=example_id,
        method="drag",
        answer=outcome.answer,
        idk=outcome.idk,
        samples=samples.responses,
        metadata={
            "n": n,
            "temperature": temperature,
            "aggregator": aggregator,
            "prompt": prompt_kind.value,
        },
    )


def run_method(
    llm: Gateway,
    example_id: str,
    question: str,
    method: str,
    n: int = 5,
    temperature: float = 0.7,
    aggregator: str = "llm",
    prompt_kind: PromptKind = PromptKind.VANILLA,
    eval_config: EvalConfig = EvalConfig(),
    on_error: str = "raise",
) -> Prediction:
    """Decode one question with any of the supported methods.

    Prompt-based baselines run a single greedy completion; abstention
    markers in their output set the IDK flag. Self-consistency samples
    like the aggregation strategy but takes a majority vote.
    """
    if method in _BASELINE_PROMPTS:
        samples = sample_responses(llm, question, 1, 0.0, _BASELINE_PROMPTS[method])
        answer = samples.responses[0]
        abstained = method != "greedy" and is_idk(answer, eval_config)
        return Prediction(
            example_id=example_id,
            method=method,
            answer=None if abstained else answer,
            idk=abstained,
            samples=samples.responses,
            metadata={"prompt": samples.method_prompt.value},
        )
    if method == "self-consistency":
        samples = sample_responses(llm, question, n, temperature, prompt_kind)
        outcome = aggregate_majority(samples)
        return Prediction(
            example_id=example_id,
            method=method,
            answer=outcome.answer,
            samples=samples.responses,
            metadata={"n": n, "temperature": temperature, "prompt": prompt_kind.value},
        )
    if method == "drag":
        return drag(
            question,
            llm,
            n=n,
            temperature=temperature,
            aggregator=aggregator,
            prompt_kind=prompt_kind,
            eval_config=eval_config,
            example_id=example_id,
            on_error=on_error,
        )
    raise ConfigError(f"unknown decoding method {method!r}")
