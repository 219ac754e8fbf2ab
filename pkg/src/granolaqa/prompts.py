"""Prompt templates for decoding baselines, response aggregation,
multi-granularity answer generation, and description consistency judging.

Rendering is byte-deterministic; missing slots raise TemplateError naming
the placeholder.
"""

from __future__ import annotations

from enum import Enum
from typing import Any, Mapping, Sequence

from .errors import TemplateError


class PromptKind(str, Enum):
    VANILLA = "vanilla"
    IDK = "idk"
    IDK_IF_UNCERTAIN = "idk_if_uncertain"
    IDK_WITH_AGGREGATION = "idk_with_aggregation"
    AGGREGATION = "aggregation"
    ENRICHMENT = "enrichment"
    CONSISTENCY_JUDGE = "consistency_judge"


VANILLA_TEMPLATE = "Question: {question}\nAnswer:"

IDK_TEMPLATE = (
    "You will be given a question. Answer the question, or output IDK.\n"
    "Question: {question}\n"
    "Answer:"
)

IDK_IF_UNCERTAIN_TEMPLATE = (
    "You will be given a question. Answer the question, or, if you are not certain "
    "of the answer, output IDK.\n"
    "Question: {question}\n"
    "Answer:"
)

IDK_WITH_AGGREGATION_TEMPLATE = (
    "You will be given a question. Answer the question at a level of granularity "
    "that fits your uncertainty, or output IDK.\n"
    "Question: {question}\n"
    "Answer:"
)

AGGREGATION_TEMPLATE = (
    "You will be given a list of responses; replace them with the most specific "
    "answer that is still consistent with all the original responses. If the "
    "responses have nothing meaningful in common with respect to the question, "
    "output IDK.\n"
    "Here are some examples:\n"
    "\n"
    "Question: Where was [X] born?\n"
    "Responses:\n"
    "- Hamburg\n"
    "- Hamburg\n"
    "- Bonn\n"
    "- Berlin\n"
    "Correct aggregated answer: Germany\n"
    "Incorrect aggregated answer: Hamburg\n"
    "Explanation: These are all different cities in Germany. Hamburg is not a "
    "correct aggregation, since it is not consistent with other responses, such "
    "as Berlin or Bonn.\n"
    "\n"
    "Question: When was [X] born?\n"
    "Responses:\n"
    "- February 1, 1937\n"
    "- November 20, 1937\n"
    "- January 1937\n"
    "Correct aggregated answer: 1937\n"
    "Incorrect aggregated answer: November 1937\n"
    "Explanation: These are all dates in 1937.\n"
    "\n"
    "Question: {question}\n"
    "Responses:\n"
    "{responses}\n"
    "Correct aggregated answer:"
)

ENRICHMENT_TEMPLATE = (
    "You will be given a pair of question and answer. You will also receive some "
    "additional description about the entity in the question and the entity in "
    "the answer.\n"
    "Your task is to write NEW ANSWERS for the original question at various levels "
    "of granularity. Number these answers starting from 1 (with 1 being the most "
    "fine grained answer -- the original answer), and larger indices corresponding "
    "to coarser answers.\n"
    "The idea is that someone might not know the answer at the most fine-grained "
    "level, but perhaps know the answer at coarser levels.\n"
    "Important: STOP generating answers BEFORE you reach trivial answers. For "
    "example, given the question \"who wrote the book X\", answers such as \"a "
    "writer\" or \"a person\" are considered trivial, as these are completely "
    "uninformative and can be guessed even without knowing what X is.\n"
    "In your answers, use the format '1:: answer', etc.\n"
    "\n"
    "Question: {question}\n"
    "Answer: {answer}\n"
    "Description of the question entity: {question_description}\n"
    "Description of the answer entity: {answer_description}\n"
    "\n"
    "New answers:"
)

CONSISTENCY_JUDGE_TEMPLATE = (
    "You will be given a question and a description of an entity from that "
    "question. Determine whether the description is consistent with the question. "
    "Answer 'Yes' or 'No'.\n"
    "Here are some examples:\n"
    "\n"
    "Question: Where was Fiona Lewis born?\n"
    "Description: British actress\n"
    "Answer: Yes\n"
    "\n"
    "Question: Who is the author of Enduring Love?\n"
    "Description: 2004 film by Roger Michell\n"
    "Answer: No\n"
    "\n"
    "Question: Who performed Orbit?\n"
    "Description: historical motorcycle manufacturer\n"
    "Answer: No\n"
    "\n"
    "Question: Where is the headquarter of Guildhall School of Music and Drama?\n"
    "Description: music school in the City of London\n"
    "Answer: Yes\n"
    "\n"
    "Question: Who is the author of Hollywood?\n"
    "Description: neighborhood in Los Angeles, California, United States\n"
    "Answer: No\n"
    "\n"
    "Question: {question}\n"
    "Description: {description}\n"
    "Answer:"
)

_TEMPLATES: dict[PromptKind, str] = {
    PromptKind.VANILLA: VANILLA_TEMPLATE,
    PromptKind.IDK: IDK_TEMPLATE,
    PromptKind.IDK_IF_UNCERTAIN: IDK_IF_UNCERTAIN_TEMPLATE,
    PromptKind.IDK_WITH_AGGREGATION: IDK_WITH_AGGREGATION_TEMPLATE,
    PromptKind.AGGREGATION: AGGREGATION_TEMPLATE,
    PromptKind.ENRICHMENT: ENRICHMENT_TEMPLATE,
    PromptKind.CONSISTENCY_JUDGE: CONSISTENCY_JUDGE_TEMPLATE,
}


def format_responses(responses: Sequence[str]) -> str:
    """One response per line, each prefixed with '- '."""
    return "\n".join(f"- {response}" for response in responses)


def render_prompt(kind: PromptKind, slots: Mapping[str, Any]) -> str:
    """Fill the template for ``kind`` with the given slot values."""
    values = dict(slots)
    if kind is PromptKind.AGGREGATION:
        responses = values.get("responses")
        if responses is None:
            raise TemplateError("responses")
        if not isinstance(responses, str):
            values["responses"] = format_responses(responses)
    try:
        return _TEMPLATES[kind].format(**values)
    except KeyError as exc:
        raise TemplateError(exc.args[0]) from exc
