"""Answer normalization and lexical matching primitives.

Normalization follows common open-domain QA practice: case-fold, strip
punctuation, drop standalone English articles, split on whitespace.
"""

from __future__ import annotations

import string
import unicodedata
from collections import Counter
from dataclasses import dataclass

_ARTICLES = frozenset({"a", "an", "the"})
_ASCII_PUNCT = frozenset(string.punctuation)


def _is_punct(ch: str) -> bool:
    return ch in _ASCII_PUNCT or unicodedata.category(ch).startswith("P")


@dataclass(frozen=True)
class NormalizedText:
    """Token sequence left after normalization."""

    tokens: tuple[str, ...]

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def __bool__(self) -> bool:
        return bool(self.tokens)


def normalize(text: str) -> NormalizedText:
    """Case-fold, remove punctuation, drop standalone articles.

    Deterministic and idempotent: normalizing the joined token sequence
    again yields the same tokens. Empty input gives an empty token list.
    """
    cleaned = "".join(ch for ch in text.casefold() if not _is_punct(ch))
    tokens = tuple(tok for tok in cleaned.split() if tok not in _ARTICLES)
    return NormalizedText(tokens)


def token_f1(a: str, b: str) -> float:
    """Bag-of-tokens F1 between two raw strings, in [0, 1].

    Symmetric; 1.0 iff the normalized token multisets are equal and
    non-empty; 0.0 if either side normalizes to empty or there is no
    overlap.
    """
    tokens_a = normalize(a).tokens
    tokens_b = normalize(b).tokens
    if not tokens_a or not tokens_b:
        return 0.0
    common = Counter(tokens_a) & Counter(tokens_b)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(tokens_a)
    recall = overlap / len(tokens_b)
    return 2 * precision * recall / (precision + recall)


def exact_match(a: str, b: str) -> bool:
    """True iff the normalized token sequences are identical."""
    return normalize(a).tokens == normalize(b).tokens
