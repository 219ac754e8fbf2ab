"""Knowledge-graph clients: entity search, descriptions, disambiguation.

Two implementations share the same surface: a live client for a
wikibase-style HTTPS API and a fixture-backed client for offline,
deterministic runs. Disambiguation picks the candidate whose identifier
has the smallest numeric part.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import requests

from .errors import ConfigError, DisambiguationError, TransportError

QID_PATTERN = re.compile(r"^Q[0-9]+$")


@dataclass(frozen=True)
class KGEntity:
    """A knowledge-graph entity with its short free-text description."""

    qid: str
    label: str
    description: str = ""

    def __post_init__(self):
        if not QID_PATTERN.match(self.qid):
            raise ValueError(f"invalid qid {self.qid!r}")

    @property
    def qid_number(self) -> int:
        return int(self.qid[1:])


def disambiguate(candidates: Sequence[KGEntity]) -> KGEntity:
    """Candidate with the numerically smallest qid (Q9 before Q10)."""
    if not candidates:
        raise DisambiguationError("no candidates to disambiguate")
    return min(candidates, key=lambda entity: entity.qid_number)


class KGClient:
    """Interface shared by live and fixture knowledge-graph clients."""

    def search(self, surface: str) -> list[KGEntity]:
        raise NotImplementedError

    def describe(self, qid: str) -> str:
        raise NotImplementedError


class FixtureKG(KGClient):
    """Offline client backed by a JSON fixture mapping surface -> candidates.

    Fixture format:
        {"Berlin": [{"qid": "Q64", "label": "Berlin", "description": "..."}]}
    """

    def __init__(self, fixture: Mapping[str, Sequence[Mapping[str, str]]]):
        self._by_surface: dict[str, list[KGEntity]] = {}
        self._by_qid: dict[str, KGEntity] = {}
        for surface, candidates in fixture.items():
            entities = [
                KGEntity(
                    qid=candidate["qid"],
                    label=candidate.get("label", surface),
                    description=candidate.get("description", ""),
                )
                for candidate in candidates
            ]
            self._by_surface[surface] = entities
            for entity in entities:
                self._by_qid.setdefault(entity.qid, entity)

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureKG":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ConfigError(f"KG fixture {path} must be a JSON object")
        return cls(data)

    def search(self, surface: str) -> list[KGEntity]:
        return list(self._by_surface.get(surface, []))

    def describe(self, qid: str) -> str:
        entity = self._by_qid.get(qid)
        return entity.description if entity else ""


class WikidataClient(KGClient):
    """Live client for the wikibase action API (wbsearchentities/wbgetentities)."""

    def __init__(
        self,
        endpoint: str = "https://www.wikidata.org/w/api.php",
        language: str = "en",
        limit: int = 10,
        timeout: float = 30.0,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.language = language
        self.limit = limit
        self.timeout = timeout
        self.session = session or requests.Session()

    def _get(self, params: Mapping[str, object]) -> dict:
        try:
            response = self.session.get(self.endpoint, params=params, timeout=self.timeout)
            response.raise_for_status()
            return response.json()
        except requests.RequestException as exc:
            raise TransportError(f"KG request failed: {exc}") from exc
        except ValueError as exc:
            raise TransportError(f"KG returned malformed JSON: {exc}") from exc

    def search(self, surface: str) -> list[KGEntity]:
        data = self._get(
            {
                "action": "wbsearchentities",
                "search": surface,
                "language": self.language,
                "format": "json",
                "limit": self.limit,
            }
        )
        candidates = []
        for item in data.get("search", []):
            qid = item.get("id", "")
            if not QID_PATTERN.match(qid):
                continue
            candidates.append(
                KGEntity(
                    qid=qid,
                    label=item.get("label", surface),
                    description=item.get("description", ""),
                )
            )
        return candidates

    def describe(self, qid: str) -> str:
        data = self._get(
            {
                "action": "wbgetentities",
                "ids": qid,
                "props": "descriptions",
                "languages": self.language,
                "format": "json",
            }
        )
        entity = data.get("entities", {}).get(qid, {})
        return entity.get("descriptions", {}).get(self.language, {}).get("value", "")
