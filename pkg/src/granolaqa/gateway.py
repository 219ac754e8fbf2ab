"""Provider-agnostic LLM access.

Providers are batch-first: one request yields num_samples completions, so
real backends can use native n-sampling instead of N round trips. The
gateway layers retries with backoff, an in-flight cap, a per-provider
rate limit, and response post-processing (whitespace trim plus truncation
at the first stop sequence) on top of any provider.

The scripted mock provider is fully deterministic given (script, seed)
and keyed by prompt, not by call order, so interleaving concurrent calls
cannot change its outputs.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import requests

from .errors import ConfigError, MockScriptError, ProviderError, ProviderRefusal, TransportError


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    temperature: float = 0.0
    num_samples: int = 1
    max_tokens: int = 64
    stop_sequences: tuple[str, ...] = ("\n",)

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


class Provider:
    """Interface for completion backends."""

    name = "provider"

    def complete(self, request: GenerationRequest) -> list[str]:
        """Return exactly request.num_samples raw completions."""
        raise NotImplementedError


class MockProvider(Provider):
    """Scripted provider for deterministic tests.

    The script maps a prompt key to an ordered response list. Keys are
    either the exact prompt or (with key_mode="sha256") the hex digest of
    it. Temperature 0 returns the first scripted response; temperature > 0
    cycles through the script starting at a seed-derived offset.
    """

    name = "mock"

    def __init__(
        self,
        script: Mapping[str, Sequence[str]],
        seed: int = 0,
        key_mode: str = "exact",
        default: Sequence[str] | None = None,
    ):
        if key_mode not in ("exact", "sha256"):
            raise ConfigError(f"unknown mock key_mode {key_mode!r}")
        self.script = {key: list(responses) for key, responses in script.items()}
        self.seed = seed
        self.key_mode = key_mode
        self.default = list(default) if default is not None else None

    @classmethod
    def from_file(cls, path: str | Path, seed: int = 0, key_mode: str = "exact") -> "MockProvider":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ConfigError(f"mock script {path} must be a JSON object")
        default = data.pop("__default__", None)
        return cls(data, seed=seed, key_mode=key_mode, default=default)

    @staticmethod
    def hash_key(prompt: str) -> str:
        return hashlib.sha256(prompt.encode("utf-8")).hexdigest()

    def _lookup(self, prompt: str) -> list[str]:
        key = prompt if self.key_mode == "exact" else self.hash_key(prompt)
        entries = self.script.get(key)
        if entries is None:
            entries = self.default
        if not entries:
            preview = prompt if len(prompt) <= 80 else prompt[:77] + "..."
            raise MockScriptError(f"no scripted responses for prompt {preview!r}")
        return entries

    def complete(self, request: GenerationRequest) -> list[str]:
        entries = self._lookup(request.prompt)
        if request.temperature == 0:
            return [entries[0]] * request.num_samples
        start = self.seed % len(entries)
        return [entries[(start + i) % len(entries)] for i in range(request.num_samples)]


class HTTPProvider(Provider):
    """Remote completion backend over an HTTPS JSON API.

    Sends {"prompt", "temperature", "n", "max_tokens"} (plus "model" when
    configured) and expects {"responses": [...]} back. Credentials are
    read from the environment variable named in the config and sent as a
    bearer token. 429 and 5xx responses raise TransportError (retryable);
    other non-2xx responses raise ProviderRefusal.
    """

    name = "http"

    def __init__(
        self,
        endpoint: str,
        model: str | None = None,
        api_key_env: str | None = None,
        timeout: float = 30.0,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.session = session or requests.Session()
        self._headers = {"Content-Type": "application/json"}
        if api_key_env:
            api_key = os.environ.get(api_key_env)
            if not api_key:
                raise ConfigError(f"environment variable {api_key_env} is not set")
            self._headers["Authorization"] = f"Bearer {api_key}"

    @classmethod
    def from_config(cls, config: Mapping[str, object]) -> "HTTPProvider":
        endpoint = config.get("endpoint")
        if not isinstance(endpoint, str) or not endpoint:
            raise ConfigError("provider config requires an 'endpoint' string")
        return cls(
            endpoint=endpoint,
            model=config.get("model") if isinstance(config.get("model"), str) else None,
            api_key_env=config.get("api_key_env") if isinstance(config.get("api_key_env"), str) else None,
            timeout=float(config.get("timeout", 30.0)),
        )

    def complete(self, request: GenerationRequest) -> list[str]:
        payload: dict[str, object] = {
            "prompt": request.prompt,
            "temperature": request.temperature,
            "n": request.num_samples,
            "max_tokens": request.max_tokens,
        }
        if self.model:
            payload["model"] = self.model
        try:
            response = self.session.post(
                self.endpoint, json=payload, headers=self._headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"request to {self.endpoint} failed: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransportError(f"provider returned HTTP {response.status_code}")
        if not response.ok:
            raise ProviderRefusal(
                f"provider returned HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            responses = response.json()["responses"]
        except (ValueError, KeyError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc
        return [str(item) for item in responses]


class RateLimiter:
    """Enforces a minimum interval between calls; 0 disables the limit."""

    def __init__(self, min_interval: float = 0.0):
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._last_call = 0.0

    def wait(self):
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._last_call + self.min_interval - now
            if delay > 0:
                time.sleep(delay)
                now = time.monotonic()
            self._last_call = now


def _postprocess(raw: str, stop_sequences: Sequence[str]) -> str:
    text = raw.lstrip()
    cut = len(text)
    for stop in stop_sequences:
        index = text.find(stop)
        if index != -1:
            cut = min(cut, index)
    return text[:cut].rstrip()


def generate(
    provider: Provider,
    request: GenerationRequest,
    retries: int = 3,
    backoff: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> list[str]:
    """Run one request, returning exactly request.num_samples strings.

    Temperature 0 issues a single upstream completion and replicates it.
    Transient TransportErrors are retried with exponential backoff until
    the retry budget is exhausted.
    """
    upstream = request
    if request.temperature == 0 and request.num_samples > 1:
        upstream = GenerationRequest(
            prompt=request.prompt,
            temperature=0.0,
            num_samples=1,
            max_tokens=request.max_tokens,
            stop_sequences=request.stop_sequences,
        )

    attempt = 0
    while True:
        try:
            raw = provider.complete(upstream)
            break
        except TransportError:
            attempt += 1
            if attempt > retries:
                raise
            sleep(backoff * (2 ** (attempt - 1)))

    if len(raw) != upstream.num_samples:
        raise ProviderError(
            f"provider returned {len(raw)} responses, expected {upstream.num_samples}"
        )
    responses = [_postprocess(text, request.stop_sequences) for text in raw]
    if request.temperature == 0 and request.num_samples > 1:
        responses = responses * request.num_samples
    return responses


class Gateway:
    """Provider wrapper adding retries, an in-flight cap, and rate limiting."""

    def __init__(
        self,
        provider: Provider,
        max_in_flight: int = 8,
        min_interval: float = 0.0,
        retries: int = 3,
        backoff: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.provider = provider
        self.retries = retries
        self.backoff = backoff
        self._sleep = sleep
        self._semaphore = threading.Semaphore(max_in_flight)
        self._limiter = RateLimiter(min_interval)

    def generate(self, request: GenerationRequest) -> list[str]:
        with self._semaphore:
            self._limiter.wait()
            return generate(
                self.provider, request, retries=self.retries, backoff=self.backoff, sleep=self._sleep
            )
