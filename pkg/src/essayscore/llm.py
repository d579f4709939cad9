"""Chat-completion client with disk caching, retries and a scriptable mock.

The wire format is the OpenAI-compatible chat-completions JSON schema with
the whole prompt sent as a single user message; both hosted and locally
served models expose it.  Responses are cached on disk keyed by a content
hash of ``(model, prompt, temperature, max_tokens)`` so that re-runs and
resumed runs never re-issue a completed call.

Credentials are read from an environment variable at request time and are
never stored on any object, cache file or log line.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import requests

DEFAULT_MAX_TOKENS = 4096
DEFAULT_TIMEOUT_S = 60.0


class LlmError(Exception):
    """Base class for completion failures."""


class AuthenticationError(LlmError):
    """Bad or missing credentials; never retried."""


class RateLimitError(LlmError):
    """Backend asked us to slow down; retried with backoff."""


class TransientBackendError(LlmError):
    """Timeouts, connection resets, 5xx; retried with backoff."""


class MalformedResponseError(LlmError):
    """Backend payload did not match the chat-completions schema."""


class BackendExhaustedError(LlmError):
    """All retries spent; carries the last underlying error as __cause__."""


class MockAmbiguityError(LlmError):
    """Two mock rules matched with no declared priority between them."""


@dataclass(frozen=True)
class LlmRequest:
    model: str
    prompt: str
    temperature: float = 0.0
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens <= 0:
            raise ValueError(f"max_tokens must be > 0, got {self.max_tokens}")


@dataclass(frozen=True)
class LlmResponse:
    text: str
    model: str
    prompt_tokens: int | None = None
    completion_tokens: int | None = None
    cached: bool = False
    latency_ms: int | None = None
    retries: int = 0


def request_digest(request: LlmRequest) -> str:
    payload = json.dumps(
        {"model": request.model, "prompt": request.prompt,
         "temperature": request.temperature, "max_tokens": request.max_tokens},
        sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    """One JSON file per request digest under ``<dir>/<2 hex>/<digest>.json``."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def _path(self, digest: str) -> Path:
        return self.directory / digest[:2] / f"{digest}.json"

    def get(self, request: LlmRequest) -> LlmResponse | None:
        path = self._path(request_digest(request))
        if not path.exists():
            return None
        record = json.loads(path.read_text("utf-8"))
        stored = record["response"]
        return LlmResponse(
            text=stored["text"],
            model=stored["model"],
            prompt_tokens=stored.get("prompt_tokens"),
            completion_tokens=stored.get("completion_tokens"),
            cached=True,
        )

    def put(self, request: LlmRequest, response: LlmResponse) -> None:
        digest = request_digest(request)
        path = self._path(digest)
        path.parent.mkdir(parents=True, exist_ok=True)
        record = {
            "request": {"model": request.model, "prompt": request.prompt,
                        "temperature": request.temperature,
                        "max_tokens": request.max_tokens},
            "response": {"text": response.text, "model": response.model,
                         "prompt_tokens": response.prompt_tokens,
                         "completion_tokens": response.completion_tokens},
        }
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(record, ensure_ascii=False, sort_keys=True), "utf-8")
        tmp.replace(path)  # atomic per key; concurrent readers see old or new


class HttpBackend:
    """OpenAI-compatible ``/chat/completions`` transport."""

    def __init__(self, endpoint: str, api_key_env: str | None = None,
                 timeout_s: float = DEFAULT_TIMEOUT_S):
        self.endpoint = endpoint.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s

    def complete_text(self, request: LlmRequest) -> LlmResponse:
        if os.environ.get("NO_NETWORK") == "1":
            raise TransientBackendError(
                "NO_NETWORK=1 forbids live requests; configure a mock or a warm cache")
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env, "")
            if not key:
                raise AuthenticationError(
                    f"environment variable {self.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        started = time.monotonic()
        try:
            resp = requests.post(f"{self.endpoint}/chat/completions",
                                 headers=headers, json=body, timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise TransientBackendError(f"transport failure: {exc.__class__.__name__}") from exc
        latency_ms = int((time.monotonic() - started) * 1000)
        if resp.status_code in (401, 403):
            raise AuthenticationError(f"backend returned HTTP {resp.status_code}")
        if resp.status_code == 429:
            raise RateLimitError("backend returned HTTP 429")
        if resp.status_code >= 500:
            raise TransientBackendError(f"backend returned HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise MalformedResponseError(f"unexpected HTTP {resp.status_code}")
        try:
            payload = resp.json()
            choice = payload["choices"][0]["message"]
            text = choice.get("content")
            if text is None:
                raise KeyError("content")
            usage = payload.get("usage") or {}
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(f"unparseable backend payload: {exc}") from exc
        return LlmResponse(
            text=text,
            model=payload.get("model", request.model),
            prompt_tokens=usage.get("prompt_tokens"),
            completion_tokens=usage.get("completion_tokens"),
            latency_ms=latency_ms,
        )


@dataclass
class MockRule:
    """Substring-matched canned response.

    ``match=None`` matches everything.  ``fail_times`` makes the first N
    hits raise a transient error (retry-path testing).  When several rules
    match one prompt, the unique highest ``priority`` wins; all-None
    priorities on multiple matches raise :class:`MockAmbiguityError`.
    """
    response: str | Callable[[str], str]
    match: str | None = None
    fail_times: int = 0
    priority: int | None = None
    hits: int = 0
    failures_served: int = 0

    def matches(self, prompt: str) -> bool:
        return self.match is None or self.match in prompt


class MockBackend:
    """Deterministic scripted backend for offline runs and tests."""

    def __init__(self, rules: Sequence[MockRule] = (), default: str | None = None,
                 strict: bool = False, model: str = "mock"):
        self.rules = list(rules)
        self.default = default
        self.strict = strict
        self.model = model
        self.call_count = 0

    @classmethod
    def echo(cls, gold: dict[str, dict[str, float]],
             id_pattern: str = r"\[#([A-Za-z0-9_.\-]+)\]",
             explanation: str = "Echoed from the gold table.") -> "MockBackend":
        """Reply with each essay's gold scores.

        The essay id is recovered from an id marker embedded in the prompt
        (fixture essays carry ``[#<id>]`` in their text).
        """
        pattern = re.compile(id_pattern)

        def respond(prompt: str) -> str:
            for m in pattern.finditer(prompt):
                essay_id = m.group(1)
                if essay_id in gold:
                    lines = [f"- {t}: {v:g}" for t, v in gold[essay_id].items()]
                    return (f"### Explanation: {explanation}\n### Score:\n"
                            + "\n".join(lines))
            raise MockAmbiguityError(
                f"echo backend found no known essay id in prompt: {prompt[:80]!r}")

        return cls(rules=[MockRule(response=respond)], model="mock-echo")

    def _select(self, prompt: str) -> MockRule | None:
        matching = [r for r in self.rules if r.matches(prompt)]
        if not matching:
            return None
        if len(matching) == 1:
            return matching[0]
        prioritized = [r for r in matching if r.priority is not None]
        if not prioritized:
            raise MockAmbiguityError(
                f"{len(matching)} mock rules match and none declares a priority "
                f"(prompt starts: {prompt[:80]!r})")
        best = max(prioritized, key=lambda r: r.priority)  # type: ignore[arg-type]
        ties = [r for r in prioritized if r.priority == best.priority]
        if len(ties) > 1:
            raise MockAmbiguityError(
                f"mock rules tie at priority {best.priority} "
                f"(prompt starts: {prompt[:80]!r})")
        return best

    def complete_text(self, request: LlmRequest) -> LlmResponse:
        self.call_count += 1
        rule = self._select(request.prompt)
        if rule is None:
            if self.strict or self.default is None:
                raise MockAmbiguityError(
                    f"no mock rule matches prompt: {request.prompt[:80]!r}")
            return LlmResponse(text=self.default, model=self.model)
        rule.hits += 1
        if rule.failures_served < rule.fail_times:
            rule.failures_served += 1
            raise TransientBackendError(
                f"scripted failure {rule.failures_served}/{rule.fail_times}")
        text = rule.response(request.prompt) if callable(rule.response) else rule.response
        return LlmResponse(text=text, model=self.model)


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 3
    base_delay_s: float = 0.5
    max_delay_s: float = 8.0
    sleep: Callable[[float], None] = time.sleep

    def delay(self, attempt: int) -> float:
        return min(self.base_delay_s * (2 ** attempt), self.max_delay_s)


class LlmClient:
    """Backend + cache + retry loop; shareable across threads."""

    def __init__(self, backend, cache: ResponseCache | None = None,
                 retry: RetryPolicy = RetryPolicy()):
        self.backend = backend
        self.cache = cache
        self.retry = retry

    def complete(self, request: LlmRequest) -> LlmResponse:
        if self.cache is not None:
            hit = self.cache.get(request)
            if hit is not None:
                return hit
        last: LlmError | None = None
        for attempt in range(self.retry.max_retries + 1):
            try:
                response = self.backend.complete_text(request)
            except (RateLimitError, TransientBackendError) as exc:
                last = exc
                if attempt < self.retry.max_retries:
                    self.retry.sleep(self.retry.delay(attempt))
                continue
            response = replace(response, retries=attempt)
            if self.cache is not None:
                self.cache.put(request, response)
            return response
        raise BackendExhaustedError(
            f"gave up after {self.retry.max_retries} retries") from last
