"""Text-completion providers: a live HTTP client for an OpenAI-compatible
completions endpoint, a deterministic record/replay pair for tests, and a
scripted provider backed by a plain callable.

The pipeline never inspects which implementation it holds; anything with a
``complete(request)`` method works.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol

import httpx

from .model import canonical_json

API_KEY_ENV = "FACTCHAT_API_KEY"

MAX_STOP_SEQUENCES = 4
DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_INFLIGHT_LIMIT = 8
RETRYABLE_STATUSES = {429, 500, 502, 503, 504}


class ProviderError(Exception):
    """Base class for completion failures."""


class TransportError(ProviderError):
    pass


class RemoteStatusError(ProviderError):
    def __init__(self, status: int, body_excerpt: str) -> None:
        super().__init__(f"remote returned status {status}: {body_excerpt[:200]}")
        self.status = status
        self.body_excerpt = body_excerpt[:200]


class ReplayMiss(ProviderError):
    """Request fingerprint not found in the cassette: fixture drift."""

    def __init__(self, fp: str, prompt_head: str) -> None:
        super().__init__(f"no cassette entry for fingerprint {fp[:12]}… (prompt starts {prompt_head!r})")
        self.fingerprint = fp


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    model_id: str
    temperature: float = 0.0
    max_tokens: int = 256
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if len(self.stop_sequences) > MAX_STOP_SEQUENCES:
            raise ValueError(f"at most {MAX_STOP_SEQUENCES} stop sequences")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be >= 0")

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "latency_ms": float(self.latency_ms),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CompletionResponse":
        return cls(
            text=d["text"],
            prompt_tokens=int(d.get("prompt_tokens", 0)),
            completion_tokens=int(d.get("completion_tokens", 0)),
            latency_ms=float(d.get("latency_ms", 0.0)),
        )


def fingerprint(req: CompletionRequest) -> str:
    """Stable hash over everything that influences a completion."""
    payload = canonical_json(
        {
            "prompt": req.prompt,
            "model_id": req.model_id,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "stop_sequences": list(req.stop_sequences),
        }
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def strip_stop(text: str, stop_sequences: Iterable[str]) -> str:
    """Cut the completion at the first stop sequence, if any survived."""
    cut = len(text)
    for stop in stop_sequences:
        idx = text.find(stop)
        if idx >= 0:
            cut = min(cut, idx)
    return text[:cut]


class Provider(Protocol):
    def complete(self, req: CompletionRequest) -> CompletionResponse: ...


class HTTPCompletionProvider:
    """Client for an OpenAI-compatible ``/completions`` endpoint.

    Transient failures (transport errors and retryable statuses) are retried
    with exponential backoff: up to ``max_attempts`` tries with 1s/2s/4s…
    waits in between. The bearer token comes from the FACTCHAT_API_KEY
    environment variable unless given explicitly.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        inflight_limit: int = DEFAULT_INFLIGHT_LIMIT,
        sleep: Callable[[float], None] = time.sleep,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.max_attempts = max_attempts
        self._sleep = sleep
        self._sem = threading.Semaphore(inflight_limit)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        body = {
            "model": req.model_id,
            "prompt": req.prompt,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        if req.stop_sequences:
            body["stop"] = list(req.stop_sequences)
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: ProviderError | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(float(2 ** (attempt - 1)))
            started = time.monotonic()
            try:
                with self._sem:
                    resp = self._client.post(f"{self.base_url}/completions", json=body, headers=headers)
            except httpx.HTTPError as exc:
                last_error = TransportError(str(exc))
                continue
            if resp.status_code in RETRYABLE_STATUSES:
                last_error = RemoteStatusError(resp.status_code, resp.text)
                continue
            if resp.status_code != 200:
                raise RemoteStatusError(resp.status_code, resp.text)
            payload = resp.json()
            text = strip_stop(payload["choices"][0]["text"], req.stop_sequences)
            usage = payload.get("usage", {})
            return CompletionResponse(
                text=text,
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
                latency_ms=(time.monotonic() - started) * 1000.0,
            )
        assert last_error is not None
        raise last_error


class ReplayProvider:
    """Serve recorded responses by request fingerprint, never touching the
    network. Repeated identical requests pop from a per-fingerprint FIFO, so
    cassettes tolerate reordering across concurrent stages."""

    def __init__(self, entries: Iterable[tuple[str, CompletionResponse]]) -> None:
        self._lock = threading.Lock()
        self._queues: dict[str, deque[CompletionResponse]] = {}
        self._counts: dict[str, int] = {}
        for fp, response in entries:
            self._queues.setdefault(fp, deque()).append(response)
            self._counts[fp] = self._counts.get(fp, 0) + 1

    @classmethod
    def from_file(cls, path: str) -> "ReplayProvider":
        return cls(load_cassette(path))

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        fp = fingerprint(req)
        with self._lock:
            queue = self._queues.get(fp)
            if not queue:
                raise ReplayMiss(fp, req.prompt[:60])
            # keep the last response available for re-runs once the recorded
            # repetitions are exhausted
            if len(queue) > 1:
                return queue.popleft()
            return queue[0]


class RecordingProvider:
    """Pass-through wrapper that appends every (fingerprint, response) pair
    to a cassette file as it happens."""

    def __init__(self, inner: Provider, cassette_path: str) -> None:
        self.inner = inner
        self.cassette_path = cassette_path
        self._lock = threading.Lock()

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        response = self.inner.complete(req)
        row = {"fingerprint": fingerprint(req), "response": response.to_dict()}
        with self._lock:
            with open(self.cassette_path, "a", encoding="utf-8") as f:
                f.write(canonical_json(row) + "\n")
        return response


@dataclass
class ScriptedProvider:
    """Deterministic provider for tests and offline demos: completions come
    from a plain function of the prompt."""

    script: Callable[[str], str]
    calls: list[CompletionRequest] = field(default_factory=list)

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        text = strip_stop(self.script(req.prompt), req.stop_sequences)
        self.calls.append(req)
        return CompletionResponse(
            text=text,
            prompt_tokens=len(req.prompt.split()),
            completion_tokens=len(text.split()),
            latency_ms=0.0,
        )


def load_cassette(path: str) -> list[tuple[str, CompletionResponse]]:
    entries = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            row = json.loads(line)
            entries.append((row["fingerprint"], CompletionResponse.from_dict(row["response"])))
    return entries
