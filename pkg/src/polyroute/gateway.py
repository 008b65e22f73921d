"""Clients for the three external model services: completion, translation,
and embedding. Each service has an HTTP implementation speaking a neutral
JSON wire contract (plus an OpenAI-style chat adapter) and a deterministic
in-repo mock so the whole pipeline runs offline.

Every outbound call is appended to a CallLog so tests can assert exact call
counts per strategy.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import httpx
import numpy as np

GPT_EMB = "gpt_emb"
ML_EMB = "ml_emb"
EMBEDDING_BACKENDS = (GPT_EMB, ML_EMB)


class TransportError(RuntimeError):
    """Upstream unreachable after all retry attempts."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class ProtocolError(RuntimeError):
    """Upstream responded, but not in the expected shape."""


class CapabilityError(ValueError):
    """The backend does not support the requested language or pair."""


@dataclass(frozen=True)
class CompletionParams:
    temperature: float = 0.0
    max_tokens: int = 2048
    model_id: str = "default"

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature out of [0,2]: {self.temperature}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1: {self.max_tokens}")


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad role {self.role!r}")
        if self.role in ("system", "user") and not self.content:
            raise ValueError(f"empty content for {self.role} message")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    backend: str

    @property
    def dimension(self) -> int:
        return len(self.values)


@dataclass
class CallRecord:
    endpoint: str  # complete | translate | embed
    backend: str
    latency: float
    retries: int = 0


class CallLog:
    """Thread-safe append-only record of outbound calls."""

    def __init__(self):
        self._records: list[CallRecord] = []
        self._lock = threading.Lock()

    def append(self, record: CallRecord) -> None:
        with self._lock:
            self._records.append(record)

    def records(self, endpoint: str | None = None) -> list[CallRecord]:
        with self._lock:
            records = list(self._records)
        if endpoint is not None:
            records = [r for r in records if r.endpoint == endpoint]
        return records

    def count(self, endpoint: str | None = None) -> int:
        return len(self.records(endpoint))

    def clear(self) -> None:
        with self._lock:
            self._records.clear()


@dataclass(frozen=True)
class RetryPolicy:
    base_delay: float = 0.5
    factor: float = 2.0
    max_attempts: int = 5

    def delay(self, attempt: int, retry_after: float | None = None) -> float:
        if retry_after is not None:
            return retry_after
        return self.base_delay * self.factor**attempt


class Retryable(RuntimeError):
    """Internal signal: transient upstream failure, retry is worthwhile."""

    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


def with_retries(
    fn: Callable[[], str | list],
    policy: RetryPolicy,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[object, int]:
    """Run fn with exponential backoff; returns (result, retries used)."""
    last: Retryable | None = None
    for attempt in range(policy.max_attempts):
        try:
            return fn(), attempt
        except Retryable as exc:
            last = exc
            if attempt + 1 < policy.max_attempts:
                sleep(policy.delay(attempt, exc.retry_after))
    raise TransportError(
        f"gave up after {policy.max_attempts} attempts: {last}", attempts=policy.max_attempts
    )


class CompletionClient(Protocol):
    def complete(self, messages: list[ChatMessage], params: CompletionParams) -> str: ...


class TranslationClient(Protocol):
    def translate(self, text: str, src: str, tgt: str) -> str: ...


class EmbeddingClient(Protocol):
    backend: str

    def embed(self, texts: list[str]) -> list[EmbeddingVector]: ...


def completion_key(messages: list[ChatMessage], params: CompletionParams) -> str:
    """Stable lookup key for the mock completion table."""
    payload = json.dumps(
        {
            "messages": [[m.role, m.content] for m in messages],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "model_id": params.model_id,
        },
        ensure_ascii=False,
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class MockCompletionClient:
    """Table-lookup completion mock.

    Lookup key is a stable hash of (messages, params); on a miss the
    `responder` callable (messages, params) -> str decides the reply, and the
    default responder returns a short digest-derived string.
    """

    def __init__(
        self,
        table: dict[str, str] | None = None,
        responder: Callable[[list[ChatMessage], CompletionParams], str] | None = None,
        call_log: CallLog | None = None,
    ):
        self.table = dict(table or {})
        self.responder = responder or (lambda m, p: f"mock-answer-{completion_key(m, p)[:8]}")
        self.call_log = call_log or CallLog()

    def add_response(self, messages: list[ChatMessage], params: CompletionParams, reply: str) -> None:
        self.table[completion_key(messages, params)] = reply

    def complete(self, messages: list[ChatMessage], params: CompletionParams) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        key = completion_key(messages, params)
        reply = self.table.get(key)
        if reply is None:
            reply = self.responder(messages, params)
        self.call_log.append(CallRecord(endpoint="complete", backend="mock", latency=0.0))
        return reply


_TAG_OPEN, _TAG_ARROW, _TAG_CLOSE = "⟪", "→", "⟫"  # ⟪src→tgt⟫


def translation_tag(src: str, tgt: str) -> str:
    return f"{_TAG_OPEN}{src}{_TAG_ARROW}{tgt}{_TAG_CLOSE}"


def tagged_language(text: str) -> str | None:
    """Language a mock-translated text is in (the tag's target), if tagged."""
    if text.startswith(_TAG_OPEN) and _TAG_CLOSE in text:
        header = text[len(_TAG_OPEN) : text.index(_TAG_CLOSE)]
        if _TAG_ARROW in header:
            return header.split(_TAG_ARROW)[1]
    return None


class MockTranslationClient:
    """Invertible tagging transform standing in for a real MT system.

    Translating src->tgt wraps the text in a ⟪src→tgt⟫ marker; translating the
    wrapped text tgt->src strips it, so round-trips are exact identities.
    """

    def __init__(self, supported: set[str] | None = None, call_log: CallLog | None = None):
        self.supported = supported
        self.call_log = call_log or CallLog()

    def translate(self, text: str, src: str, tgt: str) -> str:
        if src == tgt:
            raise ValueError(f"source and target language are both {src!r}")
        for code in (src, tgt):
            if self.supported is not None and code not in self.supported:
                raise CapabilityError(f"unsupported language code: {code}")
        self.call_log.append(CallRecord(endpoint="translate", backend="mock", latency=0.0))
        inverse = translation_tag(tgt, src)
        if text.startswith(inverse):
            return text[len(inverse) :]
        return f"{translation_tag(src, tgt)}{text}"


class MockEmbeddingClient:
    """Seeded hash-to-vector embedding mock; identical texts embed identically."""

    def __init__(self, backend: str, dimension: int = 32, seed: int = 0, call_log: CallLog | None = None):
        if backend not in EMBEDDING_BACKENDS:
            raise ValueError(f"unknown embedding backend {backend!r}")
        self.backend = backend
        self.dimension = dimension
        self.seed = seed
        self.call_log = call_log or CallLog()

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ValueError("texts must be non-empty")
        vectors = []
        for text in texts:
            if not text:
                raise ValueError("cannot embed an empty string")
            digest = hashlib.sha256(f"{self.backend}:{self.seed}:{text}".encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
            values = rng.standard_normal(self.dimension)
            vectors.append(EmbeddingVector(values=tuple(float(v) for v in values), backend=self.backend))
        self.call_log.append(CallRecord(endpoint="embed", backend=self.backend, latency=0.0))
        return vectors


def _retry_after_hint(response: httpx.Response) -> float | None:
    raw = response.headers.get("retry-after")
    try:
        return float(raw) if raw is not None else None
    except ValueError:
        return None


class _HttpBase:
    """Shared HTTP plumbing: retries, in-flight cap, call logging."""

    endpoint_name = "http"

    def __init__(
        self,
        base_url: str,
        api_key_env: str = "POLYROUTE_API_KEY",
        retry: RetryPolicy | None = None,
        max_in_flight: int = 8,
        call_log: CallLog | None = None,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = os.environ.get(api_key_env, "")
        self.retry = retry or RetryPolicy()
        self.call_log = call_log or CallLog()
        self._semaphore = threading.BoundedSemaphore(max_in_flight)
        self._client = client or httpx.Client(timeout=60.0)
        self._sleep = sleep

    def _post(self, path: str, payload: dict) -> dict:
        headers = {"authorization": f"Bearer {self.api_key}"} if self.api_key else {}

        def attempt() -> dict:
            try:
                response = self._client.post(f"{self.base_url}{path}", json=payload, headers=headers)
            except httpx.HTTPError as exc:
                raise Retryable(f"transport failure: {exc}") from exc
            if response.status_code in (429, 500, 502, 503, 504):
                raise Retryable(
                    f"upstream {response.status_code}", retry_after=_retry_after_hint(response)
                )
            if response.status_code != 200:
                raise ProtocolError(f"unexpected status {response.status_code}: {response.text[:200]}")
            try:
                return response.json()
            except json.JSONDecodeError as exc:
                raise ProtocolError(f"non-JSON response: {exc}") from exc

        start = time.monotonic()
        with self._semaphore:
            body, retries = with_retries(attempt, self.retry, self._sleep)
        self.call_log.append(
            CallRecord(
                endpoint=self.endpoint_name,
                backend=self.base_url,
                latency=time.monotonic() - start,
                retries=retries,
            )
        )
        return body


class HttpCompletionClient(_HttpBase):
    """Neutral completion endpoint: POST /v1/complete {messages, ...} -> {text}."""

    endpoint_name = "complete"

    def complete(self, messages: list[ChatMessage], params: CompletionParams) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        body = self._post(
            "/v1/complete",
            {
                "messages": [{"role": m.role, "content": m.content} for m in messages],
                "temperature": params.temperature,
                "max_tokens": params.max_tokens,
                "model": params.model_id,
            },
        )
        if "text" not in body:
            raise ProtocolError(f"completion response missing 'text': {body}")
        return body["text"]


class OpenAIChatAdapter(_HttpBase):
    """Vendor adapter for OpenAI-style /chat/completions responses."""

    endpoint_name = "complete"

    def complete(self, messages: list[ChatMessage], params: CompletionParams) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        body = self._post(
            "/chat/completions",
            {
                "messages": [{"role": m.role, "content": m.content} for m in messages],
                "temperature": params.temperature,
                "max_tokens": params.max_tokens,
                "model": params.model_id,
            },
        )
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat response: {body}") from exc


class HttpTranslationClient(_HttpBase):
    """Neutral translation endpoint: POST /v1/translate -> {text}."""

    endpoint_name = "translate"

    def translate(self, text: str, src: str, tgt: str) -> str:
        if src == tgt:
            raise ValueError(f"source and target language are both {src!r}")
        body = self._post("/v1/translate", {"text": text, "source": src, "target": tgt})
        if "text" not in body:
            raise ProtocolError(f"translation response missing 'text': {body}")
        return body["text"]


class HttpEmbeddingClient(_HttpBase):
    """Neutral embedding endpoint: POST /v1/embed -> {vectors}."""

    endpoint_name = "embed"

    def __init__(self, base_url: str, backend: str, **kwargs):
        super().__init__(base_url, **kwargs)
        if backend not in EMBEDDING_BACKENDS:
            raise ValueError(f"unknown embedding backend {backend!r}")
        self.backend = backend

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        if not texts or any(not t for t in texts):
            raise ValueError("texts must be non-empty strings")
        body = self._post("/v1/embed", {"texts": texts, "model": self.backend})
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProtocolError(f"expected {len(texts)} vectors, got {body}")
        dims = {len(v) for v in vectors}
        if len(dims) != 1:
            raise ProtocolError(f"inconsistent vector dimensions from upstream: {sorted(dims)}")
        return [EmbeddingVector(values=tuple(float(x) for x in v), backend=self.backend) for v in vectors]
