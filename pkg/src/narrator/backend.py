"""Uniform chat-completion client over vision-language and text-only model
endpoints.

One wire adapter (OpenAI-style chat completions with image content parts)
covers hosted endpoints and local model servers alike. A deterministic mock
transport stands in wherever a spec's endpoint URL uses the ``mock`` scheme,
and a content-addressed response cache makes reruns free.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol
from urllib.parse import parse_qs, urlparse

import httpx

API_KEY_ENV_PREFIX = "NARRATOR_API_KEY_"

RETRY_ATTEMPTS = 3
RETRY_BACKOFF_SECONDS = (1.0, 2.0, 4.0)

# Words the deterministic mock composes its responses from; drawn from the
# corpus vocabulary so scored mock runs yield non-trivial coverage.
_MOCK_VOCABULARY = (
    "road", "house", "tree", "building", "villa", "field", "forest", "river",
    "bridge", "intersection", "street", "car", "pool", "grass", "land",
)


class AuthError(Exception):
    """The endpoint rejected the credentials."""


class RateLimited(Exception):
    """Rate limit persisted through the retry budget."""


class TransportError(Exception):
    """Network-level failure after exhausting retries."""


class ContractError(Exception):
    """The endpoint answered with an unparseable shape."""


class CacheIOError(Exception):
    """The response cache directory could not be read or written."""


@dataclass(frozen=True)
class BackendSpec:
    """One model endpoint and its decoding parameters."""

    name: str
    endpoint_url: str
    model_id: str
    supports_images: bool
    temperature: float = 0.0
    max_output_tokens: int = 512
    timeout: float = 60.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")

    def api_key(self) -> str | None:
        env_name = API_KEY_ENV_PREFIX + self.name.upper().replace("-", "_")
        return os.environ.get(env_name)


@dataclass(frozen=True)
class Message:
    role: str
    text: str
    attachments: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.role not in ("system", "user"):
            raise ValueError(f"role must be 'system' or 'user', got {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[Message, ...]
    spec: BackendSpec

    def __post_init__(self) -> None:
        if not any(m.role == "user" for m in self.messages):
            raise ValueError("a chat request needs at least one user message")
        if not self.spec.supports_images and any(m.attachments for m in self.messages):
            raise ValueError(
                f"backend {self.spec.name!r} does not support images but the "
                "request carries attachments"
            )


@dataclass(frozen=True)
class ChatResponse:
    text: str
    input_tokens: int
    output_tokens: int
    latency_ms: float
    raw_status: int


def cache_key(request: ChatRequest) -> str:
    """Stable digest over everything that can influence the response."""
    canonical = {
        "model_id": request.spec.model_id,
        "temperature": request.spec.temperature,
        "max_output_tokens": request.spec.max_output_tokens,
        "messages": [
            {
                "role": m.role,
                "text": m.text,
                "attachments": [
                    hashlib.sha256(a.encode("ascii")).hexdigest() for a in m.attachments
                ],
            }
            for m in request.messages
        ],
    }
    encoded = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(encoded.encode("utf-8")).hexdigest()


class Transport(Protocol):
    def send(self, request: ChatRequest) -> ChatResponse: ...


class MockTransport:
    """Deterministic stand-in: the response is a pure function of the
    request digest, unless a fixture or responder overrides it."""

    def __init__(
        self,
        fixtures: dict[str, str] | None = None,
        responder: Callable[[ChatRequest], str] | None = None,
        fail_digest_prefixes: tuple[str, ...] = (),
    ):
        self.fixtures = fixtures or {}
        self.responder = responder
        self.fail_digest_prefixes = fail_digest_prefixes
        self.calls = 0
        self._lock = threading.Lock()

    def send(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls += 1
        digest = cache_key(request)
        if any(digest.startswith(p) for p in self.fail_digest_prefixes):
            raise TransportError(f"mock failure injected for digest {digest[:12]}")
        if digest in self.fixtures:
            text = self.fixtures[digest]
        elif self.responder is not None:
            text = self.responder(request)
        else:
            text = synthesize_mock_text(digest)
        return ChatResponse(
            text=text,
            input_tokens=sum(len(m.text.split()) for m in request.messages),
            output_tokens=len(text.split()),
            latency_ms=0.0,
            raw_status=200,
        )


def synthesize_mock_text(digest: str) -> str:
    words = [_MOCK_VOCABULARY[b % len(_MOCK_VOCABULARY)] for b in bytes.fromhex(digest[:16])]
    return f"mock {digest[:8]}: the " + " and the ".join(words) + " changed."


class HttpTransport:
    """OpenAI-style chat-completions adapter with bounded retries.

    Retries transport failures and rate limiting with exponential backoff;
    authentication and contract errors surface immediately.
    """

    def __init__(self, sleeper: Callable[[float], None] = time.sleep, client: httpx.Client | None = None):
        self._sleeper = sleeper
        self._client = client

    def send(self, request: ChatRequest) -> ChatResponse:
        url = request.spec.endpoint_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        key = request.spec.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        payload = wire_payload(request)

        last_error: Exception | None = None
        for attempt in range(1 + RETRY_ATTEMPTS):
            if attempt > 0:
                self._sleeper(RETRY_BACKOFF_SECONDS[attempt - 1])
            started = time.monotonic()
            try:
                if self._client is not None:
                    response = self._client.post(
                        url, json=payload, headers=headers, timeout=request.spec.timeout
                    )
                else:
                    response = httpx.post(
                        url, json=payload, headers=headers, timeout=request.spec.timeout
                    )
            except httpx.HTTPError as exc:
                last_error = TransportError(f"{url}: {exc}")
                continue
            elapsed_ms = (time.monotonic() - started) * 1000.0
            if response.status_code in (401, 403):
                raise AuthError(f"{url}: credentials rejected ({response.status_code})")
            if response.status_code == 429:
                last_error = RateLimited(f"{url}: rate limited")
                continue
            if response.status_code >= 500:
                last_error = TransportError(f"{url}: server error {response.status_code}")
                continue
            if response.status_code != 200:
                raise ContractError(f"{url}: unexpected status {response.status_code}")
            try:
                body = response.json()
                text = body["choices"][0]["message"]["content"]
                if text is None:
                    raise KeyError("content")
                usage = body.get("usage", {})
                return ChatResponse(
                    text=text,
                    input_tokens=int(usage.get("prompt_tokens", 0)),
                    output_tokens=int(usage.get("completion_tokens", 0)),
                    latency_ms=elapsed_ms,
                    raw_status=response.status_code,
                )
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ContractError(f"{url}: unparseable response body ({exc})") from exc
        assert last_error is not None
        raise last_error


def wire_payload(request: ChatRequest) -> dict:
    messages = []
    for m in request.messages:
        if m.attachments:
            content: list[dict] | str = [{"type": "text", "text": m.text}] + [
                {"type": "image_url", "image_url": {"url": a}} for a in m.attachments
            ]
        else:
            content = m.text
        messages.append({"role": m.role, "content": content})
    return {
        "model": request.spec.model_id,
        "temperature": request.spec.temperature,
        "max_tokens": request.spec.max_output_tokens,
        "messages": messages,
    }


def resolve_transport(spec: BackendSpec) -> Transport:
    """Pick a transport from the endpoint URL scheme.

    ``mock:`` endpoints run the deterministic mock; a ``fail_digest`` query
    parameter injects failures for requests whose digest starts with the
    given prefix (used to exercise partial-failure handling).
    """
    parsed = urlparse(spec.endpoint_url)
    if parsed.scheme == "mock":
        params = parse_qs(parsed.query)
        prefixes = tuple(params.get("fail_digest", ()))
        return MockTransport(fail_digest_prefixes=prefixes)
    return HttpTransport()


def complete(request: ChatRequest, transport: Transport | None = None) -> ChatResponse:
    """Send one chat request and return the model's message."""
    if transport is None:
        transport = resolve_transport(request.spec)
    return transport.send(request)


class ResponseCache:
    """Directory of ``<digest>.json`` files mapping requests to responses.

    Writes are atomic (temp file + rename) and serialized per key; readers
    never block each other.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CacheIOError(f"cannot create cache directory {self.root}: {exc}") from exc
        self._key_locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _lock_for(self, digest: str) -> threading.Lock:
        with self._registry_lock:
            return self._key_locks.setdefault(digest, threading.Lock())

    def _path(self, digest: str) -> Path:
        return self.root / f"{digest}.json"

    def get(self, digest: str) -> ChatResponse | None:
        path = self._path(digest)
        if not path.exists():
            return None
        try:
            stored = json.loads(path.read_text(encoding="utf-8"))
            r = stored["response"]
            return ChatResponse(
                text=r["text"],
                input_tokens=r["input_tokens"],
                output_tokens=r["output_tokens"],
                latency_ms=r["latency_ms"],
                raw_status=r["raw_status"],
            )
        except (OSError, KeyError, ValueError) as exc:
            raise CacheIOError(f"unreadable cache entry {path}: {exc}") from exc

    def put(self, digest: str, request: ChatRequest, response: ChatResponse) -> None:
        entry = {
            "request": {
                "backend": request.spec.name,
                "model_id": request.spec.model_id,
                "message_texts": [m.text for m in request.messages],
                "attachment_count": sum(len(m.attachments) for m in request.messages),
            },
            "response": {
                "text": response.text,
                "input_tokens": response.input_tokens,
                "output_tokens": response.output_tokens,
                "latency_ms": response.latency_ms,
                "raw_status": response.raw_status,
            },
        }
        path = self._path(digest)
        temp = path.with_suffix(".json.tmp")
        try:
            temp.write_text(json.dumps(entry, sort_keys=True, ensure_ascii=False), encoding="utf-8")
            os.replace(temp, path)
        except OSError as exc:
            raise CacheIOError(f"cannot write cache entry {path}: {exc}") from exc

    def __contains__(self, digest: str) -> bool:
        return self._path(digest).exists()

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("*.json"))


def cached_complete(
    request: ChatRequest, cache: ResponseCache, transport: Transport | None = None
) -> tuple[ChatResponse, bool]:
    """complete() behind the response cache; returns (response, hit)."""
    digest = cache_key(request)
    cached = cache.get(digest)
    if cached is not None:
        return cached, True
    with cache._lock_for(digest):
        cached = cache.get(digest)
        if cached is not None:
            return cached, True
        response = complete(request, transport)
        cache.put(digest, request, response)
        return response, False
