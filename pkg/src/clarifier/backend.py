"""Provider-agnostic chat-completion backends.

Everything that talks to a model goes through :class:`Backend`. Two
implementations ship: :class:`ScriptedBackend` replays a fixed response
sequence for offline tests and demos, and :class:`HttpBackend` speaks the
common chat-completions wire shape against any compatible provider.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence, runtime_checkable

import httpx

from clarifier.models import PromptText, ValidationError


class BackendError(Exception):
    """Base class for completion failures."""


class BackendTimeout(BackendError):
    pass


class BackendHTTPError(BackendError):
    def __init__(self, status_code: int, message: str):
        super().__init__(message)
        self.status_code = status_code


class BackendProtocolError(BackendError):
    """The provider answered with a payload we cannot interpret."""


class ScriptExhausted(BackendError):
    pass


class ScriptMismatch(BackendError):
    pass


class ScriptFileError(ValidationError):
    """A script file is missing or malformed."""


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int
    output_tokens: int


@dataclass(frozen=True)
class BackendRequest:
    """One chat exchange: ordered messages plus sampling parameters."""

    messages: tuple[tuple[str, str], ...]
    model_id: str
    temperature: float = 0.0
    max_output_tokens: int = 2048
    timeout: float = 60.0

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValidationError("request must contain at least one message")
        for role, _ in self.messages:
            if role not in ("system", "user", "assistant"):
                raise ValidationError(f"unsupported message role: {role!r}")
        if self.messages[-1][0] not in ("system", "user"):
            raise ValidationError("last message must come from system or user")
        if not (0.0 <= self.temperature <= 2.0):
            raise ValidationError("temperature must be within [0, 2]")
        if self.max_output_tokens < 1:
            raise ValidationError("max_output_tokens must be positive")
        if not math.isfinite(self.timeout) or self.timeout <= 0:
            raise ValidationError("timeout must be a positive duration")

    @property
    def text(self) -> str:
        """All message contents joined; what script matchers search."""
        return "\n".join(content for _, content in self.messages)


@dataclass(frozen=True)
class BackendResponse:
    content: str
    finish_reason: str = "stop"
    usage: Optional[TokenUsage] = None

    def __post_init__(self) -> None:
        if self.finish_reason not in ("stop", "length", "error"):
            raise ValidationError(f"unknown finish_reason: {self.finish_reason!r}")


@dataclass(frozen=True)
class RequestSettings:
    """Per-call parameters the loop engine applies to every request."""

    model_id: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    max_output_tokens: int = 2048
    timeout: float = 60.0

    def request_for(self, prompt: PromptText) -> BackendRequest:
        return BackendRequest(
            messages=prompt.role_messages,
            model_id=self.model_id,
            temperature=self.temperature,
            max_output_tokens=self.max_output_tokens,
            timeout=self.timeout,
        )


@runtime_checkable
class Backend(Protocol):
    """Synchronous chat completion. Instances are safe for sequential reuse;
    concurrent use requires one instance per session."""

    def complete(self, request: BackendRequest) -> BackendResponse: ...


@dataclass(frozen=True)
class ScriptedEntry:
    content: str
    matcher: Optional[str] = None


@dataclass
class ScriptedBackend:
    """Replays a fixed list of responses in order.

    An entry's optional ``matcher`` is a substring the incoming request
    must contain; a mismatch means the conversation diverged from the
    recorded one, so the replay stops with an error instead of returning
    the wrong content.
    """

    entries: list[ScriptedEntry] = field(default_factory=list)
    cursor: int = 0

    def complete(self, request: BackendRequest) -> BackendResponse:
        if self.cursor >= len(self.entries):
            raise ScriptExhausted(
                f"script exhausted after {len(self.entries)} response(s)"
            )
        entry = self.entries[self.cursor]
        if entry.matcher is not None and entry.matcher not in request.text:
            raise ScriptMismatch(
                f"scripted response {self.cursor} expected the request to "
                f"contain {entry.matcher!r}"
            )
        self.cursor += 1
        return BackendResponse(content=entry.content, finish_reason="stop")

    @property
    def exhausted(self) -> bool:
        return self.cursor >= len(self.entries)


def scripted_from_file(path: str | Path) -> ScriptedBackend:
    """Load a ScriptedBackend from a JSON file.

    The file is a top-level list of ``{"content": str, "matcher"?: str}``
    objects in replay order.
    """
    path = Path(path)
    if not path.is_file():
        raise ScriptFileError(f"script file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ScriptFileError(f"script file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise ScriptFileError(f"script file {path} must contain a top-level list")
    entries: list[ScriptedEntry] = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or not isinstance(item.get("content"), str):
            raise ScriptFileError(
                f"script file {path}: entry {i} must be an object with a "
                f'string "content" field'
            )
        matcher = item.get("matcher")
        if matcher is not None and not isinstance(matcher, str):
            raise ScriptFileError(
                f'script file {path}: entry {i} field "matcher" must be a string'
            )
        unknown = set(item) - {"content", "matcher"}
        if unknown:
            raise ScriptFileError(
                f"script file {path}: entry {i} has unknown field(s): "
                f"{', '.join(sorted(unknown))}"
            )
        entries.append(ScriptedEntry(content=item["content"], matcher=matcher))
    return ScriptedBackend(entries=entries)


class HttpBackend:
    """Chat-completions client for any provider speaking the common shape.

    Retries timeouts and 5xx responses up to ``max_retries`` times with
    exponential backoff; 4xx responses fail immediately.
    """

    def __init__(
        self,
        base_url: str,
        api_key: Optional[str] = None,
        max_retries: int = 2,
        backoff_seconds: float = 0.5,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.max_retries = max_retries
        self.backoff_seconds = backoff_seconds
        self._api_key = api_key
        self._client = httpx.Client(base_url=base_url.rstrip("/"), transport=transport)

    def complete(self, request: BackendRequest) -> BackendResponse:
        payload = {
            "model": request.model_id,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = {}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"

        last_error: BackendError = BackendError("no attempt made")
        for attempt in range(self.max_retries + 1):
            if attempt and self.backoff_seconds:
                time.sleep(self.backoff_seconds * 2 ** (attempt - 1))
            try:
                response = self._client.post(
                    "/chat/completions",
                    json=payload,
                    headers=headers,
                    timeout=request.timeout,
                )
            except httpx.TimeoutException as exc:
                last_error = BackendTimeout(f"chat completion timed out: {exc}")
                continue
            except httpx.HTTPError as exc:
                last_error = BackendError(f"transport failure: {exc}")
                continue
            if response.status_code >= 500:
                last_error = BackendHTTPError(
                    response.status_code,
                    f"server error {response.status_code}: {response.text[:200]}",
                )
                continue
            if response.status_code >= 400:
                raise BackendHTTPError(
                    response.status_code,
                    f"request rejected with {response.status_code}: "
                    f"{response.text[:200]}",
                )
            return self._parse(response)
        raise last_error

    @staticmethod
    def _parse(response: httpx.Response) -> BackendResponse:
        try:
            data = response.json()
            choice = data["choices"][0]
            content = choice["message"]["content"]
            if not isinstance(content, str):
                raise TypeError("content is not a string")
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendProtocolError(
                f"malformed completion payload: {exc}"
            ) from exc
        finish = choice.get("finish_reason") or "stop"
        if finish not in ("stop", "length"):
            finish = "error"
        usage = None
        raw_usage = data.get("usage")
        if isinstance(raw_usage, dict):
            try:
                usage = TokenUsage(
                    prompt_tokens=int(raw_usage["prompt_tokens"]),
                    output_tokens=int(raw_usage["completion_tokens"]),
                )
            except (KeyError, TypeError, ValueError):
                usage = None
        return BackendResponse(content=content, finish_reason=finish, usage=usage)

    def close(self) -> None:
        self._client.close()
