"""Role-based access to chat-completion LLM backends.

Three fixed roles (extractor, answerer, critic) each bind to a backend via
config. The wire contract is the common chat-completions JSON shape, so real
services plug in unchanged; a scripted backend plays back canned responses
(or canned failures) for deterministic tests and offline runs.
"""

from __future__ import annotations

import json
import re
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import httpx

from .config import LlmConfig, RoleConfig


class LlmRole(str, Enum):
    EXTRACTOR = "extractor"
    ANSWERER = "answerer"
    CRITIC = "critic"


class LlmError(Exception):
    """Base class for gateway failures."""


class LlmTimeoutError(LlmError):
    """Every attempt ran past the per-call timeout."""


class LlmTransportError(LlmError):
    """Transport failures exhausted all retries."""


class LlmStatusError(LlmError):
    """Backend answered with a non-2xx status or an unreadable body."""


class LlmOutputError(LlmError):
    """Completion text carried no usable JSON payload."""


class ScriptMismatchError(AssertionError):
    """The scripted backend was called out of line with its script."""


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str


@dataclass(frozen=True)
class Completion:
    text: str
    latency_ms: int
    backend_id: str


# internal backend-level failures, translated by the client
class _TransportFailure(Exception):
    pass


class _TimeoutFailure(Exception):
    pass


class _StatusFailure(Exception):
    def __init__(self, status_code: int, detail: str = ""):
        super().__init__(f"status {status_code} {detail}".strip())
        self.status_code = status_code


class HttpBackend:
    """POST {endpoint}/chat with the chat-completions request shape."""

    def __init__(self, endpoint: str, bearer_token: str = "", transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.bearer_token = bearer_token
        self.transport = transport

    @property
    def backend_id(self) -> str:
        return self.endpoint

    def send(self, role: LlmRole, request: dict, timeout: float) -> str:
        headers = {}
        if self.bearer_token:
            headers["Authorization"] = f"Bearer {self.bearer_token}"
        try:
            with httpx.Client(transport=self.transport, timeout=timeout) as client:
                response = client.post(f"{self.endpoint}/chat", json=request, headers=headers)
        except httpx.TimeoutException as exc:
            raise _TimeoutFailure(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise _TransportFailure(str(exc)) from exc
        if not (200 <= response.status_code < 300):
            raise _StatusFailure(response.status_code)
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, json.JSONDecodeError) as exc:
            raise _StatusFailure(response.status_code, "malformed completion body") from exc


@dataclass
class _ScriptEntry:
    role: str
    respond: str | None = None
    fail: str | None = None

    def play(self) -> str:
        if self.fail == "transport":
            raise _TransportFailure("scripted transport failure")
        if self.fail == "timeout":
            raise _TimeoutFailure("scripted timeout")
        if self.fail and self.fail.startswith("status:"):
            raise _StatusFailure(int(self.fail.split(":", 1)[1]))
        return self.respond or ""


class ScriptedBackend:
    """Deterministic mock backend.

    Loaded from a JSONL script (one line per expected call, consumed in file
    order with the role asserted) or driven programmatically with per-role
    FIFO queues plus optional per-role defaults for calls beyond the queue.
    """

    backend_id = "scripted"

    def __init__(self):
        self._lock = threading.Lock()
        self._ordered: deque[_ScriptEntry] = deque()
        self._queues: dict[str, deque[_ScriptEntry]] = defaultdict(deque)
        self._defaults: dict[str, _ScriptEntry] = {}
        self._strict = False

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "ScriptedBackend":
        backend = cls()
        backend._strict = True
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{line_no}: bad script line: {exc}") from exc
                backend._ordered.append(
                    _ScriptEntry(role=raw["role"], respond=raw.get("respond"), fail=raw.get("fail"))
                )
        return backend

    @property
    def is_strict(self) -> bool:
        return self._strict

    def script(self, role: LlmRole | str, respond: str | None = None, fail: str | None = None) -> None:
        entry = _ScriptEntry(role=str(LlmRole(role).value), respond=respond, fail=fail)
        with self._lock:
            self._queues[entry.role].append(entry)

    def set_default(self, role: LlmRole | str, respond: str | None = None, fail: str | None = None) -> None:
        entry = _ScriptEntry(role=str(LlmRole(role).value), respond=respond, fail=fail)
        with self._lock:
            self._defaults[entry.role] = entry

    def send(self, role: LlmRole, request: dict, timeout: float) -> str:
        with self._lock:
            if self._strict:
                if not self._ordered:
                    raise ScriptMismatchError(f"script exhausted; unexpected {role.value} call")
                entry = self._ordered.popleft()
                if entry.role != role.value:
                    raise ScriptMismatchError(
                        f"script expected a {entry.role} call, got {role.value}"
                    )
            else:
                queue = self._queues.get(role.value)
                if queue:
                    entry = queue.popleft()
                elif role.value in self._defaults:
                    entry = self._defaults[role.value]
                else:
                    raise ScriptMismatchError(f"no script for {role.value} call")
        return entry.play()


@dataclass
class LlmClient:
    """Dispatches completions to per-role backends with retry and timeout.

    Transport failures and timeouts are retried with exponential backoff;
    non-2xx answers are surfaced immediately (a config or server bug, not a
    blip). Every failure is reported to the optional per-call event sink.
    """

    roles: dict[str, RoleConfig]
    backends: dict[str, object]
    settings: LlmConfig = field(default_factory=LlmConfig)
    sleeper: Callable[[float], None] = time.sleep

    def complete(
        self,
        role: LlmRole | str,
        messages: list[ChatMessage],
        params: dict | None = None,
        event_sink: Callable[[dict], None] | None = None,
    ) -> Completion:
        role = LlmRole(role)
        role_cfg = self.roles.get(role.value)
        backend = self.backends.get(role.value)
        if role_cfg is None or backend is None:
            raise LlmError(f"role {role.value} is not configured")
        request = {
            "model": role_cfg.model,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": role_cfg.temperature,
            "max_tokens": role_cfg.max_tokens,
        }
        if params:
            request.update(params)

        last_failure: Exception | None = None
        for attempt in range(self.settings.retries + 1):
            if attempt:
                self.sleeper(self.settings.backoff_base * (2 ** (attempt - 1)))
            started = time.perf_counter()
            try:
                text = backend.send(role, request, self.settings.timeout)
                latency_ms = max(0, int((time.perf_counter() - started) * 1000))
                return Completion(text=text, latency_ms=latency_ms, backend_id=backend.backend_id)
            except _StatusFailure as exc:
                self._report(event_sink, role, "status", str(exc), attempt)
                raise LlmStatusError(str(exc)) from exc
            except _TimeoutFailure as exc:
                last_failure = exc
                self._report(event_sink, role, "timeout", str(exc), attempt)
            except _TransportFailure as exc:
                last_failure = exc
                self._report(event_sink, role, "transport", str(exc), attempt)

        if isinstance(last_failure, _TimeoutFailure):
            raise LlmTimeoutError(
                f"{role.value} timed out after {self.settings.retries + 1} attempts"
            ) from last_failure
        raise LlmTransportError(
            f"{role.value} transport failed after {self.settings.retries + 1} attempts"
        ) from last_failure

    @staticmethod
    def _report(sink, role: LlmRole, kind: str, detail: str, attempt: int) -> None:
        if sink is not None:
            sink({"role": role.value, "error": kind, "detail": detail, "attempt": attempt})


_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*")


def parse_json_payload(completion_text: str):
    """Extract and parse the first balanced JSON object in a completion.

    Fenced code markers are stripped first. Raises LlmOutputError when no
    parseable object exists, which callers treat as "output unusable".
    """
    cleaned = _FENCE_RE.sub("", completion_text)
    decoder = json.JSONDecoder()
    idx = cleaned.find("{")
    while idx != -1:
        try:
            value, _ = decoder.raw_decode(cleaned[idx:])
            return value
        except json.JSONDecodeError:
            idx = cleaned.find("{", idx + 1)
    raise LlmOutputError("no JSON object found in completion")
