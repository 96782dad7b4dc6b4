"""HTTP clients for the model backends, plus the stubs used in benchmarks.

All four roles (classifier, rephraser, generator, judge) speak the same
chat-completion wire shape, so any hosted or local model server slots in
behind a base URL. Every client retries with exponential backoff and
raises a typed error when the endpoint is unusable; callers fall back to
the deterministic path on those errors, never crash.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, Optional

import httpx

from .errors import BackendProtocolError, BackendUnavailableError

log = logging.getLogger(__name__)

ROLES = ("classifier", "rephraser", "generator", "judge")


@dataclass(frozen=True)
class EndpointConfig:
    """Per-role endpoint settings; unset fields inherit from BackendConfig."""

    base_url: Optional[str] = None
    model: str = "default"
    timeout_s: Optional[float] = None
    max_retries: Optional[int] = None


@dataclass(frozen=True)
class BackendConfig:
    base_url: str = "http://127.0.0.1:8080"
    timeout_s: float = 10.0
    max_retries: int = 2
    backoff_base_s: float = 0.05
    max_inflight_per_role: int = 8
    roles: Dict[str, EndpointConfig] = field(default_factory=dict)

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        for role in self.roles:
            if role not in ROLES:
                raise ValueError(f"unknown backend role {role!r}")

    def resolved(self, role: str) -> EndpointConfig:
        ep = self.roles.get(role, EndpointConfig())
        return EndpointConfig(
            base_url=ep.base_url or self.base_url,
            model=ep.model,
            timeout_s=ep.timeout_s if ep.timeout_s is not None else self.timeout_s,
            max_retries=ep.max_retries if ep.max_retries is not None else self.max_retries,
        )


# One semaphore per (config id, role): bounds in-flight requests per role so
# a slow backend cannot absorb the whole server's worker pool.
_inflight_lock = threading.Lock()
_inflight: Dict[tuple, threading.Semaphore] = {}


def _role_slot(config: BackendConfig, role: str) -> threading.Semaphore:
    key = (id(config), role)
    with _inflight_lock:
        if key not in _inflight:
            _inflight[key] = threading.Semaphore(config.max_inflight_per_role)
        return _inflight[key]


def backend_chat(config: BackendConfig, role: str, prompt: str) -> str:
    """Issue one chat-completion request for the given role; return the text.

    Retries max_retries times with exponential backoff on transport errors
    and 5xx; a well-formed reply that lacks the completion fields is a
    protocol error (no retry: the server is up but speaking something else).
    """
    if role not in ROLES:
        raise ValueError(f"unknown backend role {role!r}")
    ep = config.resolved(role)
    url = ep.base_url.rstrip("/") + "/v1/chat/completions"
    payload = {
        "model": ep.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0,
    }
    last_err: Optional[Exception] = None
    slot = _role_slot(config, role)
    with slot:
        for attempt in range(ep.max_retries + 1):
            if attempt:
                time.sleep(config.backoff_base_s * (2 ** (attempt - 1)))
            try:
                resp = httpx.post(url, json=payload, timeout=ep.timeout_s)
            except httpx.HTTPError as exc:
                last_err = exc
                continue
            if resp.status_code >= 500:
                last_err = BackendUnavailableError(f"{role}: HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendProtocolError(f"{role}: HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                body = resp.json()
                content = body["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendProtocolError(f"{role}: malformed completion body: {exc}") from exc
            if not isinstance(content, str):
                raise BackendProtocolError(f"{role}: completion content is not text")
            return content
    raise BackendUnavailableError(
        f"{role}: no response after {ep.max_retries + 1} attempts: {last_err}"
    )


# ---------------------------------------------------------------------------
# Role adapters (the shapes the pipeline stages expect)
# ---------------------------------------------------------------------------


class HttpClassifierBackend:
    """Asks the classifier role for a JSON verdict {"tag": ..., "confidence": ...}.

    Anything that is not that shape raises, and classify_with_backend falls
    back to the heuristic, so a flaky model can only ever cost latency.
    """

    PROMPT = (
        "Classify the language of the user query. Reply with exactly one JSON "
        'object {"tag": <one of en,hi,mr,gu,hi_en,mr_en,gu_en,unknown>, '
        '"confidence": <0..1>} and nothing else.\nQuery: {text}'
    )

    def __init__(self, config: BackendConfig):
        self.config = config

    def classify(self, text: str) -> tuple:
        raw = backend_chat(self.config, "classifier", self.PROMPT.replace("{text}", text))
        try:
            verdict = json.loads(raw.strip())
            return verdict["tag"], float(verdict["confidence"])
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendProtocolError(f"classifier verdict unparseable: {raw[:120]!r}") from exc


class HttpRephraserBackend:
    """Rephrases a code-mixed or Indic query into canonical English."""

    def __init__(self, config: BackendConfig, prompt_template: Optional[str] = None):
        self.config = config
        self.prompt_template = prompt_template

    def rephrase(self, text: str, source_tag: str) -> str:
        if self.prompt_template:
            prompt = self.prompt_template.format(text=text, source_tag=source_tag)
        else:
            prompt = (
                f"Rewrite this {source_tag} user query as plain English, preserving "
                f"fund names and numbers verbatim. Reply with the rewrite only.\n{text}"
            )
        return backend_chat(self.config, "rephraser", prompt)


class HttpGeneratorBackend:
    """complete(prompt) -> str adapter for the generator role."""

    def __init__(self, config: BackendConfig):
        self.config = config

    def complete(self, prompt: str) -> str:
        return backend_chat(self.config, "generator", prompt)


class HttpJudgeBackend:
    """complete(prompt) -> str adapter for the judge role (rubric scoring)."""

    def __init__(self, config: BackendConfig):
        self.config = config

    def complete(self, prompt: str) -> str:
        return backend_chat(self.config, "judge", prompt)


# ---------------------------------------------------------------------------
# Stubs for deterministic benchmarks
# ---------------------------------------------------------------------------


class SleepStubGenerator:
    """Burns a fixed service time, then fails, forcing the template path.

    The overhead benchmark needs generation to cost the same on the full
    pipeline and the English-only bypass; a constant sleep models the
    dominant LLM cost without network variance.
    """

    def __init__(self, service_time_s: float = 0.3):
        self.service_time_s = service_time_s
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        time.sleep(self.service_time_s)
        raise BackendUnavailableError("stub generator produces no text")


class FixedReplyBackend:
    """Returns a canned completion; handy in tests for any of the roles."""

    def __init__(self, reply: str):
        self.reply = reply
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        return self.reply

    def classify(self, text: str) -> tuple:
        self.calls += 1
        verdict = json.loads(self.reply)
        return verdict["tag"], float(verdict["confidence"])

    def rephrase(self, text: str, source_tag: str) -> str:
        self.calls += 1
        return self.reply
