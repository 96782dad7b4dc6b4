"""Per-conversation state: turn history, sticky language, pagination cursor.

Sessions are the memory behind two behaviours the pipeline depends on:
short ambiguous turns default to the previous conversation language, and
"next"/"ok" style follow-ups page through the last screening result. The
store keeps everything append-only so a session can be exported as JSONL
and replayed to the identical final state.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional

from .langid import (
    ClassificationResult,
    DecisionSource,
    LanguageTag,
    ScriptProfile,
)
from .orchestrator import ToolPlan, is_next_page_marker

DEFAULT_IDLE_TTL_S = 24 * 3600.0


class Role(str, Enum):
    USER = "user"
    ASSISTANT = "assistant"


class FollowupDirective(str, Enum):
    """What a user turn means relative to the previous assistant turn."""

    NEXT_PAGE = "next_page"
    CLARIFY = "clarify"
    NONE = "none"


@dataclass
class TurnRecord:
    role: Role
    text: str
    ts: float = field(default_factory=time.time)
    # User turns carry classification; assistant turns carry plan/digest.
    classification: Optional[ClassificationResult] = None
    plan: Optional[ToolPlan] = None
    tool_results_digest: Optional[dict] = None
    latency_breakdown: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d: dict = {
            "role": self.role.value,
            "text": self.text,
            "ts": self.ts,
            "latency_breakdown": dict(self.latency_breakdown),
        }
        if self.classification is not None:
            c = self.classification
            d["classification"] = {
                "tag": c.tag.value,
                "confidence": c.confidence,
                "code_mix_ratio": c.code_mix_ratio,
                "script_fractions": dict(c.script_profile.fractions),
                "script_token_count": c.script_profile.token_count,
                "decision_source": c.decision_source.value,
            }
        if self.plan is not None:
            d["plan"] = self.plan.to_dict()
        if self.tool_results_digest is not None:
            d["tool_results_digest"] = dict(self.tool_results_digest)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TurnRecord":
        classification = None
        if "classification" in d:
            c = d["classification"]
            classification = ClassificationResult(
                tag=LanguageTag(c["tag"]),
                confidence=c["confidence"],
                code_mix_ratio=c["code_mix_ratio"],
                script_profile=ScriptProfile(
                    fractions=dict(c.get("script_fractions", {})),
                    token_count=c.get("script_token_count", 0),
                ),
                decision_source=DecisionSource(c["decision_source"]),
            )
        plan = ToolPlan.from_dict(d["plan"]) if "plan" in d else None
        digest = dict(d["tool_results_digest"]) if "tool_results_digest" in d else None
        return cls(
            role=Role(d["role"]),
            text=d["text"],
            ts=d.get("ts", 0.0),
            classification=classification,
            plan=plan,
            tool_results_digest=digest,
            latency_breakdown=dict(d.get("latency_breakdown", {})),
        )


@dataclass
class SessionState:
    session_id: str
    user_id: str
    turns: List[TurnRecord] = field(default_factory=list)
    last_language: Optional[LanguageTag] = None
    last_plan: Optional[ToolPlan] = None
    page_cursor: Optional[str] = None
    # Continuation context for the executor: parameters of the last screening
    # (so "next" can re-run it) and the fund ids of the last fund-bearing
    # reply (so "its expense ratio?" can resolve the referent).
    last_screen_params: Optional[dict] = None
    last_fund_ids: List[str] = field(default_factory=list)
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)


def apply_turn(state: SessionState, turn: TurnRecord) -> SessionState:
    """Append a turn and fold its outcome into the session's live fields.

    The cursor mirrors the latest assistant digest exactly: a turn that pages
    or re-screens refreshes it, any other assistant turn clears it, so a
    stale cursor can never leak into an unrelated follow-up.
    """
    state.turns.append(turn)
    if turn.role is Role.USER and turn.classification is not None:
        state.last_language = turn.classification.tag
    if turn.role is Role.ASSISTANT:
        if turn.plan is not None:
            state.last_plan = turn.plan
        digest = turn.tool_results_digest or {}
        state.page_cursor = digest.get("page_cursor")
        state.last_screen_params = digest.get("screen_params")
        fund_ids = digest.get("fund_ids")
        if fund_ids:
            state.last_fund_ids = list(fund_ids)
    state.updated_at = max(state.updated_at, turn.ts)
    return state


def resolve_followup(
    state: SessionState,
    classification: ClassificationResult,
    text: str,
) -> FollowupDirective:
    """Continuation markers page when a cursor is live, else ask to clarify.

    Everything that is not a continuation marker flows through the normal
    pipeline (the classification argument is part of the contract: callers
    must have classified with session_hint=state.last_language first, so the
    marker's language is already resolved by the time we get here).
    """
    del classification  # resolved upstream; see docstring
    if is_next_page_marker(text):
        if state.page_cursor:
            return FollowupDirective.NEXT_PAGE
        return FollowupDirective.CLARIFY
    return FollowupDirective.NONE


# ---------------------------------------------------------------------------
# Store
# ---------------------------------------------------------------------------


class SessionStore:
    """In-memory session registry with per-session write serialization.

    Writes to one session take that session's lock, so concurrent requests
    against the same session_id apply their turns one at a time; distinct
    sessions do not contend. With log_dir set, every applied turn is also
    appended to <log_dir>/<session_id>.jsonl (the evalharness input format).
    """

    def __init__(self, idle_ttl_s: float = DEFAULT_IDLE_TTL_S, log_dir: Optional[str] = None):
        self.idle_ttl_s = idle_ttl_s
        self.log_dir = Path(log_dir) if log_dir else None
        self._sessions: Dict[str, SessionState] = {}
        # RLock: the gateway holds a session's lock across the whole request
        # and append_turn re-acquires it for the write.
        self._locks: Dict[str, threading.RLock] = {}
        self._registry_lock = threading.Lock()

    def create(self, user_id: str, session_id: Optional[str] = None) -> SessionState:
        sid = session_id or uuid.uuid4().hex
        with self._registry_lock:
            if sid in self._sessions:
                raise ValueError(f"session {sid!r} already exists")
            state = SessionState(session_id=sid, user_id=user_id)
            self._sessions[sid] = state
            self._locks[sid] = threading.RLock()
        return state

    def get(self, session_id: str) -> Optional[SessionState]:
        with self._registry_lock:
            return self._sessions.get(session_id)

    def get_or_create(self, session_id: Optional[str], user_id: str) -> SessionState:
        if session_id:
            existing = self.get(session_id)
            if existing is not None:
                return existing
            return self.create(user_id, session_id=session_id)
        return self.create(user_id)

    def lock(self, session_id: str) -> threading.RLock:
        with self._registry_lock:
            return self._locks[session_id]

    def append_turn(self, session_id: str, turn: TurnRecord) -> SessionState:
        lock = self.lock(session_id)
        with lock:
            state = self._sessions[session_id]
            apply_turn(state, turn)
            if self.log_dir is not None:
                self._append_log(state, turn)
            return state

    def _append_log(self, state: SessionState, turn: TurnRecord) -> None:
        self.log_dir.mkdir(parents=True, exist_ok=True)
        line = turn.to_dict()
        line["session_id"] = state.session_id
        line["user_id"] = state.user_id
        path = self.log_dir / f"{state.session_id}.jsonl"
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(line, ensure_ascii=False) + "\n")

    def sweep_expired(self, now: Optional[float] = None) -> int:
        """Drop sessions idle past the TTL; returns how many were removed."""
        now = now if now is not None else time.time()
        removed = 0
        with self._registry_lock:
            for sid in list(self._sessions):
                if now - self._sessions[sid].updated_at > self.idle_ttl_s:
                    del self._sessions[sid]
                    del self._locks[sid]
                    removed += 1
        return removed

    def all_sessions(self) -> List[SessionState]:
        with self._registry_lock:
            return list(self._sessions.values())


# ---------------------------------------------------------------------------
# Export / replay
# ---------------------------------------------------------------------------


def export_jsonl(state: SessionState) -> str:
    """One turn per line; the envelope (session_id/user_id) rides on each line
    so a directory of these files is self-describing for the metrics code."""
    lines = []
    for turn in state.turns:
        line = turn.to_dict()
        line["session_id"] = state.session_id
        line["user_id"] = state.user_id
        lines.append(json.dumps(line, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


def replay_session(lines: Iterable[str]) -> SessionState:
    """Rebuild a session by re-applying exported turns in order.

    Replaying an export must land on the same final state the live session
    had (the append-only audit property); tests compare the two directly.
    """
    state: Optional[SessionState] = None
    for raw in lines:
        raw = raw.strip()
        if not raw:
            continue
        d = json.loads(raw)
        if state is None:
            state = SessionState(session_id=d["session_id"], user_id=d["user_id"])
            state.created_at = d.get("ts", state.created_at)
            state.updated_at = d.get("ts", state.updated_at)
        apply_turn(state, TurnRecord.from_dict(d))
    if state is None:
        raise ValueError("no turns to replay")
    return state
