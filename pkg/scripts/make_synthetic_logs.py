#!/usr/bin/env python3
"""Generate the synthetic session-log fixtures for the engagement metrics.

Three files, each constructed so the right answer is known by arithmetic
rather than by trusting the implementation:

  completion_58.jsonl   100 sessions, exactly 58 with a clean final
                        assistant turn -> completion 58.0%
  length_mix.jsonl      equal numbers of 4-turn and 8-turn sessions
                        -> average length 6.0
  retention_2users.jsonl  two users, one returns on day 12 -> 30-day
                        retention 50.0%

Output goes through the real session exporter so the fixtures stay locked
to the production log format. Deterministic: fixed seed, fixed epoch.
"""

from __future__ import annotations

import random
import sys
from pathlib import Path

from finlingua.session import Role, SessionState, TurnRecord, export_jsonl

LOGS_DIR = Path(__file__).resolve().parents[1] / "src" / "finlingua" / "assets" / "fixtures" / "logs"

EPOCH = 1751328000.0  # 2025-07-01 00:00 UTC
DAY = 86400.0

_QUERIES = [
    "Tell me about SBI Gold Fund",
    "kuch safe mutual funds dikhao",
    "mera equity exposure kitna hai?",
    "Show me some large cap funds with high returns.",
    "मुझे मेरी होल्डिंग्स दिखाओ",
    "Find moderate and long term funds",
    "HDFC Top 100 Fund ka NAV kya hai?",
    "expense ratio kya hota hai?",
]
_REPLIES = [
    "Here are the details you asked for.",
    "Yeh rahi jaankari.",
    "ये फंड्स मिले।",
    "Aapke portfolio ka data yeh raha.",
]


def _digest(ok: bool, grounding_ok: bool) -> dict:
    return {
        "intents": ["fund_detail"],
        "statuses": ["ok" if ok else "error"],
        "ok": ok,
        "grounding_ok": grounding_ok,
        "page_cursor": None,
        "screen_params": None,
        "fund_ids": [],
    }


def _session(
    rng: random.Random,
    session_id: str,
    user_id: str,
    start_ts: float,
    n_turns: int,
    complete: bool,
) -> SessionState:
    """n_turns total (user+assistant alternating, user first, even count)."""
    state = SessionState(session_id=session_id, user_id=user_id, created_at=start_ts)
    ts = start_ts
    n_pairs = n_turns // 2
    for pair in range(n_pairs):
        final = pair == n_pairs - 1
        ts += rng.uniform(2.0, 30.0)
        state.turns.append(
            TurnRecord(role=Role.USER, text=rng.choice(_QUERIES), ts=ts)
        )
        ts += rng.uniform(0.3, 2.0)
        if final and not complete:
            # Split failed sessions between tool errors and grounding trips.
            ok = rng.random() < 0.5
            digest = _digest(ok=ok, grounding_ok=not ok)
        else:
            digest = _digest(ok=True, grounding_ok=True)
        state.turns.append(
            TurnRecord(
                role=Role.ASSISTANT,
                text=rng.choice(_REPLIES),
                ts=ts,
                tool_results_digest=digest,
            )
        )
    state.updated_at = ts
    return state


def build_completion_58(rng: random.Random) -> str:
    chunks = []
    for i in range(100):
        complete = i < 58  # exactly 58 clean sessions
        chunks.append(
            export_jsonl(
                _session(
                    rng,
                    session_id=f"c58-{i:03d}",
                    user_id=f"user{i % 20:02d}",
                    start_ts=EPOCH + (i * 300.0),
                    n_turns=4,
                    complete=complete,
                )
            )
        )
    return "".join(chunks)


def build_length_mix(rng: random.Random) -> str:
    chunks = []
    for i in range(3):
        chunks.append(
            export_jsonl(
                _session(rng, f"len4-{i}", f"lener{i}", EPOCH + i * 900.0, 4, True)
            )
        )
    for i in range(3):
        chunks.append(
            export_jsonl(
                _session(rng, f"len8-{i}", f"lener{i}", EPOCH + 3600.0 + i * 900.0, 8, True)
            )
        )
    return "".join(chunks)


def build_retention_2users(rng: random.Random) -> str:
    chunks = [
        export_jsonl(_session(rng, "ret-a-0", "returning", EPOCH, 4, True)),
        export_jsonl(_session(rng, "ret-a-1", "returning", EPOCH + 12 * DAY, 4, True)),
        export_jsonl(_session(rng, "ret-b-0", "one_off", EPOCH + 3600.0, 4, True)),
    ]
    return "".join(chunks)


def main() -> int:
    rng = random.Random(20250701)
    LOGS_DIR.mkdir(parents=True, exist_ok=True)
    files = {
        "completion_58.jsonl": build_completion_58(rng),
        "length_mix.jsonl": build_length_mix(rng),
        "retention_2users.jsonl": build_retention_2users(rng),
    }
    for name, text in files.items():
        (LOGS_DIR / name).write_text(text, encoding="utf-8")
        print(f"wrote {name}: {text.count(chr(10))} lines")
    return 0


if __name__ == "__main__":
    sys.exit(main())
