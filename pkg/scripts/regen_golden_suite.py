#!/usr/bin/env python3
"""Regenerate (or verify) the bundled golden conversation suite.

The golden suite freezes full pipeline behavior: for each scripted user turn
we record the classifier tag, the exact tool plan, and the deterministic
template reply as the reference answer. The eval harness then requires exact
plan and tag matches forever after, so any behavior drift in the classifier,
normalizer, planner, or templates shows up as a suite failure.

Every turn below was reviewed by hand before being frozen; regeneration is a
transcription step, not an oracle. Run with --check in CI fashion to confirm
the live pipeline still reproduces the committed fixtures byte for byte.

Usage:
    python scripts/regen_golden_suite.py            # rewrite fixtures
    python scripts/regen_golden_suite.py --check    # verify, exit 1 on drift
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from finlingua.config import AppConfig
from finlingua.gateway import ChatRequest, build_deps, handle_chat

SUITE_DIR = Path(__file__).resolve().parents[1] / "src" / "finlingua" / "assets" / "fixtures" / "golden"

# Floors asserted per turn kind. Deterministic proxy scoring gives 5s when the
# reply equals the reference, so these only bite if behavior drifts.
_DATA = {"completeness": 4, "factual_accuracy": 5}
_FAQ = {"factual_accuracy": 5}
_OOS = {"scope_compliance": 4}

# (conversation id, category, [(user_text, floors), ...])
CONVERSATIONS = [
    (
        "en_fund_detail_and_compare",
        "pure_english",
        [
            ("Tell me about SBI Gold Fund", _DATA),
            ("Compare SBI Gold Fund and Axis Gold Fund", _DATA),
        ],
    ),
    (
        "en_screening_pagination",
        "pure_english",
        [
            ("Find moderate and long term funds", _DATA),
            ("Next", _DATA),
        ],
    ),
    (
        "en_large_cap_then_nav",
        "pure_english",
        [
            ("Show me some large cap funds with high returns.", _DATA),
            ("What is the NAV of HDFC Top 100 Fund?", _DATA),
        ],
    ),
    (
        "en_tech_sector_sticky_next",
        "pure_english",
        [
            ("Show me funds that invest in tech sector", _DATA),
            # No further pages exist; the clarification must stay in English.
            ("Ok, next.", None),
        ],
    ),
    (
        "en_unknown_fund_guard",
        "pure_english",
        [
            # The fund does not exist; the reply must carry zero figures.
            ("What is the AUM of HSSC Nifty 50 fund?", _FAQ),
            ("What is an expense ratio?", _FAQ),
        ],
    ),
    (
        "en_scope_then_summary",
        "pure_english",
        [
            ("What's the weather like in Mumbai today?", _OOS),
            ("Show me my portfolio summary", _DATA),
        ],
    ),
    (
        "hi_holdings_then_exposure",
        "pure_hindi",
        [
            ("मुझे मेरी होल्डिंग्स दिखाओ", _DATA),
            ("मेरा इक्विटी एक्सपोज़र कितना है?", _DATA),
        ],
    ),
    (
        "hi_fund_detail_then_portfolio",
        "pure_hindi",
        [
            ("SBI गोल्ड फंड के बारे में बताओ", _DATA),
            ("मेरा पोर्टफोलियो कैसा है?", _DATA),
        ],
    ),
    (
        "hi_safe_screening_then_advice",
        "pure_hindi",
        [
            ("कुछ सुरक्षित फंड दिखाओ", _DATA),
            ("इस फंड में निवेश करना ठीक रहेगा?", _FAQ),
        ],
    ),
    (
        "hi_advice_then_holdings",
        "pure_hindi",
        [
            ("इस फंड में निवेश करना ठीक रहेगा?", _FAQ),
            ("मुझे मेरी होल्डिंग्स दिखाओ", _DATA),
        ],
    ),
    (
        "hi_exposure_then_screening",
        "pure_hindi",
        [
            ("मेरा इक्विटी एक्सपोज़र कितना है?", _DATA),
            ("कुछ सुरक्षित फंड दिखाओ", _DATA),
        ],
    ),
    (
        "hg_definitions",
        "hinglish_general",
        [
            ("expense ratio kya hota hai?", _FAQ),
            ("lock in period kya hota hai?", _FAQ),
        ],
    ),
    (
        "hg_capabilities",
        "hinglish_general",
        [
            ("hello, aap kya help kar sakte ho?", _FAQ),
            ("mutual fund kya hota hai?", _FAQ),
        ],
    ),
    (
        "hg_out_of_scope",
        "hinglish_general",
        [
            ("aaj Mumbai mein weather kaisa hai?", _OOS),
            ("cricket ka score kya hai?", _OOS),
        ],
    ),
    (
        "hg_advice_guardrails",
        "hinglish_general",
        [
            ("market down hai to invest karna chahiye kya?", _FAQ),
            ("portfolio diversify karna chahiye kya?", _FAQ),
        ],
    ),
    (
        "hg_language_smalltalk",
        "hinglish_general",
        [
            ("kya aap Hindi mein baat kar sakte ho?", _FAQ),
            ("theek hai, expense ratio kya hota hai?", _FAQ),
        ],
    ),
    (
        "hf_best_performer_then_exposure",
        "hinglish_financial",
        [
            ("Mere holdings mai sabse jyada returns konsa fund deta hai?", _DATA),
            ("mera equity exposure kitna hai?", _DATA),
        ],
    ),
    (
        "hf_multi_intent_expense",
        "hinglish_financial",
        [
            # Both clauses must execute: screen, then expense ratios for the
            # same funds. Dropping the second clause is the regression.
            ("Mujhe kuch safe mutual funds batao aur unka expense ratio bhi.", _DATA),
            ("SBI Liquid Fund ke bare mein batao", _DATA),
        ],
    ),
    (
        "hf_mixed_script_detail",
        "hinglish_financial",
        [
            ("HDFC Top 100 Fund का expense ratio बताओ", _DATA),
            ("HDFC Top 100 Fund ka NAV kya hai?", _DATA),
        ],
    ),
    (
        "hf_advice_then_screening",
        "hinglish_financial",
        [
            ("Is fund mein invest karna theek rahega?", _FAQ),
            ("kuch large cap funds dikhao", _DATA),
        ],
    ),
    (
        "hf_compare_then_value",
        "hinglish_financial",
        [
            ("SBI Bluechip Fund aur HDFC Top 100 Fund compare karo", _DATA),
            ("mere portfolio ka summary dikhao", _DATA),
            ("mera total portfolio value kitna hai?", _DATA),
        ],
    ),
    (
        "hf_pagination_sticky",
        "hinglish_financial",
        [
            ("kuch top mutual funds dikhao", _DATA),
            ("Ok", _DATA),
            ("आगे", _DATA),
        ],
    ),
]


def build_fixtures() -> dict:
    deps = build_deps(AppConfig())
    fixtures = {}
    for conv_id, category, turns in CONVERSATIONS:
        session_id = f"regen::{conv_id}"
        doc_turns = []
        for text, floors in turns:
            resp = handle_chat(
                ChatRequest(text=text, user_id="demo", session_id=session_id), deps
            )
            turn = {
                "user_text": text,
                "expected_language": resp.language.value,
                "expected_plan": resp.tool_calls,
                "reference_answer": resp.reply,
            }
            if floors:
                turn["rubric_expectations"] = dict(floors)
            doc_turns.append(turn)
        fixtures[conv_id] = {
            "id": conv_id,
            "category": category,
            "user_id": "demo",
            "turns": doc_turns,
        }
    return fixtures


def render(doc: dict) -> str:
    return yaml.safe_dump(doc, allow_unicode=True, sort_keys=False, width=100)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--check", action="store_true", help="verify fixtures instead of writing")
    parser.add_argument("--suite-dir", type=Path, default=SUITE_DIR)
    args = parser.parse_args()

    fixtures = build_fixtures()
    args.suite_dir.mkdir(parents=True, exist_ok=True)
    drift = []
    for conv_id, doc in fixtures.items():
        path = args.suite_dir / f"{conv_id}.yaml"
        text = render(doc)
        if args.check:
            if not path.exists() or path.read_text(encoding="utf-8") != text:
                drift.append(conv_id)
        else:
            path.write_text(text, encoding="utf-8")
    expected = {f"{cid}.yaml" for cid, _, _ in CONVERSATIONS}
    stray = [p.name for p in args.suite_dir.glob("*.yaml") if p.name not in expected]
    if args.check:
        for name in stray:
            drift.append(f"stray file {name}")
        if drift:
            print("drift:", ", ".join(drift))
            return 1
        print(f"{len(fixtures)} conversations match the frozen suite")
        return 0
    for name in stray:
        (args.suite_dir / name).unlink()
    print(f"wrote {len(fixtures)} conversations to {args.suite_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
