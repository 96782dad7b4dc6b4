"""End-to-end pipeline behaviour behind handle_chat and the HTTP shim.

The standing guarantee under test: any well-formed request gets a reply, in
the user's language, whose every figure traces to tool provenance. Backend
or tool trouble degrades the reply, never the guarantee.
"""

import json
from concurrent.futures import ThreadPoolExecutor

import pytest
from fastapi.testclient import TestClient

from finlingua.gateway import (
    ChatRequest,
    ChatResponse,
    PRODUCTION_OVERHEAD_RANGE_PCT,
    StageMetrics,
    build_app,
    build_bench_deps,
    build_deps,
    handle_chat,
    measure_overhead,
)
from finlingua.config import AppConfig
from finlingua.langid import LanguageTag
from finlingua.respgen import DeterministicGenerator, ReplyDraft


def _chat(deps, text, user="demo", session=None, force=None):
    return handle_chat(
        ChatRequest(text=text, user_id=user, session_id=session, force_language=force), deps
    )


# --- request validation ---


@pytest.mark.parametrize("text", ["", "   ", "\n\t"])
def test_blank_text_rejected(deps, text):
    with pytest.raises(ValueError):
        _chat(deps, text)


# --- the grounding guarantee ---

BATTERY = [
    ("Tell me about SBI Gold Fund", "demo"),
    ("Find moderate and long term funds", "demo"),
    ("kuch safe mutual funds dikhao", "demo"),
    ("Mujhe kuch safe mutual funds batao aur unka expense ratio bhi.", "demo"),
    ("मुझे मेरी होल्डिंग्स दिखाओ", "demo"),
    ("मेरा इक्विटी एक्सपोज़र कितना है?", "demo"),
    ("मला माझे होल्डिंग्ज दाखवा", "demo"),
    ("મને મારા હોલ્ડિંગ્સ બતાવો", "demo"),
    ("Tell me about Unicorn Moon Fund", "demo"),
    ("Can you book a flight to Mumbai?", "demo"),
    ("Please buy 10 units of SBI Gold Fund", "demo"),
    ("What is an expense ratio?", "demo"),
    ("Show me my holdings", "stranger-with-no-portfolio"),
    ("next", "demo"),
    ("Which fund gives the highest returns in my holdings?", "demo"),
    ("Compare SBI Gold Fund and Axis Gold Fund", "demo"),
]


@pytest.mark.parametrize("text,user", BATTERY)
def test_every_reply_is_grounded(deps, text, user):
    resp = _chat(deps, text, user=user)
    assert resp.reply.strip()
    assert resp.grounding["ok"], resp.grounding["violations"]
    assert resp.grounding["language_ok"], (text, resp.language)


def test_reply_language_follows_user(deps):
    assert _chat(deps, "Tell me about SBI Gold Fund").language is LanguageTag.EN
    assert _chat(deps, "kuch safe mutual funds dikhao").language is LanguageTag.HI_EN
    assert _chat(deps, "मुझे मेरी होल्डिंग्स दिखाओ").language is LanguageTag.HI
    assert _chat(deps, "मला माझे होल्डिंग्ज दाखवा").language is LanguageTag.MR
    assert _chat(deps, "મને મારા હોલ્ડિંગ્સ બતાવો").language is LanguageTag.GU


def test_hindi_reply_uses_devanagari(deps):
    resp = _chat(deps, "मुझे मेरी होल्डिंग्स दिखाओ")
    assert any("ऀ" <= ch <= "ॿ" for ch in resp.reply)


def test_force_language_overrides_classifier(deps):
    resp = _chat(deps, "Show me my holdings", force=LanguageTag.HI)
    assert resp.language is LanguageTag.HI
    assert any("ऀ" <= ch <= "ॿ" for ch in resp.reply)
    assert resp.grounding["ok"] and resp.grounding["language_ok"]


# --- trace accounting ---


def test_trace_stages_fit_inside_total(deps):
    resp = _chat(deps, "Mujhe kuch safe mutual funds batao aur unka expense ratio bhi.")
    stages = {k: v for k, v in resp.trace.items() if k != "total"}
    assert {"classify", "followup", "normalize", "plan", "execute", "render", "validate", "session"} <= set(stages)
    assert sum(stages.values()) <= resp.trace["total"] + 1.0
    assert all(v >= 0.0 for v in resp.trace.values())


def test_continuation_skips_normalize_and_plan(deps):
    _chat(deps, "kuch safe mutual funds dikhao", session="s-cont")
    resp = _chat(deps, "next", session="s-cont")
    assert "normalize" not in resp.trace and "plan" not in resp.trace
    assert resp.tool_calls["calls"][0]["intent"] == "continuation"


# --- session behaviour through the pipeline ---


def test_sticky_language_and_pagination(deps):
    first = _chat(deps, "mujhe moderate aur long term funds dikhao", session="s1")
    assert first.language is LanguageTag.HI_EN
    assert first.tool_calls["calls"][0]["intent"] == "fund_screening"

    second = _chat(deps, "Ok, next.", session="s1")
    assert second.language is LanguageTag.HI_EN  # sticky: short marker keeps session language
    assert second.tool_calls["calls"][0]["intent"] == "continuation"
    assert second.grounding["ok"]

    def names(reply):
        return {ln.split(" (")[0] for ln in reply.splitlines() if ln.startswith("- ")}

    assert names(first.reply) and names(second.reply)
    assert not names(first.reply) & names(second.reply)  # page two is genuinely new


def test_next_without_cursor_asks_to_clarify(deps):
    resp = _chat(deps, "next", session="s2")
    assert resp.tool_calls["calls"][0]["intent"] == "continuation"
    assert resp.grounding["ok"]
    # no figures to cite in a clarification
    assert resp.grounding["cited_numbers"] == []


def test_screen_then_detail_clears_cursor(deps):
    # low+moderate matches six funds, so page one leaves a live cursor
    _chat(deps, "Find moderate and long term funds", session="s3")
    state = deps.sessions.get("s3")
    assert state.page_cursor is not None
    _chat(deps, "Tell me about SBI Gold Fund", session="s3")
    assert state.page_cursor is None  # the detail turn did not page


def test_transcript_records_both_sides(deps):
    r1 = _chat(deps, "Tell me about SBI Gold Fund", session="s4")
    r2 = _chat(deps, "What is the NAV of HDFC Top 100 Fund?", session="s4")
    state = deps.sessions.get("s4")
    assert [t.role.value for t in state.turns] == ["user", "assistant", "user", "assistant"]
    assert state.turns[1].text == r1.reply
    assert state.turns[3].text == r2.reply
    assert state.turns[0].classification is not None
    assert state.turns[1].plan.to_dict() == r1.tool_calls
    assert state.turns[1].tool_results_digest["grounding_ok"]


def test_anaphor_resolves_against_previous_reply(deps):
    _chat(deps, "Show me some safe mutual funds", session="s5")
    resp = _chat(deps, "their expense ratio too", session="s5")
    assert resp.tool_calls["calls"][0]["params"].get("subject") == "previous_results"
    assert resp.grounding["ok"] and "%" in resp.reply


# --- degradation paths ---


class _PoisonOnce:
    """Generator that fabricates a figure once, then behaves."""

    def __init__(self):
        self.fallback = DeterministicGenerator()
        self.calls = 0

    def generate(self, results, tag):
        self.calls += 1
        if self.calls == 1:
            return ReplyDraft(text="You should hold 42 funds.", kinds=("stub",), template_tag="en")
        return self.fallback.generate(results, tag)


def test_ungrounded_draft_is_suppressed(deps):
    poison = _PoisonOnce()
    deps.generator = poison
    resp = _chat(deps, "Tell me about SBI Gold Fund")
    assert poison.calls == 2
    assert "42" not in resp.reply
    assert resp.grounding["ok"]  # the replacement apology carries no figures
    expected = DeterministicGenerator().templates.get("error", "en").strip()
    assert resp.reply == expected


def test_normalization_gap_degrades_to_faq(deps):
    # Devanagari content outside the finance domain stays unglossable
    resp = _chat(deps, "चुनाव नतीजे कब घोषित होंगे बताओ")
    assert resp.tool_calls["calls"][0]["intent"] == "general_faq"
    assert resp.grounding["ok"]


# --- response envelope ---


def test_response_serializes_to_json(deps):
    resp = _chat(deps, "Tell me about SBI Gold Fund")
    payload = json.loads(json.dumps(resp.to_dict(), ensure_ascii=False))
    assert payload["language"] == "en"
    assert payload["tool_calls"]["calls"][0]["intent"] == "fund_detail"
    assert isinstance(payload["trace"]["total"], float)
    assert payload["session_id"]


# --- HTTP shim ---


@pytest.fixture()
def client(deps):
    return TestClient(build_app(deps))


def test_health_endpoint(client):
    body = client.get("/v1/health").json()
    assert body["status"] == "ok" and body["deterministic"] and body["funds"] == 18


def test_chat_endpoint_round_trip(client):
    r = client.post("/v1/chat", json={"text": "Tell me about SBI Gold Fund", "user_id": "demo"})
    assert r.status_code == 200
    body = r.json()
    assert body["language"] == "en" and body["grounding"]["ok"]
    sid = body["session_id"]

    t = client.get(f"/v1/session/{sid}")
    assert t.status_code == 200
    turns = t.json()["turns"]
    assert len(turns) == 2 and turns[1]["text"] == body["reply"]


def test_chat_endpoint_rejects_blank_and_bad_tag(client):
    assert client.post("/v1/chat", json={"text": "   "}).status_code == 400
    r = client.post("/v1/chat", json={"text": "hello", "force_language": "klingon"})
    assert r.status_code == 400


def test_session_endpoint_404(client):
    assert client.get("/v1/session/nope").status_code == 404


def test_metrics_endpoint_accumulates(client):
    for _ in range(3):
        client.post("/v1/chat", json={"text": "Show me some safe mutual funds"})
    snap = client.get("/v1/metrics").json()
    assert snap["classify"]["count"] >= 3
    assert snap["total"]["mean_ms"] > 0


def test_concurrent_requests_one_session(client):
    def fire(i):
        return client.post(
            "/v1/chat",
            json={"text": "Tell me about SBI Gold Fund", "user_id": "demo", "session_id": "conc"},
        ).status_code

    with ThreadPoolExecutor(max_workers=8) as pool:
        codes = list(pool.map(fire, range(16)))
    assert codes == [200] * 16
    body = client.get("/v1/session/conc").json()
    assert len(body["turns"]) == 32


# --- stage metrics window ---


def test_stage_metrics_snapshot_shape():
    m = StageMetrics(window=4)
    for v in (1.0, 2.0, 3.0, 4.0, 5.0):
        m.record("classify", v)
    snap = m.snapshot()
    assert snap["classify"]["count"] == 4  # window evicts the oldest
    assert snap["classify"]["mean_ms"] == pytest.approx(3.5)


# --- overhead harness plumbing (small run; the acceptance test does 100) ---


def test_measure_overhead_report_shape():
    deps = build_bench_deps(service_time_s=0.02)
    report = measure_overhead(
        ["Tell me about SBI Gold Fund", "kuch safe mutual funds dikhao"],
        deps,
        min_requests=8,
        concurrency=4,
    )
    assert report.requests >= 8
    d = report.to_dict()
    assert set(d) == {
        "requests", "full_mean_ms", "full_p95_ms", "bypass_mean_ms",
        "bypass_p95_ms", "overhead_pct", "classify_mean_ms",
    }
    # the stub's fixed service time dominates both paths
    assert report.full_mean_ms >= 20.0 and report.bypass_mean_ms >= 20.0
    assert report.full_p95_ms >= report.full_mean_ms * 0.5


def test_measure_overhead_requires_queries():
    with pytest.raises(ValueError):
        measure_overhead([], build_bench_deps(0.01), min_requests=1)


def test_production_range_constant():
    assert PRODUCTION_OVERHEAD_RANGE_PCT == (4.0, 8.0)
