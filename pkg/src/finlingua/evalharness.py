"""Golden-conversation runner, rubric scoring, engagement metrics.

The golden suite is the regression net for the whole pipeline: every turn
pins the expected language tag, the exact tool plan, and a reference
answer. Aggregates are always recomputed from per-turn rows, never stored,
so a report can't drift from its own data.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import yaml

from .errors import SuiteParseError
from .gateway import ChatRequest, ChatResponse, PipelineDeps, handle_chat
from .langid import LanguageTag
from .numerals import extract_numerals
from .orchestrator import ToolPlan

log = logging.getLogger(__name__)

CATEGORIES = ("pure_english", "pure_hindi", "hinglish_general", "hinglish_financial")

# Which tags a category's turns may expect. Hinglish conversations can
# contain pure turns (sticky short queries, an English aside) but must have
# at least one code-mixed turn to earn the label.
_CATEGORY_TAGS = {
    "pure_english": {LanguageTag.EN},
    "pure_hindi": {LanguageTag.HI},
    "hinglish_general": {LanguageTag.HI_EN, LanguageTag.HI, LanguageTag.EN},
    "hinglish_financial": {LanguageTag.HI_EN, LanguageTag.HI, LanguageTag.EN},
}


class ErrorCategory(str, Enum):
    INTENT_MISCLASSIFICATION = "intent_misclassification"
    FACTUAL_HALLUCINATION = "factual_hallucination"
    LANGUAGE_DETECTION_FAILURE = "language_detection_failure"
    AWKWARD_PHRASING = "awkward_phrasing"


class JudgeMode(str, Enum):
    DETERMINISTIC = "deterministic"
    BACKEND = "backend"


@dataclass
class RubricScores:
    completeness: int
    factual_accuracy: int
    language_consistency: bool
    contextual_awareness: int
    scope_compliance: int
    judge_mode: JudgeMode

    def __post_init__(self):
        for name in ("completeness", "factual_accuracy", "contextual_awareness", "scope_compliance"):
            v = getattr(self, name)
            if not 1 <= v <= 5:
                raise ValueError(f"{name} must be 1..5, got {v}")


@dataclass(frozen=True)
class GoldenTurn:
    user_text: str
    expected_language: LanguageTag
    expected_plan: ToolPlan
    reference_answer: str
    rubric_expectations: Optional[dict] = None


@dataclass(frozen=True)
class GoldenConversation:
    id: str
    category: str
    turns: tuple
    user_id: str = "demo"


# ---------------------------------------------------------------------------
# Suite loading
# ---------------------------------------------------------------------------


def _parse_conversation(path: Path) -> GoldenConversation:
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f", line {mark.line + 1}" if mark else ""
        raise SuiteParseError(f"{path}{line}: {exc}") from exc
    if not isinstance(raw, dict):
        raise SuiteParseError(f"{path}: conversation must be a mapping")

    def fail(reason: str):
        raise SuiteParseError(f"{path}: {reason}")

    for key in ("id", "category", "turns"):
        if key not in raw:
            fail(f"missing key {key!r}")
    if raw["category"] not in CATEGORIES:
        fail(f"unknown category {raw['category']!r}")
    turns = []
    for i, t in enumerate(raw["turns"]):
        for key in ("user_text", "expected_language", "expected_plan", "reference_answer"):
            if key not in t:
                fail(f"turn {i}: missing key {key!r}")
        try:
            tag = LanguageTag(t["expected_language"])
        except ValueError:
            fail(f"turn {i}: unknown language tag {t['expected_language']!r}")
        try:
            plan = ToolPlan.from_dict(t["expected_plan"])
        except (KeyError, ValueError, TypeError) as exc:
            fail(f"turn {i}: bad expected_plan: {exc}")
        if not plan.calls:
            fail(f"turn {i}: expected_plan has no calls")
        turns.append(
            GoldenTurn(
                user_text=t["user_text"],
                expected_language=tag,
                expected_plan=plan,
                reference_answer=t["reference_answer"],
                rubric_expectations=t.get("rubric_expectations"),
            )
        )
    allowed = _CATEGORY_TAGS[raw["category"]]
    bad = [t.expected_language.value for t in turns if t.expected_language not in allowed]
    if bad:
        fail(f"category {raw['category']} cannot expect tags {bad}")
    if raw["category"].startswith("hinglish") and not any(
        t.expected_language is LanguageTag.HI_EN for t in turns
    ):
        fail("hinglish conversation needs at least one hi_en turn")
    return GoldenConversation(
        id=str(raw["id"]),
        category=raw["category"],
        turns=tuple(turns),
        user_id=raw.get("user_id", "demo"),
    )


def load_suite(suite_dir) -> List[GoldenConversation]:
    suite_dir = Path(suite_dir)
    files = sorted(suite_dir.glob("*.yaml"))
    conversations = [_parse_conversation(p) for p in files]
    seen = set()
    for c in conversations:
        if c.id in seen:
            raise SuiteParseError(f"{suite_dir}: duplicate conversation id {c.id!r}")
        seen.add(c.id)
    return conversations


# ---------------------------------------------------------------------------
# Rubric
# ---------------------------------------------------------------------------

_NAME_RUN_RE = re.compile(r"(?:[A-Z][A-Za-z0-9]*\s+){1,}[A-Z][A-Za-z0-9]*")
_OOD_MARKERS = ("weather", "cricket", "movie", "recipe", "politics")


def _reference_names(reference: str) -> List[str]:
    return [m.group(0) for m in _NAME_RUN_RE.finditer(reference)]


def _scale_coverage(found: int, total: int) -> int:
    if total == 0:
        return 5
    return max(1, 1 + round(4 * found / total))


def score_rubric(
    turn_output: ChatResponse,
    reference: str,
    expected_language: LanguageTag,
    judge=None,
) -> RubricScores:
    """Five-criterion scoring; deterministic wherever the artifact can be.

    factual_accuracy and language_consistency always come from validators.
    The remaining three come from a judge backend when one is wired in;
    otherwise from proxies (reference numeral/name coverage, referent-name
    coverage, out-of-domain marker absence) and judge_mode says so.
    """
    reply = turn_output.reply

    language_ok = bool(turn_output.grounding.get("language_ok")) and (
        turn_output.language is expected_language
    )

    ref_numerals = extract_numerals(reference)  # (span, value) pairs
    missing = 0
    if ref_numerals:
        cited = set(turn_output.grounding.get("cited_numbers", []))
        reply_values = {value for _, value in extract_numerals(reply)}
        for _, value in ref_numerals:
            if value not in reply_values and value not in cited:
                missing += 1
    violations = len(turn_output.grounding.get("violations", []))
    factual = 5 - missing - 2 * violations
    factual = max(1, min(5, factual))
    if not turn_output.grounding.get("ok", False):
        factual = 1

    judge_mode = JudgeMode.DETERMINISTIC
    completeness = contextual = scope = None
    if judge is not None:
        try:
            scores = _judge_scores(judge, reply, reference)
            completeness = scores["completeness"]
            contextual = scores["contextual_awareness"]
            scope = scores["scope_compliance"]
            judge_mode = JudgeMode.BACKEND
        except Exception as exc:
            log.warning("judge backend failed (%s); using deterministic proxies", exc)

    if completeness is None:
        names = _reference_names(reference)
        keys = [span for span, _ in ref_numerals] + names
        found = sum(1 for k in keys if k in reply or _numeral_in(k, reply))
        completeness = _scale_coverage(found, len(keys))
        found_names = sum(1 for n in names if n in reply)
        contextual = _scale_coverage(found_names, len(names))
        low = reply.lower()
        scope = 1 if any(m in low for m in _OOD_MARKERS) else 5

    return RubricScores(
        completeness=completeness,
        factual_accuracy=factual,
        language_consistency=language_ok,
        contextual_awareness=contextual,
        scope_compliance=scope,
        judge_mode=judge_mode,
    )


def _numeral_in(key: str, reply: str) -> bool:
    try:
        value = float(key.replace(",", ""))
    except ValueError:
        return False
    return any(value == v for _, v in extract_numerals(reply))


def _judge_scores(judge, reply: str, reference: str) -> dict:
    from .respgen import load_prompt

    # replace(), not format(): the prompt shows a literal JSON shape.
    prompt = (
        load_prompt("judge_v1").replace("{reply}", reply).replace("{reference}", reference)
    )
    raw = judge.complete(prompt)
    scores = json.loads(raw.strip())
    out = {}
    for key in ("completeness", "contextual_awareness", "scope_compliance"):
        v = int(scores[key])
        if not 1 <= v <= 5:
            raise ValueError(f"judge score {key}={v} out of range")
        out[key] = v
    return out


# ---------------------------------------------------------------------------
# Golden run
# ---------------------------------------------------------------------------


@dataclass
class TurnResult:
    conversation_id: str
    category: str
    turn_index: int
    user_text: str
    expected_language: LanguageTag
    observed_language: LanguageTag
    plan_match: bool
    language_match: bool
    grounding_ok: bool
    rubric: Optional[RubricScores]
    reply: str
    expected_plan: dict
    observed_plan: dict
    harness_error: Optional[str] = None
    rubric_floors: Optional[dict] = None

    @property
    def rubric_ok(self) -> bool:
        if self.harness_error is not None:
            return False
        if not self.rubric_floors:
            return True
        if self.rubric is None:
            return False
        r = self.rubric
        checks = {
            "completeness": r.completeness,
            "factual_accuracy": r.factual_accuracy,
            "contextual_awareness": r.contextual_awareness,
            "scope_compliance": r.scope_compliance,
        }
        return all(checks[k] >= v for k, v in self.rubric_floors.items() if k in checks)

    @property
    def passed(self) -> bool:
        return (
            self.harness_error is None
            and self.plan_match
            and self.language_match
            and self.grounding_ok
            and self.rubric_ok
        )


def classify_error(turn: TurnResult) -> Optional[ErrorCategory]:
    """Map a failed turn to the single most upstream failure category."""
    if turn.passed:
        return None
    if turn.harness_error is not None:
        # No observation to blame a stage on; the plan never materialized.
        return ErrorCategory.INTENT_MISCLASSIFICATION
    if not turn.language_match:
        return ErrorCategory.LANGUAGE_DETECTION_FAILURE
    if not turn.grounding_ok:
        return ErrorCategory.FACTUAL_HALLUCINATION
    if not turn.plan_match:
        return ErrorCategory.INTENT_MISCLASSIFICATION
    return ErrorCategory.AWKWARD_PHRASING


@dataclass
class EvalReport:
    turns: List[TurnResult]
    mode: str
    conversations: int

    # All aggregates are recomputed on access; the per-turn rows are the
    # only stored truth.
    @property
    def turn_count(self) -> int:
        return len(self.turns)

    @property
    def plan_match_rate(self) -> float:
        return self._rate(lambda t: t.plan_match)

    @property
    def language_match_rate(self) -> float:
        return self._rate(lambda t: t.language_match)

    @property
    def grounding_rate(self) -> float:
        return self._rate(lambda t: t.grounding_ok)

    def _rate(self, pred) -> float:
        if not self.turns:
            return 0.0
        return 100.0 * sum(1 for t in self.turns if pred(t)) / len(self.turns)

    @property
    def error_tags(self) -> List[ErrorCategory]:
        tags = []
        for t in self.turns:
            tag = classify_error(t)
            if tag is not None:
                tags.append(tag)
        return tags

    def confusion(self) -> Dict[str, Dict[str, int]]:
        """category -> observed language tag -> user-turn count."""
        table: Dict[str, Dict[str, int]] = {c: {} for c in CATEGORIES}
        for t in self.turns:
            row = table.setdefault(t.category, {})
            key = t.observed_language.value
            row[key] = row.get(key, 0) + 1
        return table


def run_golden(
    suite: Sequence[GoldenConversation],
    deps: PipelineDeps,
    judge=None,
    mode: str = "deterministic",
) -> EvalReport:
    """Run every conversation turn-by-turn in its own session.

    Suite turns share the conversation's session (follow-ups depend on it);
    pipeline exceptions become failed turns with harness_error set, never
    harness crashes.
    """
    results: List[TurnResult] = []
    for conv in suite:
        session_id = f"golden::{conv.id}"
        for i, turn in enumerate(conv.turns):
            request = ChatRequest(
                text=turn.user_text, user_id=conv.user_id, session_id=session_id
            )
            try:
                response = handle_chat(request, deps)
            except Exception as exc:  # recorded, not raised
                log.exception("pipeline error on %s turn %d", conv.id, i)
                results.append(
                    TurnResult(
                        conversation_id=conv.id,
                        category=conv.category,
                        turn_index=i,
                        user_text=turn.user_text,
                        expected_language=turn.expected_language,
                        observed_language=LanguageTag.UNKNOWN,
                        plan_match=False,
                        language_match=False,
                        grounding_ok=False,
                        rubric=None,
                        reply="",
                        expected_plan=turn.expected_plan.to_dict(),
                        observed_plan={},
                        harness_error=f"{type(exc).__name__}: {exc}",
                        rubric_floors=turn.rubric_expectations,
                    )
                )
                continue
            rubric = score_rubric(
                response, turn.reference_answer, turn.expected_language, judge=judge
            )
            results.append(
                TurnResult(
                    conversation_id=conv.id,
                    category=conv.category,
                    turn_index=i,
                    user_text=turn.user_text,
                    expected_language=turn.expected_language,
                    observed_language=response.language,
                    plan_match=response.tool_calls == turn.expected_plan.to_dict(),
                    language_match=response.language is turn.expected_language,
                    grounding_ok=bool(response.grounding.get("ok")),
                    rubric=rubric,
                    reply=response.reply,
                    expected_plan=turn.expected_plan.to_dict(),
                    observed_plan=response.tool_calls,
                    rubric_floors=turn.rubric_expectations,
                )
            )
    return EvalReport(turns=results, mode=mode, conversations=len(suite))


# ---------------------------------------------------------------------------
# Engagement metrics
# ---------------------------------------------------------------------------

_DAY_S = 86400.0


@dataclass
class EngagementReport:
    task_completion_rate: float
    avg_session_length: float
    retention_rate: float
    window_days: int
    sessions: int
    users: int
    malformed_lines: int

    def __post_init__(self):
        for name in ("task_completion_rate", "retention_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"{name} out of [0,100]: {v}")


def _iter_log_lines(logs) -> List[str]:
    paths: List[Path] = []
    logs = Path(logs)
    if logs.is_dir():
        paths = sorted(logs.glob("*.jsonl"))
    else:
        paths = [logs]
    lines: List[str] = []
    for p in paths:
        lines.extend(p.read_text(encoding="utf-8").splitlines())
    return lines


def engagement_metrics(logs, window_days: int = 30) -> EngagementReport:
    """Completion, average length, and first-day cohort retention.

    A session counts as completed when its final assistant turn both
    executed its tools without error and passed grounding (the strictest
    reading; relax by rewriting the digest upstream if needed). Retention:
    of the users whose first session falls on their day 0, the share with
    another session within window_days after that day.
    """
    sessions: Dict[str, List[dict]] = {}
    malformed = 0
    for raw in _iter_log_lines(logs):
        raw = raw.strip()
        if not raw:
            continue
        try:
            d = json.loads(raw)
        except ValueError:
            malformed += 1
            continue
        if not isinstance(d, dict) or not all(
            k in d for k in ("session_id", "user_id", "role", "ts")
        ):
            malformed += 1
            continue
        sessions.setdefault(d["session_id"], []).append(d)

    if not sessions:
        return EngagementReport(0.0, 0.0, 0.0, window_days, 0, 0, malformed)

    completed = 0
    lengths = []
    user_session_days: Dict[str, List[float]] = {}
    for sid, turns in sessions.items():
        turns.sort(key=lambda d: d.get("ts", 0.0))
        lengths.append(len(turns))
        assistant_turns = [t for t in turns if t.get("role") == "assistant"]
        if assistant_turns:
            digest = assistant_turns[-1].get("tool_results_digest") or {}
            if digest.get("ok") and digest.get("grounding_ok"):
                completed += 1
        user = turns[0]["user_id"]
        start_day = turns[0]["ts"] // _DAY_S
        user_session_days.setdefault(user, []).append(start_day)

    retained = 0
    for user, days in user_session_days.items():
        day0 = min(days)
        if any(day0 < d <= day0 + window_days for d in days):
            retained += 1

    return EngagementReport(
        task_completion_rate=100.0 * completed / len(sessions),
        avg_session_length=sum(lengths) / len(lengths),
        retention_rate=100.0 * retained / len(user_session_days),
        window_days=window_days,
        sessions=len(sessions),
        users=len(user_session_days),
        malformed_lines=malformed,
    )


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

_EVAL_CSV_COLUMNS = [
    "conversation_id",
    "category",
    "turn_index",
    "plan_match",
    "language_match",
    "grounding_ok",
    "expected_language",
    "observed_language",
    "completeness",
    "factual_accuracy",
    "language_consistency",
    "contextual_awareness",
    "scope_compliance",
    "judge_mode",
    "error_tag",
]


def emit_report(report, fmt: str = "table-text") -> str:
    if fmt not in ("table-text", "csv"):
        raise ValueError(f"unknown report format {fmt!r}")
    if isinstance(report, EngagementReport):
        return _emit_engagement(report, fmt)
    return _emit_eval(report, fmt)


def _emit_eval(report: EvalReport, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=_EVAL_CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for t in report.turns:
            tag = classify_error(t)
            r = t.rubric
            w.writerow(
                {
                    "conversation_id": t.conversation_id,
                    "category": t.category,
                    "turn_index": t.turn_index,
                    "plan_match": int(t.plan_match),
                    "language_match": int(t.language_match),
                    "grounding_ok": int(t.grounding_ok),
                    "expected_language": t.expected_language.value,
                    "observed_language": t.observed_language.value,
                    "completeness": r.completeness if r else "",
                    "factual_accuracy": r.factual_accuracy if r else "",
                    "language_consistency": int(r.language_consistency) if r else "",
                    "contextual_awareness": r.contextual_awareness if r else "",
                    "scope_compliance": r.scope_compliance if r else "",
                    "judge_mode": r.judge_mode.value if r else "",
                    "error_tag": tag.value if tag else "",
                }
            )
        return buf.getvalue()

    lines = [
        f"golden suite ({report.mode} mode): "
        f"{report.conversations} conversations, {report.turn_count} turns",
        f"  tool-call exact match : {report.plan_match_rate:6.1f}%",
        f"  language match        : {report.language_match_rate:6.1f}%",
        f"  grounding ok          : {report.grounding_rate:6.1f}%",
        "",
        "language confusion (user turns per observed tag):",
    ]
    tags = sorted({t.observed_language.value for t in report.turns})
    header = "  {:<20}".format("category") + "".join(f"{t:>8}" for t in tags)
    lines.append(header)
    confusion = report.confusion()
    for cat in CATEGORIES:
        row = confusion.get(cat, {})
        lines.append(
            "  {:<20}".format(cat) + "".join(f"{row.get(t, 0):>8}" for t in tags)
        )
    errs = report.error_tags
    if errs:
        lines.append("")
        lines.append("failure categories:")
        counts: Dict[str, int] = {}
        for e in errs:
            counts[e.value] = counts.get(e.value, 0) + 1
        for name, n in sorted(counts.items()):
            lines.append(f"  {name:<28} {n}")
    return "\n".join(lines) + "\n"


def _emit_engagement(report: EngagementReport, fmt: str) -> str:
    fields = [
        ("task_completion_rate", f"{report.task_completion_rate:.1f}"),
        ("avg_session_length", f"{report.avg_session_length:.1f}"),
        ("retention_rate", f"{report.retention_rate:.1f}"),
        ("window_days", str(report.window_days)),
        ("sessions", str(report.sessions)),
        ("users", str(report.users)),
        ("malformed_lines", str(report.malformed_lines)),
    ]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([k for k, _ in fields])
        w.writerow([v for _, v in fields])
        return buf.getvalue()
    width = max(len(k) for k, _ in fields)
    lines = ["engagement metrics:"]
    for k, v in fields:
        suffix = "%" if k.endswith("rate") else ""
        lines.append(f"  {k:<{width}} : {v}{suffix}")
    return "\n".join(lines) + "\n"
