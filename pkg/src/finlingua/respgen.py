"""Template-based response generation plus the two reply validators.

Replies are rendered from per-language template files with a tiny mustache
subset ({{var}}, {{#section}}, {{^section}}). All numeric and date values are
formatted in code and injected as strings, so the set of numerals a reply can
contain is exactly the set the tool layer put into provenance.

validate_grounding() closes the loop: it re-extracts every numeral and date
from the final text (after masking known entity names, which may themselves
contain digits) and checks each against provenance. validate_language() does
the same for language: it masks entity names and re-classifies the reply.
A generator backend, when wired in, is subject to both validators and falls
back to the deterministic templates if its output fails.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import TemplateGapError
from .fintools import Provenance, ToolResult
from .langid import LanguageTag, Lexicon, classify, load_lexicon
from .numerals import (
    extract_dates,
    extract_numerals,
    format_inr,
    format_nav_date,
    format_pct_signed,
    strip_dates,
)
from .orchestrator import Intent

DEFAULT_TEMPLATES_DIR = Path(__file__).parent / "assets" / "templates"
DEFAULT_PROMPTS_DIR = Path(__file__).parent / "assets" / "prompts"


def load_prompt(name: str) -> str:
    """Versioned prompt asset (e.g. 'generator_v1'); prompts are data, not code."""
    return (DEFAULT_PROMPTS_DIR / f"{name}.txt").read_text(encoding="utf-8")

# Response shapes; each has one template file per language tag.
KINDS = (
    "exposure",
    "summary",
    "best_performer",
    "fund_detail",
    "screening",
    "comparison",
    "general_faq",
    "out_of_scope",
    "not_found",
    "empty_portfolio",
    "clarify",
    "error",
)

TEMPLATE_TAGS = ("en", "hi", "hi_en", "mr", "gu")

# Reply language for each classification tag. Code-mixed Marathi/Gujarati
# fall back to the pure language; unknown falls back to English.
_TAG_TO_TEMPLATE = {
    LanguageTag.EN: "en",
    LanguageTag.HI: "hi",
    LanguageTag.HI_EN: "hi_en",
    LanguageTag.MR: "mr",
    LanguageTag.MR_EN: "mr",
    LanguageTag.GU: "gu",
    LanguageTag.GU_EN: "gu",
    LanguageTag.UNKNOWN: "en",
}


def template_tag(tag: LanguageTag) -> str:
    return _TAG_TO_TEMPLATE[tag]


# ---------------------------------------------------------------------------
# Mini template engine
# ---------------------------------------------------------------------------

_SECTION_RE = re.compile(r"\{\{([#^])([a-z_0-9]+)\}\}(.*?)\{\{/\2\}\}", re.DOTALL)
_VAR_RE = re.compile(r"\{\{([a-z_0-9]+)\}\}")


def render_template(template: str, context: dict) -> str:
    """Render {{var}} substitutions and {{#name}}/{{^name}} sections.

    Sections iterate lists (item dicts extend the scope), gate on truthiness
    otherwise. Unknown variables raise: a template referencing a field the
    context does not provide is an authoring bug, not a runtime condition.
    """

    def render_scope(text: str, scopes: Tuple[dict, ...]) -> str:
        def lookup(name: str):
            for scope in reversed(scopes):
                if name in scope:
                    return scope[name]
            raise KeyError(name)

        def do_section(m: re.Match) -> str:
            mode, name, body = m.group(1), m.group(2), m.group(3)
            try:
                value = lookup(name)
            except KeyError:
                value = None
            if mode == "^":
                return render_scope(body, scopes) if not value else ""
            if isinstance(value, (list, tuple)):
                return "".join(
                    render_scope(body, scopes + (item if isinstance(item, dict) else {"item": item},))
                    for item in value
                )
            return render_scope(body, scopes) if value else ""

        text = _SECTION_RE.sub(do_section, text)

        def do_var(m: re.Match) -> str:
            return str(lookup(m.group(1)))

        return _VAR_RE.sub(do_var, text)

    return render_scope(template, (context,)).strip()


class TemplateStore:
    """Loads assets/templates/<kind>/<tag>.txt and verifies full coverage."""

    def __init__(self, root: Path = DEFAULT_TEMPLATES_DIR):
        self.root = Path(root)
        self._cache: Dict[Tuple[str, str], str] = {}
        for kind in KINDS:
            for tag in TEMPLATE_TAGS:
                path = self.root / kind / f"{tag}.txt"
                if not path.is_file():
                    raise TemplateGapError(kind, tag)
                self._cache[(kind, tag)] = path.read_text(encoding="utf-8")

    def get(self, kind: str, tag: str) -> str:
        try:
            return self._cache[(kind, tag)]
        except KeyError:
            raise TemplateGapError(kind, tag)

    def render(self, kind: str, tag: str, context: dict) -> str:
        return render_template(self.get(kind, tag), context)


# ---------------------------------------------------------------------------
# Localized display values
# ---------------------------------------------------------------------------

_RISK_LABELS = {
    "en": {"low": "Low", "moderate": "Moderate", "high": "High", "very_high": "Very High"},
    "hi_en": {"low": "Low", "moderate": "Moderate", "high": "High", "very_high": "Very High"},
    "hi": {"low": "कम", "moderate": "मध्यम", "high": "उच्च", "very_high": "बहुत उच्च"},
    "mr": {"low": "कमी", "moderate": "मध्यम", "high": "उच्च", "very_high": "खूप उच्च"},
    "gu": {"low": "ઓછું", "moderate": "મધ્યમ", "high": "ઊંચું", "very_high": "ખૂબ ઊંચું"},
}

_HORIZON_LABELS = {
    "en": {"1y": "1 year", "3y": "3 years", "5y": "5 years"},
    "hi_en": {"1y": "1 saal", "3y": "3 saal", "5y": "5 saal"},
    "hi": {"1y": "1 साल", "3y": "3 साल", "5y": "5 साल"},
    "mr": {"1y": "1 वर्ष", "3y": "3 वर्षे", "5y": "5 वर्षे"},
    "gu": {"1y": "1 વર્ષ", "3y": "3 વર્ષ", "5y": "5 વર્ષ"},
}

# Labels for fund fields. NAV/AUM stay Latin everywhere: they are neutral
# domain vocabulary and never sway the language validator.
_FIELD_LABELS = {
    "en": {
        "nav": "NAV",
        "aum_cr": "AUM",
        "expense_ratio_pct": "Expense ratio",
        "ret_1y": "1Y return",
        "ret_3y": "3Y return",
        "ret_5y": "5Y return",
        "risk_level": "Risk",
        "category": "Category",
    },
    "hi_en": {
        "nav": "NAV",
        "aum_cr": "AUM",
        "expense_ratio_pct": "Expense ratio",
        "ret_1y": "1Y return",
        "ret_3y": "3Y return",
        "ret_5y": "5Y return",
        "risk_level": "Risk",
        "category": "Category",
    },
    "hi": {
        "nav": "NAV",
        "aum_cr": "AUM",
        "expense_ratio_pct": "खर्च अनुपात",
        "ret_1y": "1Y रिटर्न",
        "ret_3y": "3Y रिटर्न",
        "ret_5y": "5Y रिटर्न",
        "risk_level": "जोखिम स्तर",
        "category": "श्रेणी",
    },
    "mr": {
        "nav": "NAV",
        "aum_cr": "AUM",
        "expense_ratio_pct": "खर्च गुणोत्तर",
        "ret_1y": "1Y परतावा",
        "ret_3y": "3Y परतावा",
        "ret_5y": "5Y परतावा",
        "risk_level": "जोखीम पातळी",
        "category": "प्रकार",
    },
    "gu": {
        "nav": "NAV",
        "aum_cr": "AUM",
        "expense_ratio_pct": "ખર્ચ ગુણોત્તર",
        "ret_1y": "1Y વળતર",
        "ret_3y": "3Y વળતર",
        "ret_5y": "5Y વળતર",
        "risk_level": "જોખમ સ્તર",
        "category": "શ્રેણી",
    },
}

# Category names per tag. The Indic renderings are transliterations of the
# industry terms; keeping them in the reply's script is what lets the
# language validator hold pure-Hindi replies to pure Hindi.
_CATEGORY_EN = {
    "large_cap": "Large Cap",
    "flexi_cap": "Flexi Cap",
    "mid_cap": "Mid Cap",
    "small_cap": "Small Cap",
    "elss": "ELSS",
    "sectoral_tech": "Sectoral - Technology",
    "index": "Index",
    "gold_fof": "Gold FoF",
    "liquid": "Liquid",
    "ultra_short": "Ultra Short Duration",
    "savings": "Savings",
    "corp_bond": "Corporate Bond",
}
_CATEGORY_DEV = {
    "large_cap": "लार्ज कैप",
    "flexi_cap": "फ्लेक्सी कैप",
    "mid_cap": "मिड कैप",
    "small_cap": "स्मॉल कैप",
    "elss": "ईएलएसएस",
    "sectoral_tech": "सेक्टोरल टेक्नोलॉजी",
    "index": "इंडेक्स",
    "gold_fof": "गोल्ड एफओएफ",
    "liquid": "लिक्विड",
    "ultra_short": "अल्ट्रा शॉर्ट",
    "savings": "सेविंग्स",
    "corp_bond": "कॉर्पोरेट बॉन्ड",
}
_CATEGORY_GU = {
    "large_cap": "લાર્જ કેપ",
    "flexi_cap": "ફ્લેક્સી કેપ",
    "mid_cap": "મિડ કેપ",
    "small_cap": "સ્મોલ કેપ",
    "elss": "ઇએલએસએસ",
    "sectoral_tech": "સેક્ટરલ ટેકનોલોજી",
    "index": "ઇન્ડેક્સ",
    "gold_fof": "ગોલ્ડ એફઓએફ",
    "liquid": "લિક્વિડ",
    "ultra_short": "અલ્ટ્રા શોર્ટ",
    "savings": "સેવિંગ્સ",
    "corp_bond": "કોર્પોરેટ બોન્ડ",
}
_CATEGORY_LABELS = {
    "en": _CATEGORY_EN,
    "hi_en": _CATEGORY_EN,
    "hi": _CATEGORY_DEV,
    "mr": _CATEGORY_DEV,
    "gu": _CATEGORY_GU,
}


def _fund_lines(payload: dict, tag: str, fields: Optional[Sequence[str]]) -> List[dict]:
    labels = _FIELD_LABELS[tag]
    order = ("nav", "aum_cr", "expense_ratio_pct", "ret_1y", "ret_3y", "ret_5y", "risk_level", "category")
    chosen = [f for f in (fields or order) if f in order]
    lines = []
    for name in chosen:
        if name not in payload or payload[name] is None:
            continue
        value = payload[name]
        if name == "nav":
            shown = f"₹{format_inr(value, 2)} ({format_nav_date(payload['nav_date'])})"
        elif name == "aum_cr":
            shown = f"₹{format_inr(value)} Cr"
        elif name == "expense_ratio_pct":
            shown = f"{format_inr(value, 2)}%"
        elif name.startswith("ret_"):
            shown = f"{format_pct_signed(value)}%"
        elif name == "risk_level":
            shown = _RISK_LABELS[tag][value]
        elif name == "category":
            shown = _CATEGORY_LABELS[tag][value]
        else:
            shown = str(value)
        lines.append({"label": labels[name], "value": shown})
    return lines


def build_context(result: ToolResult, tag: str) -> Tuple[str, dict]:
    """Map a ToolResult to (template kind, render context)."""
    data = result.data
    if result.status == "not_found":
        # Deliberately does not echo the query: unknown names can contain
        # digits, and refusal replies must carry no numerals at all.
        return "not_found", {}
    if result.status == "empty_portfolio":
        return "empty_portfolio", {}
    if result.status == "needs_clarification":
        return "clarify", {}
    if result.status == "error":
        # Polite apology with zero figures; grounding holds trivially.
        return "error", {}
    if result.intent is Intent.OUT_OF_SCOPE:
        return "out_of_scope", {}
    if result.intent is Intent.GENERAL_FAQ:
        return "general_faq", {}

    if result.intent is Intent.PORTFOLIO_ANALYTICS:
        metric = data.get("metric")
        if metric == "equity_exposure":
            return "exposure", {"exposure_pct": format_inr(data["exposure_pct"], 2)}
        if metric == "best_performer":
            return "best_performer", {
                "name": data["name"],
                "return_pct": format_pct_signed(data["return_pct"]),
                "horizon_label": _HORIZON_LABELS[tag][data["horizon"]],
            }
        rows = [
            {
                "name": r["name"],
                "value_inr": format_inr(r["value"], 2),
                "weight_pct": format_inr(r["weight_pct"], 1),
            }
            for r in data["rows"]
        ]
        return "summary", {"rows": rows, "total_inr": format_inr(data["total_value"], 2)}

    if result.intent in (Intent.FUND_SCREENING, Intent.CONTINUATION):
        rows = []
        for payload in data["funds"]:
            ret3 = payload.get("ret_3y")
            rows.append(
                {
                    "name": payload["name"],
                    "aum_inr": format_inr(payload["aum_cr"]),
                    "risk_label": _RISK_LABELS[tag][payload["risk_level"]],
                    # Young funds have no 3Y history; the row drops the chunk.
                    "ret3": format_pct_signed(ret3) if ret3 is not None else "",
                }
            )
        return "screening", {
            "rows": rows,
            "total": data["total"],
            "has_more": bool(data.get("next_cursor")),
            "any": bool(rows),
        }

    if result.intent is Intent.FUND_COMPARISON:
        rows = [
            {"name": p["name"], "lines": _fund_lines(p, tag, None)}
            for p in data["funds"]
        ]
        return "comparison", {"rows": rows}

    # fund_detail (single or anaphoric multi)
    rows = [
        {"name": p["name"], "lines": _fund_lines(p, tag, data.get("fields"))}
        for p in data["funds"]
    ]
    return "fund_detail", {"rows": rows}


@dataclass
class ReplyDraft:
    text: str
    kinds: Tuple[str, ...]
    template_tag: str


class DeterministicGenerator:
    """Renders tool results straight from the bundled templates."""

    def __init__(self, templates: Optional[TemplateStore] = None):
        self.templates = templates or TemplateStore()

    def generate(self, results: Sequence[ToolResult], tag: LanguageTag) -> ReplyDraft:
        ttag = template_tag(tag)
        blocks = []
        kinds = []
        for result in results:
            kind, context = build_context(result, ttag)
            kinds.append(kind)
            blocks.append(self.templates.render(kind, ttag, context))
        return ReplyDraft(text="\n\n".join(blocks), kinds=tuple(kinds), template_tag=ttag)


class GeneratorBackend:
    """Protocol-ish: anything with complete(prompt) -> str."""

    def complete(self, prompt: str) -> str:  # pragma: no cover
        raise NotImplementedError


def _facts_block(results: Sequence[ToolResult]) -> str:
    lines = []
    for r in results:
        lines.append(f"- intent={r.intent.value} status={r.status} data={r.data}")
    return "\n".join(lines)


class BackendGenerator:
    """LLM-backed generation with validator-enforced fallback.

    The model is given only grounded facts. If its output cites a numeral we
    cannot trace to provenance, or drifts from the reply language, the
    deterministic renderer takes over. The pipeline never ships an
    unvalidated draft.
    """

    def __init__(
        self,
        backend: GeneratorBackend,
        templates: Optional[TemplateStore] = None,
        lexicon: Optional[Lexicon] = None,
        max_attempts: int = 2,
    ):
        self.backend = backend
        self.fallback = DeterministicGenerator(templates)
        self.lexicon = lexicon or load_lexicon()
        self.max_attempts = max_attempts
        self.last_degraded = False

    def generate(self, results: Sequence[ToolResult], tag: LanguageTag) -> ReplyDraft:
        prov = Provenance()
        for r in results:
            prov.merge(r.provenance)
        prompt = load_prompt("generator_v1").format(
            tag=tag.value, facts=_facts_block(results)
        )
        self.last_degraded = False
        for _ in range(self.max_attempts):
            try:
                text = self.backend.complete(prompt).strip()
            except Exception:
                break
            if not text:
                continue
            grounding = validate_grounding(text, prov)
            language = validate_language(text, tag, self.lexicon, prov)
            if grounding.ok and language.ok:
                return ReplyDraft(text=text, kinds=("backend",), template_tag=template_tag(tag))
        self.last_degraded = True
        return self.fallback.generate(results, tag)


# ---------------------------------------------------------------------------
# Validators
# ---------------------------------------------------------------------------


@dataclass
class GroundingReport:
    ok: bool
    violations: List[str] = field(default_factory=list)
    cited_numbers: List[float] = field(default_factory=list)
    cited_dates: List[str] = field(default_factory=list)


def _mask_strings(text: str, strings: Sequence[str]) -> str:
    # Longest first so "SBI Gold Fund - Direct Growth" masks before "SBI".
    for s in sorted(set(strings), key=len, reverse=True):
        if s:
            text = text.replace(s, " ")
    return text


def validate_grounding(text: str, provenance: Provenance) -> GroundingReport:
    """Every numeral and date in the reply must come from tool provenance.

    Entity names are masked first so digits inside proper names ("HDFC Top
    100 Fund") are not mistaken for figures. Dates are matched and removed
    before numeral extraction so "04 Jul 2025" is not read as 04 and 2025.
    """
    report = GroundingReport(ok=True)
    masked = _mask_strings(text, provenance.strings)

    for span, value in extract_dates(masked):
        report.cited_dates.append(span)
        if value not in provenance.dates:
            report.ok = False
            report.violations.append(f"date {span!r} not in provenance")
        masked = masked.replace(span, " ")

    allowed = provenance.numbers
    for span, value in extract_numerals(masked):
        report.cited_numbers.append(value)
        if not any(abs(value - p) < 1e-9 for p in allowed):
            report.ok = False
            report.violations.append(f"numeral {span!r} not in provenance")
    return report


@dataclass
class LanguageReport:
    ok: bool
    expected: str
    observed: str


def validate_language(
    text: str,
    expected: LanguageTag,
    lexicon: Optional[Lexicon] = None,
    provenance: Optional[Provenance] = None,
) -> LanguageReport:
    """Does the reply read as the language the user spoke?

    Fund names are masked before classification: they are quoted verbatim in
    every language and should not drag a Hindi reply toward code-mixed.
    Every code-mixed tag accepts its pure base: a reply may sit anywhere on
    the mixed-to-pure continuum of the user's own language (a short Hinglish
    reply whose only Latin tokens are neutral terms like NAV reads as hi).
    What this validator exists to catch is a reply in the wrong language.
    """
    lexicon = lexicon or load_lexicon()
    masked = _mask_strings(text, provenance.strings if provenance else [])
    masked = strip_dates(masked)
    observed = classify(masked, lexicon=lexicon).tag
    if expected is LanguageTag.UNKNOWN:
        return LanguageReport(True, expected.value, observed.value)
    acceptable = {expected}
    if expected.is_code_mixed:
        acceptable.add(expected.base_language)
    ok = observed in acceptable
    return LanguageReport(ok, expected.value, observed.value)
