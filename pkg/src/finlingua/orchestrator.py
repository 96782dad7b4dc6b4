"""Query normalization and tool planning.

The pipeline downstream of language identification is English-only. This
module gets every user utterance onto that path:

  normalize()     canonical English text (passthrough, gloss, or backend)
  split_intents() one clause per user request
  plan_tools()    one ToolCall per clause

The gloss normalizer is a deterministic mini-translator: a small set of
ordered reordering rules for the Hindi/Marathi constructions that actually
occur in fund queries (possessive-locative phrases, superlatives,
WH-questions, dative requests, genitive field lookups, advisory questions),
plus word-for-word glosses from the lexicon for everything else. Coverage is
bounded by the lexicon; inputs glossing too poorly raise
NormalizationIncompleteError so callers can degrade to a generic answer
instead of shipping garbage downstream.

Planning is rule-based and deliberately boring: substring and keyword checks
over canonical English. Two texts that normalize identically always plan
identically, which is what keeps mixed-language behaviour in lockstep with
English behaviour.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

from .errors import NormalizationIncompleteError
from .langid import (
    DEVANAGARI,
    GUJARATI,
    Lexicon,
    LanguageTag,
    load_lexicon,
    token_script,
    tokenize,
)


class NormalizationMode(str, Enum):
    PASSTHROUGH = "passthrough"
    GLOSS = "gloss"
    BACKEND = "backend"


class Intent(str, Enum):
    PORTFOLIO_ANALYTICS = "portfolio_analytics"
    FUND_DETAIL = "fund_detail"
    FUND_SCREENING = "fund_screening"
    FUND_COMPARISON = "fund_comparison"
    CONTINUATION = "continuation"
    GENERAL_FAQ = "general_faq"
    OUT_OF_SCOPE = "out_of_scope"


@dataclass(frozen=True)
class NormalizedQuery:
    canonical_text: str
    source_text: str
    source_tag: LanguageTag
    mode: NormalizationMode
    preserved_entities: Tuple[str, ...] = ()


@dataclass
class ToolCall:
    intent: Intent
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"intent": self.intent.value, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "ToolCall":
        return cls(intent=Intent(d["intent"]), params=dict(d.get("params", {})))


@dataclass
class ToolPlan:
    calls: Tuple[ToolCall, ...]
    clause_texts: Tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "calls": [c.to_dict() for c in self.calls],
            "clause_texts": list(self.clause_texts),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ToolPlan":
        return cls(
            calls=tuple(ToolCall.from_dict(c) for c in d.get("calls", [])),
            clause_texts=tuple(d.get("clause_texts", [])),
        )


# Utterances that continue or question the previous assistant turn. Matched
# on the stripped, lowercased text before any normalization happens.
NEXT_PAGE_MARKERS = frozenset(
    {
        "next",
        "ok",
        "okay",
        "more",
        "show more",
        "show me more",
        "next page",
        "ok next",
        "ok, next",
        "aur",
        "aage",
        "aur dikhao",
        "aage dikhao",
        "और दिखाओ",
        "आगे दिखाओ",
        "आगे",
        "आणखी दाखवा",
        "आणखी",
        "આગળ",
        "વધુ બતાવો",
    }
)

CLARIFY_MARKERS = frozenset(
    {
        "what",
        "huh",
        "kya",
        "samjha nahi",
        "samajh nahi aaya",
        "i don't understand",
        "didn't get that",
        "क्या",
        "समझा नहीं",
    }
)


def _followup_key(text: str) -> str:
    return text.strip().strip(".?!।,").strip().lower()


def is_next_page_marker(text: str) -> bool:
    return _followup_key(text) in NEXT_PAGE_MARKERS


def is_clarify_marker(text: str) -> bool:
    return _followup_key(text) in CLARIFY_MARKERS


# ---------------------------------------------------------------------------
# Gloss-mode normalization
# ---------------------------------------------------------------------------

# Structural marker classes for the reordering rules. Membership is fixed in
# code (the rules are code too); the lexicon only contributes word glosses.
_POSS_MY = frozenset({"mera", "mere", "meri", "मेरा", "मेरी", "मेरे", "माझा", "माझी", "माझे"})
_DATIVE = frozenset({"mujhe", "मुझे", "मला"})
_LOC = frozenset({"mai", "mein", "में", "मध्ये"})
_GEN = frozenset({"ka", "ke", "ki", "का", "के", "की"})
_SUP = frozenset({"sabse", "सबसे"})
_DEG = frozenset({"jyada", "zyada", "ज्यादा"})
_WH_WHICH = frozenset({"konsa", "kaunsa", "कौनसा", "कोणता", "कोणती"})
_WH_AMOUNT = frozenset({"kitna", "kitni", "कितना", "कितनी", "किती"})
_WH_HOWMANY = frozenset({"kitne"})
_WH_WHAT = frozenset({"kya", "क्या"})
_WH_HOW = frozenset({"kaisa", "kaise", "कैसा", "कैसे", "कसा", "कशी"})
_COP = frozenset({"hai", "hain", "है", "हैं", "आहे", "आहेत"})
_V_GIVE = frozenset({"deta", "dete", "deti"})
_V_TELL = frozenset({"batao", "bata", "bataiye", "batayein", "बताओ", "सांगा"})
_V_SHOW = frozenset({"dikhao", "dikhaiye", "dikha", "दिखाओ", "दाखवा"})
_V_DO = frozenset({"karna", "करना"})
_ADVIS_OK = frozenset({"theek", "thik", "sahi", "ठीक"})
_FUT = frozenset({"rahega", "hoga", "रहेगा", "रहेगी", "होगा"})
_CONJ_AND = frozenset({"aur", "और"})
_ALSO = frozenset({"bhi", "भी"})
_DEM_THIS = frozenset({"is", "yeh", "ye", "यह", "इस", "हा", "ही"})
_ABOUT = frozenset({"bare", "बारे", "बद्दल"})

_STRUCTURAL = (
    _POSS_MY | _DATIVE | _LOC | _GEN | _SUP | _DEG | _WH_WHICH | _WH_AMOUNT
    | _WH_HOWMANY | _WH_WHAT | _WH_HOW | _COP | _V_GIVE | _V_TELL | _V_SHOW
    | _V_DO | _ADVIS_OK | _FUT | _CONJ_AND | _ALSO | _ABOUT
)
# _DEM_THIS is intentionally not structural: "is"/"ye" only act structurally
# inside the advisory pattern; elsewhere they gloss in place.

_TERMINAL_PUNCT = {".": ".", "?": "?", "!": "!", "।": "."}


@dataclass
class _Item:
    """One slot in the working sequence: a source token or a rewritten chunk."""

    text: str                      # surface (token) or English text (chunk)
    low: str = ""
    is_chunk: bool = False
    is_entity: bool = False
    gloss: Optional[str] = None
    consumed: bool = False

    def in_cls(self, cls: frozenset) -> bool:
        return not self.is_chunk and self.low in cls

    def structural(self) -> bool:
        return not self.is_chunk and self.low in _STRUCTURAL


def _detect_entities(
    tokens: Sequence[str], lexicon: Optional[Lexicon] = None
) -> List[Tuple[int, int, str]]:
    """Spans of proper-name runs to preserve verbatim.

    A run is two or more consecutive capitalized or numeric tokens with at
    least one alphabetic member, or a single all-caps token that is not a
    dictionary word. A sentence-initial titlecase dictionary word ("Compare
    SBI Gold Fund ...") is sentence case, not part of the name.
    """
    known: frozenset = frozenset()
    if lexicon is not None:
        known = lexicon.english_core | lexicon.romanized_hindi_markers | lexicon.financial_terms
    spans: List[Tuple[int, int, str]] = []
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if i == 0 and _cap_or_num(tok) and not tok.isupper() and tok.lower() in known:
            i += 1
            continue
        if _cap_or_num(tok):
            j = i
            has_alpha = False
            while j < n and _cap_or_num(tokens[j]):
                if any(ch.isalpha() for ch in tokens[j]):
                    has_alpha = True
                j += 1
            length = j - i
            if length >= 2 and has_alpha:
                spans.append((i, j, " ".join(tokens[i:j])))
                i = j
                continue
            if length == 1 and tok.isupper() and len(tok) >= 2:
                spans.append((i, j, tok))
                i = j
                continue
        i += 1
    return spans


def _cap_or_num(tok: str) -> bool:
    if tok[:1].isupper() and tok[:1].isascii():
        return True
    return tok.isdigit()


def _gloss_for(tok: str, lexicon: Lexicon) -> Optional[str]:
    low = tok.lower()
    if low in lexicon.gloss:
        return lexicon.gloss[low]
    if tok in lexicon.devanagari_gloss:
        return lexicon.devanagari_gloss[tok]
    return None


def _is_devanagari(tok: str) -> bool:
    return any("ऀ" <= ch <= "ॿ" for ch in tok)


def _extend_entity(ent: str, tokens: Sequence[str], i: int, lexicon: Lexicon) -> Tuple[str, int]:
    # Devanagari content words right after a name run belong to the name
    # ("SBI गोल्ड फंड" is one fund). Absorb with title-cased glosses; a
    # structural marker or an unglossable token ends the name.
    while i < len(tokens):
        tok = tokens[i]
        if not _is_devanagari(tok) or tok in _STRUCTURAL:
            break
        gloss = _gloss_for(tok, lexicon)
        if gloss is None or " " in gloss:
            break
        ent += " " + gloss[:1].upper() + gloss[1:]
        i += 1
    return ent, i


def _build_items(text: str, lexicon: Lexicon) -> Tuple[List[_Item], List[str]]:
    tokens = tokenize(text)
    spans = _detect_entities(tokens, lexicon)
    covered = {}
    for start, end, ent in spans:
        covered[start] = (end, ent)
    items: List[_Item] = []
    entities: List[str] = []
    i = 0
    while i < len(tokens):
        if i in covered:
            end, ent = covered[i]
            ent, end = _extend_entity(ent, tokens, end, lexicon)
            items.append(_Item(text=ent, is_chunk=True, is_entity=True))
            entities.append(ent)
            i = end
            continue
        tok = tokens[i]
        items.append(_Item(text=tok, low=tok.lower(), gloss=_gloss_for(tok, lexicon)))
        i += 1
    return items, entities


def _render(item: _Item) -> str:
    if item.is_chunk:
        return item.text
    if item.gloss is not None:
        return item.gloss
    return item.text


def _render_run(items: Iterable[_Item]) -> str:
    return " ".join(_render(it) for it in items)


def _content_run_before(items: List[_Item], idx: int, allow: frozenset = frozenset()) -> int:
    """Start index of the maximal run of non-structural items ending at idx-1."""
    start = idx
    while start - 1 >= 0:
        it = items[start - 1]
        if it.is_chunk or not it.structural() or it.low in allow:
            start -= 1
        else:
            break
    return start


def _content_run_after(items: List[_Item], idx: int, allow: frozenset = frozenset()) -> int:
    """End index (exclusive) of the run of non-structural items starting at idx."""
    end = idx
    while end < len(items):
        it = items[end]
        if it.is_chunk or not it.structural() or it.low in allow:
            end += 1
        else:
            break
    return end


def _rule_advisory(items: List[_Item]) -> Optional[List[_Item]]:
    # [this]? X+ <in> invest <do> <okay> <will-be|is>  ->
    #   "is it okay to invest in this X"
    for i, it in enumerate(items):
        if it.is_chunk or not (it.low == "invest" or it.gloss == "invest"):
            continue
        if i == 0 or not items[i - 1].in_cls(_LOC):
            continue
        j = i + 1
        if j >= len(items) or not items[j].in_cls(_V_DO):
            continue
        j += 1
        if j >= len(items) or not items[j].in_cls(_ADVIS_OK):
            continue
        j += 1
        if j < len(items) and (items[j].in_cls(_FUT) or items[j].in_cls(_COP)):
            j += 1
        x_start = _content_run_before(items, i - 1)
        if x_start == i - 1:
            continue
        lead = x_start
        # a leading demonstrative folds into the fixed "this" of the rewrite
        while x_start < i - 1 and items[x_start].in_cls(_DEM_THIS):
            x_start += 1
        if x_start == i - 1:
            continue
        noun = _render_run(items[x_start : i - 1])
        chunk = _Item(text=f"is it okay to invest in this {noun}", is_chunk=True)
        return items[:lead] + [chunk] + items[j:]
    return None


def _rule_about_tell(items: List[_Item]) -> Optional[List[_Item]]:
    # [me]? X+ <of>? <about> <in>? <tell|show>  ->  "tell me about X"
    # Covers "X ke bare mein batao" and the Marathi "X baddal sanga".
    for i, it in enumerate(items):
        if not it.in_cls(_ABOUT):
            continue
        x_end = i
        if x_end - 1 >= 0 and items[x_end - 1].in_cls(_GEN):
            x_end -= 1
        j = i + 1
        if j < len(items) and items[j].in_cls(_LOC):
            j += 1
        if j >= len(items) or not (items[j].in_cls(_V_TELL) or items[j].in_cls(_V_SHOW)):
            continue
        x_start = _content_run_before(items, x_end)
        if x_start == x_end:
            continue
        lead = x_start
        if lead - 1 >= 0 and items[lead - 1].in_cls(_DATIVE):
            lead -= 1
        subject = _render_run(items[x_start:x_end])
        chunk = _Item(text=f"tell me about {subject}", is_chunk=True)
        return items[:lead] + [chunk] + items[j + 1 :]
    return None


def _rule_gen_tell(items: List[_Item]) -> Optional[List[_Item]]:
    # [me]? X+ <of> Y+ <tell|show>  ->  "tell me the Y of X"
    for i, it in enumerate(items):
        if not it.in_cls(_GEN):
            continue
        x_start = _content_run_before(items, i, allow=_POSS_MY)
        if x_start == i:
            continue
        y_end = _content_run_after(items, i + 1)
        if y_end == i + 1 or y_end >= len(items):
            continue
        verb = items[y_end]
        if not (verb.in_cls(_V_TELL) or verb.in_cls(_V_SHOW)):
            continue
        lead = x_start
        if lead - 1 >= 0 and items[lead - 1].in_cls(_DATIVE):
            lead -= 1
        head = "show me" if verb.in_cls(_V_SHOW) else "tell me"
        x_text = _render_run(items[x_start:i])
        y_text = _render_run(items[i + 1 : y_end])
        chunk = _Item(text=f"{head} the {y_text} of {x_text}", is_chunk=True)
        return items[:lead] + [chunk] + items[y_end + 1 :]
    return None


def _rule_dative_tell(items: List[_Item]) -> Optional[List[_Item]]:
    # <me> X+ <tell|show>  ->  "show me X"
    for i, it in enumerate(items):
        if not it.in_cls(_DATIVE):
            continue
        end = i + 1
        while end < len(items) and not (
            items[end].in_cls(_V_TELL) or items[end].in_cls(_V_SHOW)
        ):
            end += 1
        if end >= len(items) or end == i + 1:
            continue
        body = _render_run(items[i + 1 : end])
        chunk = _Item(text=f"show me {body}", is_chunk=True)
        return items[:i] + [chunk] + items[end + 1 :]
    return None


def _rule_bare_tell(items: List[_Item]) -> Optional[List[_Item]]:
    # X+ <tell|show>  ->  "tell me X" / "show me X"
    for i, it in enumerate(items):
        if not (it.in_cls(_V_TELL) or it.in_cls(_V_SHOW)):
            continue
        start = i
        while start - 1 >= 0 and not (
            items[start - 1].in_cls(_CONJ_AND)
            or items[start - 1].in_cls(_V_TELL)
            or items[start - 1].in_cls(_V_SHOW)
        ):
            start -= 1
        if start == i:
            continue
        head = "show me" if it.in_cls(_V_SHOW) else "tell me"
        body = _render_run(items[start:i])
        chunk = _Item(text=f"{head} {body}", is_chunk=True)
        return items[:start] + [chunk] + items[i + 1 :]
    return None


def _rule_poss_loc(items: List[_Item], tails: List[str]) -> Optional[List[_Item]]:
    # <my> X+ <in>  ->  trailing prepositional phrase "in my X"
    for i, it in enumerate(items):
        if not it.in_cls(_POSS_MY):
            continue
        end = _content_run_after(items, i + 1)
        if end == i + 1 or end >= len(items) or not items[end].in_cls(_LOC):
            continue
        tails.append(f"in my {_render_run(items[i + 1 : end])}")
        return items[:i] + items[end + 1 :]
    return None


def _rule_superlative(items: List[_Item]) -> Optional[List[_Item]]:
    # <most> <more>? X+  ->  "the highest X" (or "the best X")
    for i, it in enumerate(items):
        if not it.in_cls(_SUP):
            continue
        j = i + 1
        has_deg = j < len(items) and items[j].in_cls(_DEG)
        if has_deg:
            j += 1
        end = _content_run_after(items, j)
        if end == j:
            continue
        body_items = items[j:end]
        if has_deg:
            text = f"the highest {_render_run(body_items)}"
        elif body_items[0].gloss == "good":
            rest = _render_run(body_items[1:])
            text = f"the best {rest}".rstrip()
        else:
            text = f"the most {_render_run(body_items)}"
        chunk = _Item(text=text, is_chunk=True)
        return items[:i] + [chunk] + items[end:]
    return None


def _rule_wh_which(items: List[_Item]) -> Optional[List[_Item]]:
    # O* <which> N+ <gives> ... [is]  ->  "which N gives" O ...
    for i, it in enumerate(items):
        if not it.in_cls(_WH_WHICH):
            continue
        n_end = _content_run_after(items, i + 1)
        if n_end == i + 1:
            continue
        if n_end < len(items) and items[n_end].in_cls(_V_GIVE):
            rest = items[n_end + 1 :]
            if rest and rest[-1].in_cls(_COP):
                rest = rest[:-1]
            head = _Item(
                text=f"which {_render_run(items[i + 1 : n_end])} gives",
                is_chunk=True,
            )
            return [head] + items[:i] + rest
        if items and items[-1].in_cls(_COP) and n_end == len(items) - 1:
            # O* <which> N+ <is>  ->  "which N is" O
            head = _Item(
                text=f"which {_render_run(items[i + 1 : n_end])} is",
                is_chunk=True,
            )
            return [head] + items[:i]
    return None


def _rule_wh_amount(items: List[_Item]) -> Optional[List[_Item]]:
    # X+ <how-much> <is>?  ->  "how much is X"
    for i, it in enumerate(items):
        if not (it.in_cls(_WH_AMOUNT) or it.in_cls(_WH_HOWMANY)):
            continue
        if it.in_cls(_WH_HOWMANY) or (i == 0):
            # <how-many> N+ [is] -> "how many N are there"
            n_end = _content_run_after(items, i + 1)
            if n_end == i + 1:
                continue
            rest = items[n_end:]
            if rest and rest[0].in_cls(_COP):
                rest = rest[1:]
            head = _Item(
                text=f"how many {_render_run(items[i + 1 : n_end])} are there",
                is_chunk=True,
            )
            return items[:i] + [head] + rest
        start = _content_run_before(items, i, allow=_POSS_MY | _DEM_THIS)
        if start == i:
            continue
        rest = items[i + 1 :]
        if rest and rest[0].in_cls(_COP):
            rest = rest[1:]
        # X+ <of> Y+ <how-much>  ->  "how much is the Y of X"
        if start - 1 >= 0 and items[start - 1].in_cls(_GEN):
            x_start = _content_run_before(items, start - 1, allow=_POSS_MY)
            if x_start < start - 1:
                y_text = _render_run(items[start:i])
                x_text = _render_run(items[x_start : start - 1])
                chunk = _Item(
                    text=f"how much is the {y_text} of {x_text}", is_chunk=True
                )
                return items[:x_start] + [chunk] + rest
        chunk = _Item(
            text=f"how much is {_render_run(items[start:i])}", is_chunk=True
        )
        return items[:start] + [chunk] + rest
    return None


def _rule_wh_what(items: List[_Item]) -> Optional[List[_Item]]:
    # X+ <what> <is>  ->  "what is X"
    for i, it in enumerate(items):
        if not it.in_cls(_WH_WHAT):
            continue
        if i + 1 >= len(items) or not items[i + 1].in_cls(_COP):
            continue
        start = _content_run_before(items, i, allow=_POSS_MY | _DEM_THIS)
        if start == i:
            continue
        # X+ <of> Y+ <what> <is>  ->  "what is the Y of X"
        if start - 1 >= 0 and items[start - 1].in_cls(_GEN):
            x_start = _content_run_before(items, start - 1, allow=_POSS_MY)
            if x_start < start - 1:
                y_text = _render_run(items[start:i])
                x_text = _render_run(items[x_start : start - 1])
                chunk = _Item(
                    text=f"what is the {y_text} of {x_text}", is_chunk=True
                )
                return items[:x_start] + [chunk] + items[i + 2 :]
        chunk = _Item(text=f"what is {_render_run(items[start:i])}", is_chunk=True)
        return items[:start] + [chunk] + items[i + 2 :]
    return None


def _rule_wh_how(items: List[_Item]) -> Optional[List[_Item]]:
    # X+ <how> <is>  ->  "how is X"
    for i, it in enumerate(items):
        if not it.in_cls(_WH_HOW):
            continue
        if i + 1 >= len(items) or not items[i + 1].in_cls(_COP):
            continue
        start = _content_run_before(items, i, allow=_POSS_MY | _DEM_THIS)
        if start == i:
            continue
        chunk = _Item(text=f"how is {_render_run(items[start:i])}", is_chunk=True)
        return items[:start] + [chunk] + items[i + 2 :]
    return None


def _rule_pred_adj(items: List[_Item]) -> Optional[List[_Item]]:
    # X+ ADJ <is>  ->  "X is ADJ"
    if len(items) >= 3 and items[-1].in_cls(_COP):
        adj = items[-2]
        if not adj.is_chunk and not adj.structural():
            return items[:-2] + [_Item(text=f"is {_render(adj)}", is_chunk=True)]
    return None


_RULES_ONCE = (
    _rule_advisory,
    _rule_about_tell,
    _rule_gen_tell,
    _rule_dative_tell,
    _rule_bare_tell,
)


def _apply_rules(items: List[_Item]) -> Tuple[List[_Item], List[str]]:
    tails: List[str] = []
    for rule in _RULES_ONCE:
        out = rule(items)
        while out is not None:
            items = out
            out = rule(items)
    out = _rule_poss_loc(items, tails)
    while out is not None:
        items = out
        out = _rule_poss_loc(items, tails)
    for rule in (_rule_superlative, _rule_wh_which, _rule_wh_amount, _rule_wh_what, _rule_wh_how, _rule_pred_adj):
        out = rule(items)
        if out is not None:
            items = out
    return items, tails


def _sentence_case(text: str) -> str:
    for i, ch in enumerate(text):
        if ch.isalpha():
            return text[:i] + ch.upper() + text[i + 1 :]
    return text


def _terminal_punct(text: str) -> str:
    stripped = text.rstrip()
    if stripped and stripped[-1] in _TERMINAL_PUNCT:
        return _TERMINAL_PUNCT[stripped[-1]]
    return ""


def gloss_normalize(text: str, lexicon: Lexicon) -> Tuple[str, Tuple[str, ...], float]:
    """Deterministic gloss translation. Returns (english, entities, unglossed_ratio).

    Raises NormalizationIncompleteError when more than 40% of the
    non-English-script tokens have no gloss; the partial rendering rides on
    the exception so callers can still show something sensible.
    """
    items, entities = _build_items(text, lexicon)
    non_english = 0
    unglossed = 0
    for it in items:
        if it.is_chunk:
            continue
        if token_script(it.text) in (DEVANAGARI, GUJARATI):
            non_english += 1
            if it.gloss is None:
                unglossed += 1
    ratio = (unglossed / non_english) if non_english else 0.0

    items, tails = _apply_rules(items)
    words = [_render(it) for it in items] + tails
    body = " ".join(w for w in words if w)
    body = re.sub(r"\s+", " ", body).strip()
    out = _sentence_case(body) + _terminal_punct(text)

    if ratio > 0.40:
        raise NormalizationIncompleteError(partial_text=out, unglossed_ratio=ratio)
    return out, tuple(entities), ratio


class RephraserBackend:
    """Protocol-ish: anything with rephrase(text, source_tag) -> str."""

    def rephrase(self, text: str, source_tag: str) -> str:  # pragma: no cover
        raise NotImplementedError


def normalize(
    text: str,
    tag: LanguageTag,
    lexicon: Optional[Lexicon] = None,
    backend: Optional[RephraserBackend] = None,
) -> NormalizedQuery:
    """Map an utterance to canonical English for the downstream pipeline.

    English (and unknown) input passes through untouched, so running an
    English query through normalize() twice is the identity. Everything else
    goes through the backend rephraser when one is wired in, with the gloss
    normalizer as the deterministic fallback.
    """
    lexicon = lexicon or load_lexicon()
    if tag in (LanguageTag.EN, LanguageTag.UNKNOWN):
        tokens = tokenize(text)
        entities = tuple(s[2] for s in _detect_entities(tokens, lexicon))
        return NormalizedQuery(
            canonical_text=text,
            source_text=text,
            source_tag=tag,
            mode=NormalizationMode.PASSTHROUGH,
            preserved_entities=entities,
        )
    if backend is not None:
        try:
            english = backend.rephrase(text, tag.value).strip()
            if english:
                tokens = tokenize(english)
                entities = tuple(s[2] for s in _detect_entities(tokens, lexicon))
                return NormalizedQuery(
                    canonical_text=english,
                    source_text=text,
                    source_tag=tag,
                    mode=NormalizationMode.BACKEND,
                    preserved_entities=entities,
                )
        except Exception:
            pass  # fall through to gloss mode
    english, entities, _ = gloss_normalize(text, lexicon)
    return NormalizedQuery(
        canonical_text=english,
        source_text=text,
        source_tag=tag,
        mode=NormalizationMode.GLOSS,
        preserved_entities=entities,
    )


# ---------------------------------------------------------------------------
# Intent splitting
# ---------------------------------------------------------------------------

_PRONOUN_HEADS = frozenset({"their", "its", "my", "our"})
_VERB_HEADS = frozenset(
    {"show", "tell", "list", "compare", "find", "give", "what", "which", "how", "is", "does", "can"}
)


def _strip_clause(text: str) -> str:
    return text.strip().rstrip(".?!।").strip()


def split_intents(canonical_text: str) -> List[str]:
    """Split a canonical English utterance into independent request clauses.

    Splits on "and" only when the right side stands alone: it either starts
    with a verb or question word, starts with a possessive pronoun, or is
    elliptical ("... too"). Conjunctions inside noun phrases ("fund A and
    fund B") stay intact.
    """
    text = _strip_clause(canonical_text)
    if not text:
        return [text]
    out: List[str] = []
    remaining = text
    for _ in range(3):
        m = _find_split(remaining)
        if m is None:
            break
        left, right = m
        out.append(left)
        remaining = right
    out.append(remaining)
    return [c for c in (s.strip() for s in out) if c]


def _find_split(text: str) -> Optional[Tuple[str, str]]:
    for m in re.finditer(r"\band\b", text):
        left = text[: m.start()].strip().rstrip(",")
        right = text[m.end() :].strip()
        if not left or not right:
            continue
        words = right.split()
        first = words[0].lower() if words else ""
        elliptical = re.sub(r"[.?!]+$", "", right).endswith((" too", " also", " as well"))
        if first in _PRONOUN_HEADS or elliptical or first in _VERB_HEADS:
            if len(left.split()) >= 2:
                return left, right
    return None


# ---------------------------------------------------------------------------
# Tool planning
# ---------------------------------------------------------------------------

# Record field names double as the wire vocabulary for requested fields.
_FIELD_KEYWORDS: Tuple[Tuple[str, Tuple[str, ...]], ...] = (
    ("expense ratio", ("expense_ratio_pct",)),
    ("expense", ("expense_ratio_pct",)),
    ("nav", ("nav",)),
    ("price", ("nav",)),
    ("aum", ("aum_cr",)),
    ("risk", ("risk_level",)),
    ("returns", ("ret_1y", "ret_3y", "ret_5y")),
    ("return", ("ret_1y", "ret_3y", "ret_5y")),
    ("category", ("category",)),
)

_CATEGORY_KEYWORDS: Tuple[Tuple[str, str], ...] = (
    ("large cap", "large_cap"),
    ("flexi cap", "flexi_cap"),
    ("mid cap", "mid_cap"),
    ("small cap", "small_cap"),
    ("gold", "gold_fof"),
    ("liquid", "liquid"),
    ("elss", "elss"),
    ("tax saver", "elss"),
    ("tax saving", "elss"),
    ("tech", "sectoral_tech"),
    ("technology", "sectoral_tech"),
    ("digital", "sectoral_tech"),
    ("corporate bond", "corp_bond"),
    ("ultra short", "ultra_short"),
    ("savings", "savings"),
)

# Singular forms; each also matches its plural as a substring.
_SCREEN_HINTS = (
    "safe",
    "low risk",
    "moderate",
    "high risk",
    "high return",
    "highest return",
    "best return",
    "long term",
    "short term",
) + tuple(k for k, _ in _CATEGORY_KEYWORDS)

_OOS_TOPIC_RE = re.compile(
    r"\b(weather|movie|movies|cricket|football|flight|flights|hotel|recipe|joke|song|music|news|election|pizza|restaurant)\b"
)
_OOS_TXN_RE = re.compile(r"\b(buy|sell|redeem|purchase|withdraw|transfer)\b")

_HORIZON_RE = re.compile(r"\b([135])\s*-?\s*(?:y|yr|year|years)\b")


def _detect_fields(c: str) -> List[str]:
    fields: List[str] = []
    for kw, names in _FIELD_KEYWORDS:
        if kw in c:
            for name in names:
                if name not in fields:
                    fields.append(name)
    return fields


def _detect_horizon(c: str) -> Optional[str]:
    m = _HORIZON_RE.search(c)
    if m:
        return f"{m.group(1)}y"
    return None


def _comparison_queries(clause: str, entities: Sequence[str]) -> List[str]:
    named = [e for e in entities if not e.isdigit()]
    if len(named) >= 2:
        return list(named[:4])
    m = re.search(r"\bcompare\b(.*)$", clause, re.IGNORECASE)
    tail = m.group(1) if m else clause
    parts = re.split(r"\band\b|\bvs\.?\b|,", tail, flags=re.IGNORECASE)
    out = [_strip_clause(p) for p in parts]
    return [p for p in out if p][:4]


def _plan_clause(
    clause: str,
    entities: Sequence[str],
    page_cursor: Optional[str],
) -> ToolCall:
    c = clause.lower()

    if is_next_page_marker(clause):
        params: dict = {}
        if page_cursor:
            params["cursor"] = page_cursor
        return ToolCall(Intent.CONTINUATION, params)

    if "compare" in c or re.search(r"\bvs\.?\b", c):
        queries = _comparison_queries(clause, entities)
        if len(queries) >= 2:
            return ToolCall(Intent.FUND_COMPARISON, {"name_queries": queries})

    if "equity exposure" in c:
        return ToolCall(Intent.PORTFOLIO_ANALYTICS, {"metric": "equity_exposure"})
    if "portfolio value" in c or "total value" in c:
        # the summary carries the total, so it answers value questions
        return ToolCall(Intent.PORTFOLIO_ANALYTICS, {"metric": "summary"})
    in_portfolio = "my holdings" in c or "my portfolio" in c
    if "best performer" in c or (
        in_portfolio and ("highest return" in c or "best return" in c or "best fund" in c)
    ):
        params = {"metric": "best_performer"}
        horizon = _detect_horizon(c)
        if horizon:
            params["horizon"] = horizon
        return ToolCall(Intent.PORTFOLIO_ANALYTICS, params)
    if in_portfolio:
        return ToolCall(Intent.PORTFOLIO_ANALYTICS, {"metric": "summary"})

    fields = _detect_fields(c)
    words = c.split()
    anaphor = bool(words) and (
        words[0] in ("their", "its")
        or c.startswith("what about their")
        or c.startswith("what about its")
        or c.startswith("tell me their")
        or c.startswith("show me their")
        or c.startswith("tell me its")
    )
    if anaphor and fields:
        return ToolCall(
            Intent.FUND_DETAIL, {"subject": "previous_results", "fields": fields}
        )

    named_entities = [e for e in entities if not e.isdigit()]
    # Category words inside a proper name ("SBI Gold Fund") are not screening
    # hints; blank out entity spans before scanning for them.
    c_sans_names = c
    for ent in named_entities:
        c_sans_names = c_sans_names.replace(ent.lower(), " ")
    screen_hit = any(h in c_sans_names for h in _SCREEN_HINTS)
    fundish = "fund" in c or "funds" in c

    if c.startswith("is it okay to invest") or c.startswith("should i"):
        return ToolCall(Intent.GENERAL_FAQ, {"question": clause})
    if _OOS_TOPIC_RE.search(c) or _OOS_TXN_RE.search(c):
        return ToolCall(Intent.OUT_OF_SCOPE, {})

    m = re.search(r"\babout\b\s+(.+)$", clause, re.IGNORECASE)
    if m and named_entities:
        return ToolCall(Intent.FUND_DETAIL, {"name_query": _strip_clause(m.group(1))})
    if fields and " of " in c and not screen_hit:
        tail = clause[c.rindex(" of ") + 4 :]
        name_query = _strip_clause(tail)
        if name_query:
            return ToolCall(
                Intent.FUND_DETAIL, {"name_query": name_query, "fields": fields}
            )
    if named_entities and (fields or not screen_hit) and not (fundish and screen_hit):
        params = {"name_query": named_entities[0]}
        if fields:
            params["fields"] = fields
        return ToolCall(Intent.FUND_DETAIL, params)

    if fundish and (screen_hit or words[0] in ("show", "find", "list", "suggest")):
        params = {}
        risk: List[str] = []
        if "safe" in c or "low risk" in c:
            risk = ["low"]
        elif "moderate" in c and ("long term" in c or "long-term" in c):
            # Conservative screen: a long horizon widens moderate to include
            # low risk, ranked by fund size.
            risk = ["low", "moderate"]
            params["sort_key"] = "aum_cr"
        elif "moderate" in c:
            risk = ["moderate"]
        elif "high risk" in c:
            risk = ["high"]
        if risk:
            params["risk"] = risk
        for kw, cat in _CATEGORY_KEYWORDS:
            if kw in c:
                params["category"] = [cat]
                break
        if "high return" in c or "highest return" in c or "best return" in c:
            params["sort_key"] = "ret_3y"
        return ToolCall(Intent.FUND_SCREENING, params)

    return ToolCall(Intent.GENERAL_FAQ, {"question": clause})


def plan_tools(
    normalized: NormalizedQuery,
    page_cursor: Optional[str] = None,
) -> ToolPlan:
    """Turn a canonical English query into an ordered ToolPlan.

    Every clause yields exactly one call; unrecognized requests become
    general_faq and off-domain requests become out_of_scope, so the plan is
    never empty for non-empty input.
    """
    clauses = split_intents(normalized.canonical_text)
    calls = tuple(
        _plan_clause(clause, normalized.preserved_entities, page_cursor)
        for clause in clauses
    )
    return ToolPlan(calls=calls, clause_texts=tuple(clauses))
