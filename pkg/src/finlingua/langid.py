"""Language identification for pure and code-mixed utterances.

The reference classifier is deliberately deterministic: per-token Unicode
script analysis plus a lexicon vote. Devanagari/Gujarati tokens vote for an
Indic language by script (marker lists separate Marathi from Hindi); Latin
tokens vote Hindi when they are known romanized-Hindi markers and English
otherwise; financial terms never vote. A short query with no decisive Indic
evidence falls back to the session's previous language.

An external classifier model can be plugged in via ClassifierBackend; on any
backend failure the heuristic result is used, so classification never fails.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Protocol

from .errors import LexiconValidationError, MalformedLexiconError

log = logging.getLogger(__name__)

DEFAULT_MIX_THRESHOLD = 0.15
DEFAULT_SHORT_QUERY_THRESHOLD = 3

DEFAULT_LEXICON_PATH = Path(__file__).parent / "assets" / "lexicon" / "default.tsv"


class LanguageTag(str, Enum):
    EN = "en"
    HI = "hi"
    MR = "mr"
    GU = "gu"
    HI_EN = "hi_en"
    MR_EN = "mr_en"
    GU_EN = "gu_en"
    UNKNOWN = "unknown"

    @property
    def is_code_mixed(self) -> bool:
        return self.value.endswith("_en") and self is not LanguageTag.EN

    @property
    def base_language(self) -> "LanguageTag":
        """hi_en -> hi; pure tags map to themselves."""
        if self.is_code_mixed:
            return LanguageTag(self.value.split("_")[0])
        return self


_MIXED_TAG = {
    LanguageTag.HI: LanguageTag.HI_EN,
    LanguageTag.MR: LanguageTag.MR_EN,
    LanguageTag.GU: LanguageTag.GU_EN,
}


class DecisionSource(str, Enum):
    HEURISTIC = "heuristic"
    BACKEND = "backend"
    SESSION_STICKY = "session_sticky"


@dataclass(frozen=True)
class ScriptProfile:
    """Per-script fractions over content tokens (tokens containing a letter)."""

    fractions: dict
    token_count: int


@dataclass(frozen=True)
class ClassificationResult:
    tag: LanguageTag
    confidence: float
    code_mix_ratio: float
    script_profile: ScriptProfile
    decision_source: DecisionSource


@dataclass(frozen=True)
class Lexicon:
    """Immutable knowledge base for the heuristic classifier and glosser."""

    romanized_hindi_markers: frozenset = frozenset()
    english_core: frozenset = frozenset()
    financial_terms: frozenset = frozenset()
    devanagari_hindi_markers: frozenset = frozenset()
    devanagari_marathi_markers: frozenset = frozenset()
    gloss: dict = field(default_factory=dict)
    devanagari_gloss: dict = field(default_factory=dict)

    def validate(self) -> "Lexicon":
        clash = self.financial_terms & self.romanized_hindi_markers
        if clash:
            raise LexiconValidationError(
                f"terms in both financial_terms and romanized_hindi_markers: {sorted(clash)}"
            )
        stray = set(self.gloss) - set(self.romanized_hindi_markers)
        if stray:
            raise LexiconValidationError(
                f"gloss keys missing from romanized_hindi_markers: {sorted(stray)}"
            )
        dev_all = self.devanagari_hindi_markers | self.devanagari_marathi_markers
        stray_dev = set(self.devanagari_gloss) - dev_all
        if stray_dev:
            raise LexiconValidationError(
                f"devanagari gloss keys missing from marker sets: {sorted(stray_dev)}"
            )
        return self


_LEXICON_CLASSES = {"hi_roman", "en_core", "fin_term", "dev_hi", "dev_mr"}


def load_lexicon(source=DEFAULT_LEXICON_PATH) -> Lexicon:
    """Parse a tab-separated lexicon file: class<TAB>token[<TAB>gloss].

    Duplicate entries are deduplicated; the parsed lexicon is validated
    before being returned.
    """
    path = Path(source)
    sets: dict = {name: set() for name in _LEXICON_CLASSES}
    gloss: dict = {}
    dev_gloss: dict = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise MalformedLexiconError(path, line_no, f"expected 2 or 3 tab-separated fields, got {len(parts)}")
        cls, token = parts[0].strip(), parts[1].strip()
        if cls not in _LEXICON_CLASSES:
            raise MalformedLexiconError(path, line_no, f"unknown class {cls!r}")
        if not token:
            raise MalformedLexiconError(path, line_no, "empty token")
        if cls in ("hi_roman", "en_core", "fin_term"):
            token = token.lower()
        sets[cls].add(token)
        if len(parts) == 3:
            if cls == "hi_roman":
                gloss[token] = parts[2].strip()
            elif cls in ("dev_hi", "dev_mr"):
                dev_gloss[token] = parts[2].strip()
            else:
                raise MalformedLexiconError(path, line_no, f"gloss not allowed for class {cls!r}")
    return Lexicon(
        romanized_hindi_markers=frozenset(sets["hi_roman"]),
        english_core=frozenset(sets["en_core"]),
        financial_terms=frozenset(sets["fin_term"]),
        devanagari_hindi_markers=frozenset(sets["dev_hi"]),
        devanagari_marathi_markers=frozenset(sets["dev_mr"]),
        gloss=gloss,
        devanagari_gloss=dev_gloss,
    ).validate()


# --- tokenization and script analysis ---

_TOKEN_RE = re.compile(r"[^\s]+")
# U+0964/U+0965 (danda, double danda) sit inside the Devanagari block but are
# sentence punctuation, not word characters; splitting the range keeps them out.
_WORD_CHARS_RE = re.compile(r"[0-9A-Za-zÀ-ɏऀ-ॣ०-ॿ઀-૿]+")

LATIN, DEVANAGARI, GUJARATI, OTHER = "latin", "devanagari", "gujarati", "other"
_SCRIPT_ORDER = (LATIN, DEVANAGARI, GUJARATI, OTHER)


def tokenize(text: str) -> list[str]:
    """Whitespace + punctuation split; keeps letters and digits together."""
    tokens = []
    for chunk in _TOKEN_RE.findall(text):
        tokens.extend(_WORD_CHARS_RE.findall(chunk))
    return tokens


def _char_script(ch: str) -> Optional[str]:
    cp = ord(ch)
    if 0x0900 <= cp <= 0x097F:
        return DEVANAGARI
    if 0x0A80 <= cp <= 0x0AFF:
        return GUJARATI
    if ch.isalpha():
        if cp < 0x0250:  # ASCII + Latin-1 + Latin Extended
            return LATIN
        return OTHER
    return None  # digits, marks: script-neutral


def token_script(token: str) -> Optional[str]:
    """Majority script over a token's letters; None if the token has no letters."""
    counts = {s: 0 for s in _SCRIPT_ORDER}
    seen = False
    for ch in token:
        s = _char_script(ch)
        if s is not None:
            counts[s] += 1
            seen = True
    if not seen:
        return None
    return max(_SCRIPT_ORDER, key=lambda s: counts[s])


def script_profile(text: str) -> ScriptProfile:
    """Script fractions over content tokens; digit/punctuation-only tokens excluded."""
    counts: dict = {}
    total = 0
    for token in tokenize(text):
        s = token_script(token)
        if s is None:
            continue
        counts[s] = counts.get(s, 0) + 1
        total += 1
    if total == 0:
        return ScriptProfile(fractions={}, token_count=0)
    return ScriptProfile(
        fractions={s: n / total for s, n in counts.items()},
        token_count=total,
    )


# --- classification ---

def _token_votes(text: str, lexicon: Lexicon) -> tuple[list[LanguageTag], int]:
    """Per-token language votes and the count of content tokens."""
    votes = []
    content = 0
    for token in tokenize(text):
        s = token_script(token)
        if s is None:
            continue
        content += 1
        if s == DEVANAGARI:
            if token in lexicon.devanagari_marathi_markers:
                votes.append(LanguageTag.MR)
            else:
                # unmarked Devanagari defaults to Hindi
                votes.append(LanguageTag.HI)
        elif s == GUJARATI:
            votes.append(LanguageTag.GU)
        elif s == LATIN:
            low = token.lower()
            if low in lexicon.financial_terms:
                continue  # neutral: no vote
            if low in lexicon.romanized_hindi_markers:
                votes.append(LanguageTag.HI)
            else:
                votes.append(LanguageTag.EN)
        # OTHER-script tokens count as content but cast no vote
    return votes, content


def classify(
    text: str,
    session_hint: Optional[LanguageTag] = None,
    lexicon: Optional[Lexicon] = None,
    mix_threshold: float = DEFAULT_MIX_THRESHOLD,
    short_query_threshold: int = DEFAULT_SHORT_QUERY_THRESHOLD,
) -> ClassificationResult:
    if lexicon is None:
        lexicon = load_lexicon()
    profile = script_profile(text)
    votes, content = _token_votes(text, lexicon)
    if session_hint is LanguageTag.UNKNOWN:
        session_hint = None

    def result(tag, confidence, ratio, source=DecisionSource.HEURISTIC):
        return ClassificationResult(
            tag=tag,
            confidence=confidence,
            code_mix_ratio=ratio,
            script_profile=profile,
            decision_source=source,
        )

    if content == 0:
        return result(session_hint or LanguageTag.UNKNOWN,
                      0.0 if session_hint is None else 0.5,
                      0.0,
                      DecisionSource.SESSION_STICKY if session_hint else DecisionSource.HEURISTIC)

    tally: dict = {}
    for v in votes:
        tally[v] = tally.get(v, 0) + 1
    decisive = any(v is not LanguageTag.EN for v in votes)

    # Short queries with no Indic evidence carry too little signal; defer to
    # the session's previous language rather than guessing English.
    if content < short_query_threshold and not decisive:
        if session_hint is not None:
            return result(session_hint, 0.5, 0.0, DecisionSource.SESSION_STICKY)
        return result(LanguageTag.UNKNOWN, 0.0, 0.0)

    if not votes:
        # Long query made entirely of neutral financial terms: treat as
        # English, the language the neutral vocabulary is drawn from.
        return result(LanguageTag.EN, 0.5, 0.0)

    ranked = sorted(tally.items(), key=lambda kv: (-kv[1], kv[0].value))
    majority_tag, majority_n = ranked[0]
    total = len(votes)
    ratio = (total - majority_n) / total

    if ratio >= mix_threshold and LanguageTag.EN in tally and len(tally) > 1:
        # English plus an Indic language above threshold: code-mixed tag for
        # the strongest Indic participant.
        indic = [t for t, _ in ranked if t is not LanguageTag.EN]
        base = indic[0]
        covered = tally[base] + tally[LanguageTag.EN]
        return result(_MIXED_TAG[base], covered / total, ratio)

    # Indic-Indic splits (e.g. Marathi sentence with default-Hindi tokens)
    # resolve by majority; code-mixed tags only pair an Indic language with
    # English.
    return result(majority_tag, majority_n / total, ratio)


class ClassifierBackend(Protocol):
    """External classifier endpoint; see HttpClassifierBackend."""

    def classify(self, text: str) -> tuple[str, float]: ...


_VALID_TAGS = {t.value for t in LanguageTag}


def classify_with_backend(
    text: str,
    backend: ClassifierBackend,
    lexicon: Optional[Lexicon] = None,
    session_hint: Optional[LanguageTag] = None,
    **kwargs,
) -> ClassificationResult:
    """Prefer the external model; fall back to the heuristic on any failure."""
    heuristic = classify(text, session_hint=session_hint, lexicon=lexicon, **kwargs)
    try:
        tag_str, confidence = backend.classify(text)
        if tag_str not in _VALID_TAGS:
            raise ValueError(f"backend returned invalid tag {tag_str!r}")
        confidence = float(confidence)
        if not 0.0 <= confidence <= 1.0:
            raise ValueError(f"backend confidence {confidence} out of range")
    except Exception as exc:
        log.warning("classifier backend failed (%s); using heuristic", exc)
        return heuristic
    return ClassificationResult(
        tag=LanguageTag(tag_str),
        confidence=confidence,
        code_mix_ratio=heuristic.code_mix_ratio,
        script_profile=heuristic.script_profile,
        decision_source=DecisionSource.BACKEND,
    )


def mean_classify_latency_ms(texts: Iterable[str], lexicon: Lexicon, repeats: int = 1) -> float:
    """Mean wall-clock per classify() call over a corpus; used by the latency gate."""
    texts = list(texts)
    start = time.perf_counter()
    for _ in range(repeats):
        for t in texts:
            classify(t, lexicon=lexicon)
    elapsed = time.perf_counter() - start
    return elapsed * 1000.0 / (len(texts) * repeats)
