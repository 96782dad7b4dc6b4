"""Numeral and date handling shared by the renderer and the grounding validator.

Both sides must agree on formatting: the renderer writes "Rs. 4,420 Cr" and
the validator reads it back to 4420.0. Keeping the two in one module is what
makes the grounding closure property hold structurally.
"""

from __future__ import annotations

import re
from datetime import date

# A numeral is a standalone digit run: "4,420", "0.10", "+29.84". Digit runs
# glued to letters ("1Y", "HDFC500") are labels, not cited figures. The
# trailing guard rejects glued word chars and half-eaten decimals but lets a
# sentence-final period sit flush against the number.
_NUMERAL_RE = re.compile(r"(?<![\w.])[+-]?\d[\d,]*(?:\.\d+)?(?!\w|\.\d)")

_MONTHS = {
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "may": 5, "jun": 6,
    "jul": 7, "aug": 8, "sep": 9, "oct": 10, "nov": 11, "dec": 12,
}
_DATE_RE = re.compile(
    r"\b(\d{1,2}) (Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec) (\d{4})\b"
)


def normalize_numeral(span: str) -> float:
    """Parse a rendered numeral span ("4,420", "+29.84") to its value."""
    return float(span.replace(",", "").replace("+", ""))


def extract_dates(text: str) -> list[tuple[str, date]]:
    """Find "04 Jul 2025"-style date spans and their date values."""
    out = []
    for m in _DATE_RE.finditer(text):
        d, mon, y = m.groups()
        out.append((m.group(0), date(int(y), _MONTHS[mon.lower()], int(d))))
    return out


def strip_dates(text: str) -> str:
    """Remove date spans; dates are verbatim artifacts, not language content."""
    return _DATE_RE.sub(" ", text)


def extract_numerals(text: str) -> list[tuple[str, float]]:
    """Find standalone numeral spans and their normalized values.

    Date spans are removed first so "04 Jul 2025" is not double-counted as
    the bare numbers 4 and 2025; callers check dates via extract_dates.
    """
    stripped = _DATE_RE.sub(" ", text)
    return [(m.group(0), normalize_numeral(m.group(0))) for m in _NUMERAL_RE.finditer(stripped)]


def format_inr(value: float, decimals: int = 0) -> str:
    """Indian digit grouping: 4420 -> "4,420", 123456 -> "1,23,456".

    With decimals, the fractional part rides along: 11355.6 -> "11,355.60".
    """
    negative = value < 0
    magnitude = abs(value)
    if decimals:
        text = f"{magnitude:.{decimals}f}"
        whole_s, frac = text.split(".")
        frac = "." + frac
    else:
        whole_s = str(int(round(magnitude)))
        frac = ""
    s = whole_s
    if len(s) > 3:
        head, tail = s[:-3], s[-3:]
        groups = []
        while len(head) > 2:
            groups.insert(0, head[-2:])
            head = head[:-2]
        if head:
            groups.insert(0, head)
        s = ",".join(groups + [tail])
    return ("-" if negative else "") + s + frac


def format_decimal(value: float, places: int = 2) -> str:
    return f"{value:.{places}f}"


def format_pct_signed(value: float, places: int = 2) -> str:
    """"+29.84" for gains, "-3.20" for losses; sign always explicit."""
    sign = "+" if value >= 0 else "-"
    return f"{sign}{abs(value):.{places}f}"


def format_nav_date(d: date) -> str:
    """"04 Jul 2025" — the one date format used across every language."""
    return f"{d.day:02d} {d.strftime('%b')} {d.year}"
