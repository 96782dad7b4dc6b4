"""Fund data ingestion and the tool executors behind each intent.

Everything here is deterministic and fully grounded: every numeric or date
value that can surface in a reply is collected into the result's provenance
so the response validator can verify the final text against it. Executors
never guess; a name query that does not clear the match floor raises
FundNotFoundError and the caller answers with an explicit refusal.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import (
    DataIntegrityError,
    EmptyPortfolioError,
    FundNotFoundError,
    IngestionError,
)
from .orchestrator import Intent, ToolCall, ToolPlan

RISK_LEVELS = ("low", "moderate", "high", "very_high")

CATEGORIES = (
    "large_cap",
    "flexi_cap",
    "mid_cap",
    "small_cap",
    "elss",
    "sectoral_tech",
    "index",
    "gold_fof",
    "liquid",
    "ultra_short",
    "savings",
    "corp_bond",
)

# Categories whose NAV is driven by equity markets; used for exposure math.
EQUITY_CATEGORIES = frozenset(
    {"large_cap", "flexi_cap", "mid_cap", "small_cap", "elss", "sectoral_tech", "index"}
)

DEFAULT_PAGE_SIZE = 3

_FUNDS_CSV_HEADER = [
    "fund_id",
    "name",
    "category",
    "risk_level",
    "nav",
    "nav_date",
    "aum_cr",
    "expense_ratio_pct",
    "ret_1y",
    "ret_3y",
    "ret_5y",
]

DEFAULT_FUNDS_CSV = Path(__file__).parent / "assets" / "funds" / "funds.csv"
DEFAULT_PORTFOLIOS_JSONL = Path(__file__).parent / "assets" / "funds" / "portfolios.jsonl"


@dataclass(frozen=True)
class FundRecord:
    fund_id: str
    name: str
    category: str
    risk_level: str
    nav: float
    nav_date: date
    aum_cr: float
    expense_ratio_pct: float
    ret_1y: Optional[float]
    ret_3y: Optional[float]
    ret_5y: Optional[float]

    def ret(self, horizon: str) -> Optional[float]:
        return {"1y": self.ret_1y, "3y": self.ret_3y, "5y": self.ret_5y}[horizon]


_MATCH_STOPWORDS = frozenset(
    {"fund", "funds", "the", "a", "an", "of", "plan", "scheme", "mutual", "direct", "growth"}
)
MATCH_FLOOR = 0.6


def _name_tokens(text: str) -> List[str]:
    out = []
    for raw in text.lower().replace("-", " ").split():
        tok = "".join(ch for ch in raw if ch.isalnum())
        if tok and tok not in _MATCH_STOPWORDS:
            out.append(tok)
    return out


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


class FundStore:
    """In-memory fund table with deterministic fuzzy name lookup."""

    def __init__(self, funds: Sequence[FundRecord]):
        self.funds: Tuple[FundRecord, ...] = tuple(funds)
        self.by_id: Dict[str, FundRecord] = {f.fund_id: f for f in self.funds}
        self._tokens: Dict[str, frozenset] = {
            f.fund_id: frozenset(_name_tokens(f.name)) for f in self.funds
        }

    def __len__(self) -> int:
        return len(self.funds)

    def vocabulary(self) -> frozenset:
        """All name tokens across the store; useful for negative testing."""
        vocab: set = set()
        for toks in self._tokens.values():
            vocab |= toks
        return frozenset(vocab)

    def find(self, name_query: str) -> FundRecord:
        """Best fuzzy match for a user-supplied fund name.

        Score is the fraction of query tokens present in the fund's name
        tokens (stopwords like "fund" excluded). Anything below 0.6 is a
        refusal, not a guess. Ties break on Levenshtein distance to the full
        name, then on fund_id for stability.
        """
        q = _name_tokens(name_query)
        if not q:
            raise FundNotFoundError(name_query)
        q_set = set(q)
        best: List[Tuple[float, int, str]] = []
        for f in self.funds:
            overlap = len(q_set & self._tokens[f.fund_id])
            score = overlap / len(q_set)
            if score >= MATCH_FLOOR:
                dist = levenshtein(name_query.lower(), f.name.lower())
                best.append((-score, dist, f.fund_id))
        if not best:
            raise FundNotFoundError(name_query)
        best.sort()
        return self.by_id[best[0][2]]


def _parse_float(raw: str, row_no: int, fieldname: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise IngestionError(row_no, fieldname, f"not a number: {raw!r}")


def _parse_opt_float(raw: str, row_no: int, fieldname: str) -> Optional[float]:
    raw = raw.strip()
    if raw == "":
        return None
    return _parse_float(raw, row_no, fieldname)


def ingest_funds(source=DEFAULT_FUNDS_CSV) -> FundStore:
    """Load and validate the fund table from CSV.

    Rejects duplicate ids, unknown categories/risk levels, non-positive NAVs,
    out-of-range expense ratios and implausible returns. Missing return cells
    (young funds) load as None.
    """
    path = Path(source)
    records: List[FundRecord] = []
    seen: set = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _FUNDS_CSV_HEADER:
            raise IngestionError(0, "header", f"expected {_FUNDS_CSV_HEADER}, got {reader.fieldnames}")
        for row_no, row in enumerate(reader, start=2):
            fund_id = row["fund_id"].strip()
            if not fund_id:
                raise IngestionError(row_no, "fund_id", "empty")
            if fund_id in seen:
                raise IngestionError(row_no, "fund_id", f"duplicate id {fund_id!r}")
            seen.add(fund_id)
            name = row["name"].strip()
            if not name:
                raise IngestionError(row_no, "name", "empty")
            category = row["category"].strip()
            if category not in CATEGORIES:
                raise IngestionError(row_no, "category", f"unknown category {category!r}")
            risk = row["risk_level"].strip()
            if risk not in RISK_LEVELS:
                raise IngestionError(row_no, "risk_level", f"unknown risk level {risk!r}")
            nav = _parse_float(row["nav"], row_no, "nav")
            if nav <= 0:
                raise IngestionError(row_no, "nav", f"must be positive, got {nav}")
            try:
                nav_date = datetime.strptime(row["nav_date"].strip(), "%Y-%m-%d").date()
            except ValueError:
                raise IngestionError(row_no, "nav_date", f"bad date {row['nav_date']!r}")
            aum = _parse_float(row["aum_cr"], row_no, "aum_cr")
            if aum < 0:
                raise IngestionError(row_no, "aum_cr", f"must be non-negative, got {aum}")
            expense = _parse_float(row["expense_ratio_pct"], row_no, "expense_ratio_pct")
            if not 0.0 <= expense <= 5.0:
                raise IngestionError(row_no, "expense_ratio_pct", f"out of range: {expense}")
            rets = {}
            for h in ("ret_1y", "ret_3y", "ret_5y"):
                val = _parse_opt_float(row[h], row_no, h)
                if val is not None and not -100.0 <= val <= 200.0:
                    raise IngestionError(row_no, h, f"implausible return: {val}")
                rets[h] = val
            records.append(
                FundRecord(
                    fund_id=fund_id,
                    name=name,
                    category=category,
                    risk_level=risk,
                    nav=nav,
                    nav_date=nav_date,
                    aum_cr=aum,
                    expense_ratio_pct=expense,
                    ret_1y=rets["ret_1y"],
                    ret_3y=rets["ret_3y"],
                    ret_5y=rets["ret_5y"],
                )
            )
    if not records:
        raise IngestionError(0, "file", "no fund rows")
    return FundStore(records)


@dataclass(frozen=True)
class Holding:
    fund_id: str
    units: float


@dataclass(frozen=True)
class Portfolio:
    user_id: str
    holdings: Tuple[Holding, ...]


def load_portfolios(source=DEFAULT_PORTFOLIOS_JSONL, store: Optional[FundStore] = None) -> Dict[str, Portfolio]:
    """Load user portfolios from JSONL: {"user_id", "holdings": [{"fund_id", "units"}]}."""
    path = Path(source)
    out: Dict[str, Portfolio] = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestionError(line_no, "json", str(exc))
        user_id = obj.get("user_id")
        if not user_id:
            raise IngestionError(line_no, "user_id", "missing")
        if user_id in out:
            raise IngestionError(line_no, "user_id", f"duplicate user {user_id!r}")
        holdings = []
        for h in obj.get("holdings", []):
            units = float(h["units"])
            if units < 0:
                raise IngestionError(line_no, "units", f"negative units for {h.get('fund_id')}")
            if store is not None and h["fund_id"] not in store.by_id:
                raise IngestionError(line_no, "fund_id", f"unknown fund {h['fund_id']!r}")
            holdings.append(Holding(fund_id=h["fund_id"], units=units))
        out[user_id] = Portfolio(user_id=user_id, holdings=tuple(holdings))
    return out


# ---------------------------------------------------------------------------
# Tool results
# ---------------------------------------------------------------------------


@dataclass
class Provenance:
    """Source-of-truth values a reply may cite. Anything else is a violation."""

    numbers: List[float] = field(default_factory=list)
    dates: List[date] = field(default_factory=list)
    strings: List[str] = field(default_factory=list)

    def add_number(self, value: Optional[float]) -> None:
        if value is not None:
            self.numbers.append(float(value))

    def add_date(self, value: Optional[date]) -> None:
        if value is not None:
            self.dates.append(value)

    def add_string(self, value: Optional[str]) -> None:
        if value:
            self.strings.append(value)

    def merge(self, other: "Provenance") -> None:
        self.numbers.extend(other.numbers)
        self.dates.extend(other.dates)
        self.strings.extend(other.strings)


@dataclass
class ToolResult:
    intent: Intent
    status: str  # ok | not_found | empty_portfolio | needs_clarification | refused | answered
    data: dict = field(default_factory=dict)
    provenance: Provenance = field(default_factory=Provenance)

    @property
    def ok(self) -> bool:
        return self.status in ("ok", "answered", "refused")


@dataclass
class ExecutionContext:
    store: FundStore
    portfolio: Optional[Portfolio] = None
    page_cursor: Optional[str] = None
    last_screen_params: Optional[dict] = None
    last_fund_ids: Tuple[str, ...] = ()
    page_size: int = DEFAULT_PAGE_SIZE


def _fund_payload(f: FundRecord, prov: Provenance, fields: Optional[Sequence[str]] = None) -> dict:
    all_fields = {
        "nav": f.nav,
        "aum_cr": f.aum_cr,
        "expense_ratio_pct": f.expense_ratio_pct,
        "ret_1y": f.ret_1y,
        "ret_3y": f.ret_3y,
        "ret_5y": f.ret_5y,
        "risk_level": f.risk_level,
        "category": f.category,
    }
    chosen = list(fields) if fields else list(all_fields)
    payload = {
        "fund_id": f.fund_id,
        "name": f.name,
        "nav_date": f.nav_date,
    }
    prov.add_string(f.name)
    prov.add_date(f.nav_date)
    for name in chosen:
        if name not in all_fields:
            continue
        value = all_fields[name]
        payload[name] = value
        if isinstance(value, float):
            prov.add_number(value)
    return payload


def _cursor_offset(cursor: Optional[str]) -> int:
    if not cursor:
        return 0
    if not cursor.startswith("o:"):
        raise DataIntegrityError(f"malformed page cursor {cursor!r}")
    try:
        offset = int(cursor[2:])
    except ValueError:
        raise DataIntegrityError(f"malformed page cursor {cursor!r}")
    if offset < 0:
        raise DataIntegrityError(f"negative page cursor {cursor!r}")
    return offset


@dataclass
class ScreenPage:
    records: Tuple[FundRecord, ...]
    next_cursor: Optional[str]
    total: int


def screen_funds(
    store: FundStore,
    risk: Optional[Sequence[str]] = None,
    category: Optional[Sequence[str]] = None,
    sort_key: str = "aum_cr",
    cursor: Optional[str] = None,
    page_size: int = DEFAULT_PAGE_SIZE,
) -> ScreenPage:
    """Filter + deterministic ordering + offset pagination.

    Sorting is by the requested key descending with missing values last,
    name ascending as the tiebreak, so page N is reproducible forever given
    the same data. The cursor is an opaque offset token "o:<n>".
    """
    matches = [
        f
        for f in store.funds
        if (not risk or f.risk_level in risk)
        and (not category or f.category in category)
    ]

    def key(f: FundRecord):
        value = getattr(f, sort_key)
        missing = value is None
        return (missing, -(value if value is not None else 0.0), f.name)

    matches.sort(key=key)
    offset = _cursor_offset(cursor)
    page = matches[offset : offset + page_size]
    next_offset = offset + page_size
    next_cursor = f"o:{next_offset}" if next_offset < len(matches) else None
    return ScreenPage(records=tuple(page), next_cursor=next_cursor, total=len(matches))


def portfolio_value(store: FundStore, portfolio: Portfolio) -> float:
    total = 0.0
    for h in portfolio.holdings:
        f = store.by_id.get(h.fund_id)
        if f is None:
            raise DataIntegrityError(f"portfolio references unknown fund {h.fund_id!r}")
        total += h.units * f.nav
    return total


def equity_exposure_pct(store: FundStore, portfolio: Portfolio) -> float:
    if not portfolio.holdings:
        raise EmptyPortfolioError(portfolio.user_id)
    total = portfolio_value(store, portfolio)
    if total == 0:
        raise EmptyPortfolioError(portfolio.user_id)
    equity = sum(
        h.units * store.by_id[h.fund_id].nav
        for h in portfolio.holdings
        if store.by_id[h.fund_id].category in EQUITY_CATEGORIES
    )
    return equity / total * 100.0


def best_performer(
    store: FundStore, portfolio: Portfolio, horizon: str = "1y"
) -> Tuple[FundRecord, float]:
    if not portfolio.holdings:
        raise EmptyPortfolioError(portfolio.user_id)
    candidates = []
    for h in portfolio.holdings:
        f = store.by_id[h.fund_id]
        r = f.ret(horizon)
        if r is not None:
            candidates.append((-r, f.name, f))
    if not candidates:
        raise EmptyPortfolioError(portfolio.user_id)
    candidates.sort(key=lambda t: (t[0], t[1]))
    f = candidates[0][2]
    return f, -candidates[0][0]


# ---------------------------------------------------------------------------
# Executors, one per intent
# ---------------------------------------------------------------------------


def _exec_portfolio_analytics(call: ToolCall, ctx: ExecutionContext) -> ToolResult:
    prov = Provenance()
    pf = ctx.portfolio
    if pf is None or not pf.holdings:
        return ToolResult(call.intent, "empty_portfolio")
    metric = call.params.get("metric", "summary")
    if metric == "equity_exposure":
        value = equity_exposure_pct(ctx.store, pf)
        prov.add_number(round(value, 2))
        return ToolResult(
            call.intent, "ok", {"metric": metric, "exposure_pct": round(value, 2)}, prov
        )
    if metric == "best_performer":
        horizon = call.params.get("horizon", "1y")
        f, r = best_performer(ctx.store, pf, horizon)
        prov.add_string(f.name)
        prov.add_number(r)
        prov.add_number(float(horizon[:-1]))  # the "1" in "1 year" is cited too
        return ToolResult(
            call.intent,
            "ok",
            {"metric": metric, "horizon": horizon, "name": f.name, "fund_id": f.fund_id, "return_pct": r},
            prov,
        )
    rows = []
    total = portfolio_value(ctx.store, pf)
    for h in sorted(pf.holdings, key=lambda h: -h.units * ctx.store.by_id[h.fund_id].nav):
        f = ctx.store.by_id[h.fund_id]
        value = h.units * f.nav
        weight = value / total * 100.0 if total else 0.0
        prov.add_string(f.name)
        prov.add_number(round(value, 2))
        prov.add_number(round(weight, 1))
        rows.append(
            {
                "name": f.name,
                "fund_id": f.fund_id,
                "value": round(value, 2),
                "weight_pct": round(weight, 1),
            }
        )
    prov.add_number(round(total, 2))
    return ToolResult(
        call.intent,
        "ok",
        {"metric": "summary", "rows": rows, "total_value": round(total, 2)},
        prov,
    )


def _exec_fund_detail(call: ToolCall, ctx: ExecutionContext) -> ToolResult:
    prov = Provenance()
    fields = call.params.get("fields")
    if call.params.get("subject") == "previous_results":
        if not ctx.last_fund_ids:
            return ToolResult(call.intent, "needs_clarification")
        rows = [
            _fund_payload(ctx.store.by_id[fid], prov, fields)
            for fid in ctx.last_fund_ids
            if fid in ctx.store.by_id
        ]
        return ToolResult(call.intent, "ok", {"funds": rows, "fields": fields}, prov)
    name_query = call.params.get("name_query", "")
    try:
        f = ctx.store.find(name_query)
    except FundNotFoundError:
        return ToolResult(call.intent, "not_found", {"name_query": name_query})
    payload = _fund_payload(f, prov, fields)
    return ToolResult(call.intent, "ok", {"funds": [payload], "fields": fields}, prov)


def _exec_fund_screening(call: ToolCall, ctx: ExecutionContext) -> ToolResult:
    prov = Provenance()
    params = {
        "risk": call.params.get("risk"),
        "category": call.params.get("category"),
        "sort_key": call.params.get("sort_key", "aum_cr"),
    }
    page = screen_funds(ctx.store, page_size=ctx.page_size, **params)
    rows = [_fund_payload(f, prov) for f in page.records]
    prov.add_number(float(page.total))
    return ToolResult(
        call.intent,
        "ok",
        {
            "funds": rows,
            "total": page.total,
            "next_cursor": page.next_cursor,
            "screen_params": params,
        },
        prov,
    )


def _exec_continuation(call: ToolCall, ctx: ExecutionContext) -> ToolResult:
    prov = Provenance()
    cursor = call.params.get("cursor") or ctx.page_cursor
    if not cursor or ctx.last_screen_params is None:
        return ToolResult(call.intent, "needs_clarification")
    page = screen_funds(
        ctx.store, cursor=cursor, page_size=ctx.page_size, **ctx.last_screen_params
    )
    rows = [_fund_payload(f, prov) for f in page.records]
    prov.add_number(float(page.total))
    return ToolResult(
        call.intent,
        "ok",
        {
            "funds": rows,
            "total": page.total,
            "next_cursor": page.next_cursor,
            "screen_params": dict(ctx.last_screen_params),
        },
        prov,
    )


def _exec_fund_comparison(call: ToolCall, ctx: ExecutionContext) -> ToolResult:
    prov = Provenance()
    rows = []
    missing = []
    for q in call.params.get("name_queries", []):
        try:
            f = ctx.store.find(q)
        except FundNotFoundError:
            missing.append(q)
            continue
        rows.append(_fund_payload(f, prov))
    if len(rows) < 2:
        return ToolResult(call.intent, "not_found", {"missing": missing})
    return ToolResult(call.intent, "ok", {"funds": rows, "missing": missing}, prov)


def _exec_general_faq(call: ToolCall, ctx: ExecutionContext) -> ToolResult:
    return ToolResult(call.intent, "answered", {"question": call.params.get("question", "")})


def _exec_out_of_scope(call: ToolCall, ctx: ExecutionContext) -> ToolResult:
    return ToolResult(call.intent, "refused")


_EXECUTORS = {
    Intent.PORTFOLIO_ANALYTICS: _exec_portfolio_analytics,
    Intent.FUND_DETAIL: _exec_fund_detail,
    Intent.FUND_SCREENING: _exec_fund_screening,
    Intent.CONTINUATION: _exec_continuation,
    Intent.FUND_COMPARISON: _exec_fund_comparison,
    Intent.GENERAL_FAQ: _exec_general_faq,
    Intent.OUT_OF_SCOPE: _exec_out_of_scope,
}


def execute_plan(plan: ToolPlan, ctx: ExecutionContext) -> List[ToolResult]:
    """Run every call in order. Screening results feed the anaphora context
    for later calls in the same plan ("... and their expense ratio too")."""
    results: List[ToolResult] = []
    for call in plan.calls:
        result = _EXECUTORS[call.intent](call, ctx)
        if result.status == "ok" and "funds" in result.data:
            ids = tuple(r["fund_id"] for r in result.data["funds"])
            if ids:
                ctx.last_fund_ids = ids
        if result.intent in (Intent.FUND_SCREENING, Intent.CONTINUATION) and result.status == "ok":
            ctx.page_cursor = result.data.get("next_cursor")
            ctx.last_screen_params = result.data.get("screen_params")
        results.append(result)
    return results
