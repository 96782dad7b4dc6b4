"""Code-mix-aware multilingual conversation pipeline for mutual-fund assistance.

The pipeline stages live in their own modules and compose in gateway.handle_chat:

    langid        script + lexicon language identification (en/hi/mr/gu + mixes)
    orchestrator  canonical-English normalization and tool planning
    fintools      fund dataset, portfolio analytics, tool execution
    respgen       per-language templates, grounding + language validators
    session       sticky language, pagination cursors, JSONL export
    gateway       HTTP service, backend clients wiring, overhead benchmark
    evalharness   golden-suite runner, rubric, engagement metrics
"""

from .langid import ClassificationResult, LanguageTag, classify, load_lexicon
from .orchestrator import Intent, NormalizedQuery, ToolCall, ToolPlan, normalize, plan_tools
from .fintools import ExecutionContext, FundStore, ingest_funds, load_portfolios
from .respgen import DeterministicGenerator, validate_grounding, validate_language
from .gateway import ChatRequest, ChatResponse, build_app, build_deps, handle_chat

__version__ = "0.1.0"

__all__ = [
    "ClassificationResult",
    "LanguageTag",
    "classify",
    "load_lexicon",
    "Intent",
    "NormalizedQuery",
    "ToolCall",
    "ToolPlan",
    "normalize",
    "plan_tools",
    "ExecutionContext",
    "FundStore",
    "ingest_funds",
    "load_portfolios",
    "DeterministicGenerator",
    "validate_grounding",
    "validate_language",
    "ChatRequest",
    "ChatResponse",
    "build_app",
    "build_deps",
    "handle_chat",
    "__version__",
]
