"""Command line entry points: serve, eval run, eval engagement, overhead."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import AppConfig, load_config

DEFAULT_SUITE_DIR = Path(__file__).parent / "assets" / "fixtures" / "golden"
DEFAULT_LOGS_DIR = Path(__file__).parent / "assets" / "fixtures" / "logs"

# Queries for the overhead benchmark: a spread of languages and intents so
# the full path exercises classification and normalization for real.
BENCH_QUERIES = (
    "Tell me about SBI Gold Fund",
    "mera equity exposure kitna hai?",
    "Show me some safe mutual funds",
    "SBI गोल्ड फंड के बारे में बताओ",
    "what is the expense ratio of HDFC Top 100 Fund?",
    "kuch large cap funds dikhao",
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finlingua",
        description="Multilingual mutual-fund assistant service and eval tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP gateway")
    serve.add_argument("--config", help="YAML/JSON config file")
    serve.add_argument("--funds", help="fund dataset CSV (default: bundled)")
    serve.add_argument("--portfolios", help="portfolio JSONL (default: bundled)")
    serve.add_argument("--lexicon", help="lexicon TSV (default: bundled)")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument(
        "--deterministic",
        action="store_true",
        help="heuristic/gloss/template path only, no model backends",
    )

    ev = sub.add_parser("eval", help="evaluation tools")
    evsub = ev.add_subparsers(dest="eval_command", required=True)

    run = evsub.add_parser("run", help="run the golden conversation suite")
    run.add_argument("--suite", default=str(DEFAULT_SUITE_DIR), help="suite directory")
    run.add_argument("--mode", choices=("deterministic", "backend"), default="deterministic")
    run.add_argument("--config", help="config file (used in backend mode)")
    run.add_argument("--report", help="write the report here instead of stdout")
    run.add_argument("--format", choices=("table-text", "csv"), default="table-text")

    eng = evsub.add_parser("engagement", help="compute engagement metrics from session logs")
    eng.add_argument("--logs", default=str(DEFAULT_LOGS_DIR), help="log file or directory")
    eng.add_argument("--window", type=int, default=30, help="retention window in days")
    eng.add_argument("--report", help="write the report here instead of stdout")
    eng.add_argument("--format", choices=("table-text", "csv"), default="table-text")

    over = sub.add_parser("overhead", help="measure multilingual-pipeline overhead")
    over.add_argument("--requests", type=int, default=100, help="minimum requests per path")
    over.add_argument("--service-time", type=float, default=0.3, help="generator stub seconds")
    over.add_argument("--concurrency", type=int, default=8)

    return parser


def _config_from_args(args) -> AppConfig:
    config = load_config(args.config) if getattr(args, "config", None) else AppConfig()
    overrides = {}
    if getattr(args, "funds", None):
        overrides["funds_csv"] = args.funds
    if getattr(args, "portfolios", None):
        overrides["portfolios_jsonl"] = args.portfolios
    if getattr(args, "lexicon", None):
        overrides["lexicon_path"] = args.lexicon
    if getattr(args, "host", None):
        overrides["host"] = args.host
    if getattr(args, "port", None):
        overrides["port"] = args.port
    if getattr(args, "deterministic", False):
        overrides["deterministic"] = True
    return replace(config, **overrides) if overrides else config


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .gateway import build_app, build_deps

        config = _config_from_args(args)
        app = build_app(build_deps(config))
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
        return 0

    if args.command == "eval" and args.eval_command == "run":
        from .backends import HttpJudgeBackend
        from .evalharness import emit_report, load_suite, run_golden
        from .gateway import build_deps

        config = _config_from_args(args)
        if args.mode == "backend":
            config = replace(config, deterministic=False)
        deps = build_deps(config)
        judge = HttpJudgeBackend(config.backend) if args.mode == "backend" else None
        suite = load_suite(args.suite)
        report = run_golden(suite, deps, judge=judge, mode=args.mode)
        _emit(emit_report(report, args.format), args.report)
        # Non-zero exit when the suite is red keeps this usable in CI.
        all_pass = (
            report.plan_match_rate == 100.0
            and report.language_match_rate == 100.0
            and report.grounding_rate == 100.0
        )
        return 0 if all_pass and report.turn_count else 1

    if args.command == "eval" and args.eval_command == "engagement":
        from .evalharness import emit_report, engagement_metrics

        report = engagement_metrics(args.logs, window_days=args.window)
        _emit(emit_report(report, args.format), args.report)
        return 0

    if args.command == "overhead":
        from .gateway import (
            PRODUCTION_OVERHEAD_RANGE_PCT,
            build_bench_deps,
            measure_overhead,
        )

        deps = build_bench_deps(service_time_s=args.service_time)
        report = measure_overhead(
            BENCH_QUERIES, deps, min_requests=args.requests, concurrency=args.concurrency
        )
        lo, hi = PRODUCTION_OVERHEAD_RANGE_PCT
        d = report.to_dict()
        print("overhead benchmark (fixed generator service time "
              f"{args.service_time * 1000:.0f}ms, {report.requests} requests/path):")
        print(f"  full pipeline : mean {d['full_mean_ms']}ms  p95 {d['full_p95_ms']}ms")
        print(f"  en-only bypass: mean {d['bypass_mean_ms']}ms  p95 {d['bypass_p95_ms']}ms")
        print(f"  overhead      : {d['overhead_pct']}%  "
              f"(production deployment reported {lo:.0f}-{hi:.0f}%)")
        print(f"  classify mean : {d['classify_mean_ms']}ms")
        return 0

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
