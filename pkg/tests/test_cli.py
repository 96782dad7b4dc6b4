"""CLI surface: argument wiring, exit codes, report emission."""

import csv
import io
import subprocess
import sys

import pytest
import yaml

from finlingua.cli import BENCH_QUERIES, DEFAULT_LOGS_DIR, DEFAULT_SUITE_DIR, main


class TestParser:
    def test_no_command_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main([])
        assert err.value.code == 2

    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 2

    def test_help_via_console_script(self):
        out = subprocess.run(
            [sys.executable, "-m", "finlingua.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert out.returncode == 0
        for command in ("serve", "eval", "overhead"):
            assert command in out.stdout

    def test_bench_queries_cover_scripts(self):
        # The benchmark input should not be an all-English strawman.
        assert len(BENCH_QUERIES) >= 4
        assert any(any("ऀ" <= ch <= "ॿ" for ch in q) for q in BENCH_QUERIES)
        assert any(q.isascii() for q in BENCH_QUERIES)


class TestEvalRun:
    def test_green_suite_exits_0(self, tmp_path, capsys):
        rc = main(["eval", "run", "--suite", str(DEFAULT_SUITE_DIR)])
        out = capsys.readouterr().out
        assert rc == 0
        assert "tool-call exact match" in out
        assert "100.0%" in out

    def test_report_flag_writes_file(self, tmp_path):
        report = tmp_path / "eval.txt"
        rc = main(["eval", "run", "--report", str(report)])
        assert rc == 0
        assert "golden suite (deterministic mode)" in report.read_text(encoding="utf-8")

    def test_csv_format(self, tmp_path):
        report = tmp_path / "eval.csv"
        rc = main(["eval", "run", "--format", "csv", "--report", str(report)])
        assert rc == 0
        rows = list(csv.DictReader(io.StringIO(report.read_text(encoding="utf-8"))))
        assert rows
        assert all(r["plan_match"] == "1" for r in rows)

    def test_red_suite_exits_1(self, tmp_path, capsys):
        doc = {
            "id": "wrong_plan",
            "category": "pure_english",
            "turns": [
                {
                    "user_text": "Tell me about SBI Gold Fund",
                    "expected_language": "en",
                    "expected_plan": {
                        "calls": [{"intent": "fund_screening", "params": {"risk": ["low"]}}],
                        "clause_texts": ["Tell me about SBI Gold Fund"],
                    },
                    "reference_answer": "n/a",
                }
            ],
        }
        suite = tmp_path / "suite"
        suite.mkdir()
        (suite / "wrong.yaml").write_text(yaml.safe_dump(doc), encoding="utf-8")
        rc = main(["eval", "run", "--suite", str(suite)])
        out = capsys.readouterr().out
        assert rc == 1
        assert "intent_misclassification" in out

    def test_empty_suite_exits_1(self, tmp_path):
        suite = tmp_path / "empty"
        suite.mkdir()
        assert main(["eval", "run", "--suite", str(suite)]) == 1


class TestEvalEngagement:
    def test_default_logs(self, capsys):
        rc = main(["eval", "engagement"])
        out = capsys.readouterr().out
        assert rc == 0
        assert out.startswith("engagement metrics:")
        assert "sessions" in out

    def test_single_file_and_window(self, capsys):
        rc = main(
            [
                "eval",
                "engagement",
                "--logs",
                str(DEFAULT_LOGS_DIR / "retention_2users.jsonl"),
                "--window",
                "7",
            ]
        )
        out = capsys.readouterr().out
        assert rc == 0
        assert "window_days" in out and "7" in out

    def test_csv_report_file(self, tmp_path):
        report = tmp_path / "engagement.csv"
        rc = main(
            [
                "eval",
                "engagement",
                "--logs",
                str(DEFAULT_LOGS_DIR / "length_mix.jsonl"),
                "--format",
                "csv",
                "--report",
                str(report),
            ]
        )
        assert rc == 0
        rows = list(csv.DictReader(io.StringIO(report.read_text(encoding="utf-8"))))
        assert len(rows) == 1
        assert float(rows[0]["avg_session_length"]) == pytest.approx(6.0)


class TestOverhead:
    def test_small_run_prints_report(self, capsys):
        rc = main(
            ["overhead", "--requests", "4", "--service-time", "0.005", "--concurrency", "2"]
        )
        out = capsys.readouterr().out
        assert rc == 0
        assert "overhead benchmark" in out
        assert "full pipeline" in out
        assert "en-only bypass" in out
        assert "production deployment reported 4-8%" in out
        assert "classify mean" in out


class TestServe:
    def test_serve_wires_uvicorn(self, monkeypatch):
        import uvicorn

        captured = {}

        def fake_run(app, host=None, port=None, log_level=None):
            captured["app"] = app
            captured["host"] = host
            captured["port"] = port

        monkeypatch.setattr(uvicorn, "run", fake_run)
        rc = main(["serve", "--host", "0.0.0.0", "--port", "8123", "--deterministic"])
        assert rc == 0
        assert captured["host"] == "0.0.0.0"
        assert captured["port"] == 8123
        paths = {route.path for route in captured["app"].routes}
        assert {"/v1/chat", "/v1/health", "/v1/metrics"} <= paths

    def test_serve_cli_flags_beat_config_file(self, monkeypatch, tmp_path):
        import uvicorn

        captured = {}
        monkeypatch.setattr(uvicorn, "run", lambda app, **kw: captured.update(kw))
        cfg = tmp_path / "app.yaml"
        cfg.write_text(yaml.safe_dump({"port": 9001, "host": "10.0.0.1"}), encoding="utf-8")
        rc = main(["serve", "--config", str(cfg), "--port", "8123"])
        assert rc == 0
        assert captured["port"] == 8123
        assert captured["host"] == "10.0.0.1"  # not overridden, file value survives

    def test_serve_rejects_bad_config(self, tmp_path):
        cfg = tmp_path / "app.yaml"
        cfg.write_text(yaml.safe_dump({"prot": 8000}), encoding="utf-8")
        with pytest.raises(ValueError, match="unknown config keys"):
            main(["serve", "--config", str(cfg)])
