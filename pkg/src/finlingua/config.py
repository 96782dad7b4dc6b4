"""Service configuration: file + environment overrides.

Config is a plain dataclass so experiments can construct it directly;
the file loader exists for the CLI. Unknown keys are rejected loudly,
silent typos in a config file are worse than a crash at startup.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import yaml

from .backends import BackendConfig, EndpointConfig


@dataclass(frozen=True)
class AppConfig:
    # Data assets; None means the bundled defaults.
    funds_csv: Optional[str] = None
    portfolios_jsonl: Optional[str] = None
    lexicon_path: Optional[str] = None
    # Classifier thresholds.
    mix_threshold: float = 0.15
    short_query_threshold: int = 3
    # deterministic=True runs heuristic/gloss/template end to end (no
    # network); False wires the HTTP backends in with deterministic fallback.
    deterministic: bool = True
    backend: BackendConfig = field(default_factory=BackendConfig)
    # Sessions.
    session_idle_ttl_s: float = 24 * 3600.0
    session_log_dir: Optional[str] = None
    # Tool behaviour.
    page_size: int = 3
    # Serving.
    host: str = "127.0.0.1"
    port: int = 8000


_ENV_OVERRIDES = {
    # env var -> (config key, parser)
    "FINLINGUA_BACKEND_URL": ("backend_url", str),
    "FINLINGUA_MIX_THRESHOLD": ("mix_threshold", float),
    "FINLINGUA_SHORT_QUERY_THRESHOLD": ("short_query_threshold", int),
    "FINLINGUA_DETERMINISTIC": ("deterministic", lambda v: v.lower() in ("1", "true", "yes")),
    "FINLINGUA_SESSION_LOG_DIR": ("session_log_dir", str),
}


def _parse_backend(raw: dict) -> BackendConfig:
    roles = {
        role: EndpointConfig(**ep) for role, ep in (raw.pop("roles", None) or {}).items()
    }
    return BackendConfig(roles=roles, **raw)


def load_config(path: Optional[str] = None, env: Optional[dict] = None) -> AppConfig:
    """Read YAML or JSON (by extension), then apply environment overrides."""
    env = env if env is not None else os.environ
    raw: dict = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        if str(path).endswith(".json"):
            raw = json.loads(text) or {}
        else:
            raw = yaml.safe_load(text) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"config root must be a mapping, got {type(raw).__name__}")

    known = {f.name for f in fields(AppConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")

    if "backend" in raw and isinstance(raw["backend"], dict):
        raw = dict(raw)
        raw["backend"] = _parse_backend(dict(raw["backend"]))

    config = AppConfig(**raw)

    for var, (key, parse) in _ENV_OVERRIDES.items():
        if var not in env:
            continue
        value = parse(env[var])
        if key == "backend_url":
            config = replace(config, backend=replace(config.backend, base_url=value))
        else:
            config = replace(config, **{key: value})
    return config
