"""Engine and service configuration.

Defaults live here; everything is overridable through a flat TOML-style
config file (`key = value` lines, `#` comments) and then through
environment variables prefixed TKG_ (e.g. TKG_PORT, TKG_DIMENSION).
Invalid keys or values are rejected at startup.
"""

from __future__ import annotations

import dataclasses
import os
import re
from dataclasses import dataclass, field, fields
from typing import Any, Optional

from .errors import ConfigError

ENV_PREFIX = "TKG_"


@dataclass
class EngineConfig:
    dimension: int = 1024
    previous_messages: int = 4
    candidate_k: int = 5
    contradiction_k: int = 10
    staleness_threshold: int = 128
    summary_chunk_size: int = 20
    community_max_iters: int = 100
    bfs_depth: int = 2
    recency_seed_episodes: int = 2
    default_limit: int = 20
    rrf_k: int = 60
    mmr_lambda: float = 0.5
    include_communities: bool = True
    default_reranker: str = "rrf"

    def validate(self) -> None:
        positive = (
            "dimension",
            "candidate_k",
            "contradiction_k",
            "staleness_threshold",
            "summary_chunk_size",
            "community_max_iters",
            "default_limit",
            "rrf_k",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("previous_messages", "bfs_depth", "recency_seed_episodes"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 <= self.mmr_lambda <= 1.0:
            raise ConfigError("mmr_lambda must be in [0, 1]")
        if self.default_reranker not in {
            "rrf",
            "mmr",
            "episode_mentions",
            "node_distance",
            "cross_encoder",
        }:
            raise ConfigError(f"unknown default_reranker {self.default_reranker!r}")


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8321
    data_dir: str = "graphs"
    extractor_url: Optional[str] = None
    extractor_timeout: float = 5.0
    extractor_retries: int = 2
    embedder_url: Optional[str] = None
    cross_encoder_url: Optional[str] = None
    engine: EngineConfig = field(default_factory=EngineConfig)

    def validate(self) -> None:
        if not 0 < self.port < 65536:
            raise ConfigError("port must be in (0, 65536)")
        if self.extractor_retries < 0:
            raise ConfigError("extractor_retries must be >= 0")
        if self.extractor_timeout <= 0:
            raise ConfigError("extractor_timeout must be > 0")
        self.engine.validate()


_KEY_VALUE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+?)\s*$")


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse flat `key = value` lines; values are quoted strings, booleans,
    ints, floats, or bare strings."""
    out: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        match = _KEY_VALUE.match(line)
        if not match:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {line!r}")
        key, raw = match.group(1), match.group(2)
        out[key] = _parse_value(raw)
    return out


def _parse_value(raw: str) -> Any:
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in {'"', "'"}:
        return raw[1:-1]
    low = raw.lower()
    if low in {"true", "false"}:
        return low == "true"
    if low in {"none", "null"}:
        return None
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def load_service_config(
    path: Optional[str] = None, env: Optional[dict[str, str]] = None
) -> ServiceConfig:
    """Build a ServiceConfig from defaults, a config file, and TKG_* env
    overrides (in that precedence order)."""
    env = os.environ if env is None else env
    values: dict[str, Any] = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                values.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for key, raw in env.items():
        if key.startswith(ENV_PREFIX):
            values[key[len(ENV_PREFIX) :].lower()] = _parse_value(raw)
    return _build_service_config(values)


def _build_service_config(values: dict[str, Any]) -> ServiceConfig:
    service_fields = {f.name: f for f in fields(ServiceConfig) if f.name != "engine"}
    engine_fields = {f.name: f for f in fields(EngineConfig)}
    config = ServiceConfig()
    for key, value in values.items():
        if key in service_fields:
            setattr(config, key, _coerce(key, value, config, service_fields[key]))
        elif key in engine_fields:
            setattr(
                config.engine,
                key,
                _coerce(key, value, config.engine, engine_fields[key]),
            )
        else:
            raise ConfigError(f"unknown config key {key!r}")
    config.validate()
    return config


def _coerce(key: str, value: Any, target: Any, field_spec: dataclasses.Field) -> Any:
    current = getattr(target, key)
    if value is None:
        return None
    if isinstance(current, bool) or field_spec.type in ("bool",):
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{key} expects a boolean, got {value!r}")
    if isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        raise ConfigError(f"{key} expects an integer, got {value!r}")
    if isinstance(current, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise ConfigError(f"{key} expects a number, got {value!r}")
    if current is None or isinstance(current, str):
        if isinstance(value, str):
            return value
        raise ConfigError(f"{key} expects a string, got {value!r}")
    raise ConfigError(f"{key} cannot be set from config")  # pragma: no cover
