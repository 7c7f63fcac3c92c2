"""Deployment configuration: one JSON file, overridable per key through
PTRACER_<UPPER_KEY> environment variables."""

import json
import os
from dataclasses import dataclass, fields, replace

from .errors import ConfigError
from .pipeline import DEFAULT_BOOST_FLOOR, DEFAULT_KEYWORDS, DEFAULT_THRESHOLD

ENV_PREFIX = "PTRACER_"


@dataclass(frozen=True)
class Config:
    repo_path: str
    module_list_path: str
    bundle_dir: str
    store_dir: str
    threshold: float = DEFAULT_THRESHOLD
    boost_floor: float = DEFAULT_BOOST_FLOOR
    revision_enabled: bool = True
    period_days: int = 1
    http_port: int = 8787
    keyword_set: tuple = tuple(DEFAULT_KEYWORDS)

    def validate(self) -> "Config":
        for name in ("repo_path", "module_list_path", "bundle_dir", "store_dir"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be a non-empty path")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold {self.threshold} outside (0, 1)")
        if not 0.0 < self.boost_floor < 1.0:
            raise ConfigError(f"boost_floor {self.boost_floor} outside (0, 1)")
        if self.period_days < 1:
            raise ConfigError("period_days must be >= 1")
        if not 1 <= self.http_port <= 65535:
            raise ConfigError(f"http_port {self.http_port} outside 1..65535")
        return self


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _coerce(name: str, kind, raw: str):
    if kind is bool:
        low = raw.strip().lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"{name}: {raw!r} is not a boolean")
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: {raw!r} is not a {kind.__name__}")
    if kind is tuple:
        return tuple(t.strip() for t in raw.split(",") if t.strip())
    return raw


def load_config(path: str, env=None) -> Config:
    """Read the JSON file, apply environment overrides, validate."""
    env = os.environ if env is None else env
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")

    known = {f.name: f.type for f in fields(Config)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "keyword_set" in data:
        if not isinstance(data["keyword_set"], list):
            raise ConfigError("keyword_set must be a list of strings")
        data["keyword_set"] = tuple(data["keyword_set"])

    try:
        cfg = Config(**data)
    except TypeError as exc:
        raise ConfigError(str(exc))

    kinds = {
        "repo_path": str, "module_list_path": str, "bundle_dir": str, "store_dir": str,
        "threshold": float, "boost_floor": float, "revision_enabled": bool,
        "period_days": int, "http_port": int, "keyword_set": tuple,
    }
    overrides = {}
    for name, kind in kinds.items():
        var = ENV_PREFIX + name.upper()
        if var in env:
            overrides[name] = _coerce(name, kind, env[var])
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg.validate()


def write_config(cfg: Config, path: str):
    data = {
        "repo_path": cfg.repo_path,
        "module_list_path": cfg.module_list_path,
        "bundle_dir": cfg.bundle_dir,
        "store_dir": cfg.store_dir,
        "threshold": cfg.threshold,
        "boost_floor": cfg.boost_floor,
        "revision_enabled": cfg.revision_enabled,
        "period_days": cfg.period_days,
        "http_port": cfg.http_port,
        "keyword_set": list(cfg.keyword_set),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
