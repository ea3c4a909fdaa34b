"""Declarative run configuration: defaults < config file < command-line flags."""

from __future__ import annotations

import copy
import hashlib
import json
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from .llm import DEFAULT_MODEL
from .sources import SCENARIO_PRESETS

DEFAULTS: dict[str, Any] = {
    "provider": "openai",
    "model": DEFAULT_MODEL,
    "module_models": {},
    "temperature": 0.0,
    "max_output": 1024,
    "retries": 2,
    "extraction_reprompts": 2,
    "parse_reprompts": 1,
    "search": "none",
    "top_k": 10,
    "chunk_limit": 1024,
    "passage_cap": None,
    "exclude_unverifiable": False,
    "scenario": "se+lk",
    "scenarios": dict(SCENARIO_PRESETS),
    "seed": 0,
    "workers": 1,
    "cache_dir": None,
    "golden_separator": "\n",
    "dp": {"thresholds": [k / 100 for k in range(21)], "bootstrap": 1000, "resample_mode": "SharedDraws"},
}

_NESTED = {"dp"}
# keys that cannot change any output byte
_NOT_DIGESTED = {"workers"}


class ConfigError(ValueError):
    pass


def _check_keys(data: Mapping, allowed: Mapping, where: str = "") -> None:
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if key in _NESTED and not where:
            if not isinstance(data[key], Mapping):
                raise ConfigError(f"config key {key!r} must be a mapping")
            _check_keys(data[key], allowed[key], where=f"{key}.")


def load_config(path: Optional[Union[str, Path]], overrides: Optional[Mapping] = None) -> dict:
    """Resolve the configuration.

    ``overrides`` holds flag values; ``None`` entries mean "not given".
    Unknown keys in the file raise ConfigError naming the key.
    """
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
        data = data or {}
        if not isinstance(data, Mapping):
            raise ConfigError("config file must hold a mapping")
        _check_keys(data, DEFAULTS)
        for key, value in data.items():
            if key in _NESTED:
                cfg[key].update(value)
            elif key == "scenarios":
                cfg[key].update(value)
            else:
                cfg[key] = value
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key.startswith("dp."):
            cfg["dp"][key[3:]] = value
        elif key not in cfg:
            raise ConfigError(f"unknown config key {key!r}")
        else:
            cfg[key] = value
    return cfg


def config_digest(cfg: Mapping) -> str:
    blob = json.dumps({k: v for k, v in cfg.items() if k not in _NOT_DIGESTED}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def scenario_spec(cfg: Mapping, name_or_spec: Optional[str] = None) -> tuple[str, str]:
    """(name, stage spec) for a preset name or a literal stage list."""
    key = name_or_spec or cfg["scenario"]
    presets = cfg.get("scenarios", {})
    if key in presets:
        return key, presets[key]
    return key, key
