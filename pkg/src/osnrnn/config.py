"""Configuration loading: YAML files deep-merged over the packaged defaults."""

from __future__ import annotations

import copy
import os
from importlib import resources
from pathlib import Path

import yaml

SCHEMA_VERSION = 1

ENV_THREADS = "OSNRNN_THREADS"
ENV_OUT = "OSNRNN_OUT"
ENV_CONFIG = "OSNRNN_CONFIG"

_REQUIRED_SECTIONS = (
    "fiber_catalog", "markov", "channel_plan", "modes", "emulator",
    "ssf", "nn", "validity", "dsp", "features", "scenario", "route", "calibration",
)


class ConfigError(ValueError):
    pass


def _load_default() -> dict:
    text = resources.files("osnrnn").joinpath("data/default_config.yaml").read_text("utf-8")
    return yaml.safe_load(text)


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate(cfg: dict) -> dict:
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported config schema_version {cfg.get('schema_version')!r} (expected {SCHEMA_VERSION})"
        )
    missing = [s for s in _REQUIRED_SECTIONS if s not in cfg]
    if missing:
        raise ConfigError(f"config is missing sections: {missing}")
    lo, hi = cfg["validity"]["min_gap_db"], cfg["validity"]["max_gap_db"]
    if not lo < hi:
        raise ConfigError("validity.min_gap_db must be below validity.max_gap_db")
    for mode in cfg["scenario"]["modes"]:
        if mode not in cfg["modes"]:
            raise ConfigError(f"scenario mode {mode!r} is not in the mode table")
    for section, key in (("channel_plan", "n_channels"), ("channel_plan", "n_symbols"),
                         ("channel_plan", "out_sps"), ("emulator", "n_segments"),
                         ("emulator", "pattern_count"), ("dsp", "n_taps"), ("route", "min_spans")):
        value = cfg[section].get(key) if section in cfg else None
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ConfigError(f"{section}.{key} must be a positive integer, got {value!r}")
    if cfg["route"]["max_spans"] < cfg["route"]["min_spans"]:
        raise ConfigError("route.max_spans must not be below route.min_spans")
    if not 0 < cfg["nn"]["test_fraction"] < 1:
        raise ConfigError("nn.test_fraction must lie in (0, 1)")
    if not cfg["calibration"]["eye_closure"] > 0:
        raise ConfigError("calibration.eye_closure must be positive")
    return cfg


def load_config(path: str | os.PathLike | None = None, overrides: dict | None = None) -> dict:
    """Packaged defaults, then ``path`` (or ``$OSNRNN_CONFIG``), then ``overrides``."""
    cfg = _load_default()
    path = path or os.environ.get(ENV_CONFIG)
    if path:
        try:
            user = yaml.safe_load(Path(path).read_text("utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"config {path} must be a mapping")
        cfg = deep_merge(cfg, user)
    if overrides:
        cfg = deep_merge(cfg, overrides)
    return validate(cfg)


def default_config() -> dict:
    return validate(_load_default())


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True)
