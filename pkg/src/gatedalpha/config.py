"""Run configuration: a nested YAML document merged over documented defaults."""

from __future__ import annotations

import copy
from dataclasses import fields
from pathlib import Path

import yaml

from .errors import ConfigError
from .models import ModelSpec
from .panel import SyntheticConfig
from .train import TrainConfig


def _dataclass_defaults(cls, skip=()) -> dict:
    return {f.name: f.default for f in fields(cls) if f.name not in skip}


DEFAULTS: dict = {
    "data": {
        "source": None,
        "columns": None,
        "synthetic": {"tickers": 100, "days": 800, "seed": 7, **_dataclass_defaults(SyntheticConfig)},
    },
    "alphas": {"file": None, "standardize": True, "jobs": 1},
    "label": {"horizon": 1, "benchmark": "market_mean", "weighting": "equal", "risk_free": 0.0},
    "split": {"test_days": 70, "valid_fraction": 0.05, "seed": 0},
    "model": {**_dataclass_defaults(ModelSpec), "input_dim": None},
    "train": _dataclass_defaults(TrainConfig),
    "output": {"dir": "runs/default"},
}

# sections whose values may be free-form mappings
_OPEN_KEYS = {("data", "columns")}


def defaults() -> dict:
    return copy.deepcopy(DEFAULTS)


def _merge(base: dict, update: dict, path: tuple = ()) -> None:
    for key, value in update.items():
        where = path + (key,)
        if key not in base:
            raise ConfigError(f"unknown config key {'.'.join(where)!r}")
        if isinstance(base[key], dict) and where not in _OPEN_KEYS:
            if not isinstance(value, dict):
                raise ConfigError(f"config key {'.'.join(where)!r} must be a mapping")
            _merge(base[key], value, where)
        else:
            base[key] = value


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the YAML file at ``path``, then dotted-key ``overrides``."""
    cfg = defaults()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        _merge(cfg, doc)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        *parents, leaf = dotted.split(".")
        nested: dict = {leaf: value}
        for p in reversed(parents):
            nested = {p: nested}
        _merge(cfg, nested)
    return cfg


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


def model_spec(cfg: dict, input_dim: int, kind: str | None = None) -> ModelSpec:
    data = dict(cfg["model"])
    if data.get("input_dim") is None:
        data["input_dim"] = input_dim
    if kind is not None:
        data["kind"] = kind
    return ModelSpec.from_dict(data)


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig.from_dict(dict(cfg["train"]))


def synthetic_config(cfg: dict) -> tuple[int, int, int, SyntheticConfig]:
    syn = dict(cfg["data"]["synthetic"])
    n_tickers, n_days, seed = syn.pop("tickers"), syn.pop("days"), syn.pop("seed")
    return int(n_tickers), int(n_days), int(seed), SyntheticConfig(**syn)
