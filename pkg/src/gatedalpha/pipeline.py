"""Glue from a run config to panel, factors, labels, splits and trained models."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as config_mod
from .alpha.evaluate import FactorMatrix, evaluate_library, load_alpha_file, starter_library
from .models import MODEL_KINDS, build
from .panel import LabelSet, MarketPanel, excess_returns, generate_synthetic, load_panel
from .train import RunRecord, SplitPlan, make_splits, train

logger = logging.getLogger(__name__)


@dataclass
class Prepared:
    panel: MarketPanel
    features: FactorMatrix
    labels: LabelSet
    splits: SplitPlan


def load_data(cfg: dict) -> MarketPanel:
    src = cfg["data"]["source"]
    if src:
        return load_panel(src, cfg["data"]["columns"])
    n_tickers, n_days, seed, regime = config_mod.synthetic_config(cfg)
    return generate_synthetic(n_tickers, n_days, seed, regime)


def compute_factors(cfg: dict, panel: MarketPanel) -> FactorMatrix:
    a = cfg["alphas"]
    exprs = load_alpha_file(a["file"]) if a["file"] else starter_library()
    return evaluate_library(exprs, panel, standardize=bool(a["standardize"]), n_jobs=int(a["jobs"]))


def compute_labels(cfg: dict, panel: MarketPanel) -> LabelSet:
    lab = cfg["label"]
    horizon = int(lab["horizon"])
    # betas are fit on the dates that precede the test window
    fit_end = max(panel.shape[0] - horizon - int(cfg["split"]["test_days"]), 0)
    return excess_returns(
        panel,
        horizon=horizon,
        risk_free=lab["risk_free"],
        benchmark=lab["benchmark"],
        weighting=lab["weighting"],
        fit_end=fit_end,
    )


def prepare(cfg: dict) -> Prepared:
    panel = load_data(cfg)
    features = compute_factors(cfg, panel)
    labels = compute_labels(cfg, panel)
    s = cfg["split"]
    plan = SplitPlan(test_days=int(s["test_days"]), valid_fraction=float(s["valid_fraction"]), seed=int(s["seed"]))
    splits = make_splits(labels, plan, features)
    return Prepared(panel, features, labels, splits)


def run_one(cfg: dict, kind: str, out_dir, prepared: Prepared | None = None) -> RunRecord:
    prepared = prepared or prepare(cfg)
    tcfg = config_mod.train_config(cfg)
    spec = config_mod.model_spec(cfg, prepared.features.n_factors, kind)
    model = build(spec, seed=tcfg.seed)
    logger.info("training %s (%d parameters) into %s", kind, model.n_params(), out_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run_cfg = dict(cfg)
    run_cfg["model"] = {**cfg["model"], "kind": kind}
    (out_dir / "config.echo").write_text(config_mod.dump_config(run_cfg), encoding="utf-8")
    return train(model, prepared.features, prepared.labels, prepared.splits, tcfg, out_dir)


def _run_one_isolated(args):
    cfg, kind, out_dir = args
    rec = run_one(cfg, kind, out_dir)
    return rec.summary()


DISPLAY_NAMES = {
    "linear": "Linear",
    "simple_mlp": "Simple MLP",
    "stack_mlp": "Stack MLP",
    "deep_mlp": "Deep MLP",
    "gated_deep_mlp": "GatedDeep MLP",
}


def comparison_table(summaries: list[dict]) -> str:
    lines = [f"{'Model':<15}{'Valid':>10}{'Test':>10}"]
    for s in summaries:
        lines.append(f"{DISPLAY_NAMES[s['model_kind']]:<15}{s['valid_auc']:>10.4f}{s['test_auc']:>10.4f}")
    return "\n".join(lines) + "\n"


def run_benchmark(cfg: dict, out_dir, kinds=MODEL_KINDS, jobs: int = 1) -> list[dict]:
    """Train every model kind into ``out_dir/<kind>`` and write a comparison table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_run_one_isolated, [(cfg, k, out_dir / k) for k in kinds]))
    else:
        prepared = prepare(cfg)
        summaries = [run_one(cfg, k, out_dir / k, prepared).summary() for k in kinds]
    (out_dir / "comparison.txt").write_text(comparison_table(summaries), encoding="utf-8")
    (out_dir / "comparison.json").write_text(json.dumps(summaries, indent=2) + "\n", encoding="utf-8")
    return summaries


def split_indices(prepared: Prepared, which: str) -> np.ndarray:
    if which not in ("train", "valid", "test"):
        raise ValueError(f"unknown split {which!r}")
    return getattr(prepared.splits, which)
