"""Experimental protocol: splits, mini-batch training, periodic validation, ROC-AUC."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .alpha.evaluate import FactorMatrix
from .errors import ConfigError, DataError, NumericError
from .models import ModelGraph, load_model, save_model
from .nn.losses import bce_with_logits, ic_loss
from .nn.optim import Adam
from .panel import LabelSet

logger = logging.getLogger(__name__)

LOSS_MODES = ("bce", "bce_plus_ic", "ic_only")


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum (Mann-Whitney) statistic.

    Tied scores receive their average rank, so each tied positive/negative
    pair counts one half.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError(f"scores {s.shape} and labels {y.shape} differ in length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = int((y == 0).sum())
    if n_pos + n_neg != y.size:
        raise ValueError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC is undefined when only one class is present")
    order = np.argsort(s, kind="mergesort")
    ss = s[order]
    starts = np.flatnonzero(np.r_[True, ss[1:] != ss[:-1]])
    ends = np.r_[starts[1:], ss.size]
    avg = (starts + ends + 1) / 2.0  # 1-based average rank of each tie run
    ranks = np.empty(ss.size)
    ranks[order] = np.repeat(avg, ends - starts)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class SplitPlan:
    """Train / validation / test membership over flattened (date, ticker) samples.

    Sample ``i`` is date ``i // n_tickers``, ticker ``i % n_tickers``.
    """

    test_days: int = 70
    valid_fraction: float = 0.05
    seed: int = 0
    train: np.ndarray | None = field(default=None, repr=False)
    valid: np.ndarray | None = field(default=None, repr=False)
    test: np.ndarray | None = field(default=None, repr=False)
    test_dates: np.ndarray | None = field(default=None, repr=False)
    n_tickers: int = 0

    @property
    def populated(self) -> bool:
        return self.train is not None

    def describe(self) -> dict:
        return {
            "test_days": self.test_days,
            "valid_fraction": self.valid_fraction,
            "seed": self.seed,
            "n_train": int(len(self.train)),
            "n_valid": int(len(self.valid)),
            "n_test": int(len(self.test)),
            "first_test_date_index": int(self.test_dates[0]),
            "last_test_date_index": int(self.test_dates[-1]),
        }


def usable_samples(labels: LabelSet, features: FactorMatrix | None = None) -> np.ndarray:
    """Boolean (dates * tickers,) mask of samples with a label and complete features."""
    ok = ~np.isnan(labels.label).ravel()
    if features is not None:
        ok &= ~np.isnan(features.flat()).any(axis=1)
    return ok


def make_splits(labels: LabelSet, plan: SplitPlan, features: FactorMatrix | None = None) -> SplitPlan:
    """Hold out the last ``test_days`` labeled dates, then a random validation subset."""
    if plan.test_days < 1:
        raise ConfigError("test_days must be >= 1")
    if not 0.0 <= plan.valid_fraction < 1.0:
        raise ConfigError("valid_fraction must be in [0, 1)")
    n_dates, n_tickers = labels.label.shape
    ok = usable_samples(labels, features)
    per_date = ok.reshape(n_dates, n_tickers).any(axis=1)
    labeled_dates = np.flatnonzero(per_date)
    if len(labeled_dates) <= plan.test_days:
        raise DataError(
            f"need at least {plan.test_days + 1} labeled dates for a {plan.test_days}-day test split, "
            f"found {len(labeled_dates)}"
        )
    test_dates = labeled_dates[-plan.test_days :]
    date_of = np.arange(n_dates * n_tickers) // n_tickers
    in_test = np.isin(date_of, test_dates)
    test = np.flatnonzero(ok & in_test)
    pool = np.flatnonzero(ok & ~in_test)
    n_valid = int(round(plan.valid_fraction * len(pool)))
    rng = np.random.default_rng(plan.seed)
    chosen = np.zeros(len(pool), dtype=bool)
    chosen[rng.choice(len(pool), size=n_valid, replace=False)] = True
    return replace(
        plan,
        train=pool[~chosen],
        valid=pool[chosen],
        test=test,
        test_dates=test_dates,
        n_tickers=n_tickers,
    )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3
    batch_size: int = 1024
    validate_every: int = 250
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss_mode: str = "bce"
    ic_lambda: float = 0.1
    ic_mode: str = "predictive"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.validate_every < 1:
            raise ConfigError(f"validate_every must be >= 1, got {self.validate_every}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.loss_mode not in LOSS_MODES:
            raise ConfigError(f"loss_mode must be one of {LOSS_MODES}, got {self.loss_mode!r}")
        if self.ic_mode not in ("predictive", "literal"):
            raise ConfigError(f"ic_mode must be 'predictive' or 'literal', got {self.ic_mode!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class RunRecord:
    model_kind: str
    train_loss: list = field(default_factory=list)  # (step, loss)
    valid_auc: list = field(default_factory=list)  # (step, auc)
    best_step: int = -1
    best_valid_auc: float = float("nan")
    test_auc: float = float("nan")
    total_steps: int = 0
    checkpoint: str | None = None

    def summary(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "best_step": self.best_step,
            "valid_auc": self.best_valid_auc,
            "test_auc": self.test_auc,
        }


class _MetricsWriter:
    """JSON-lines metrics stream, flushed per record so partial runs stay readable."""

    def __init__(self, path: Path | None):
        self.fh = open(path, "w", encoding="utf-8") if path is not None else None

    def write(self, record: dict) -> None:
        if self.fh is not None:
            self.fh.write(json.dumps(record) + "\n")
            self.fh.flush()

    def close(self) -> None:
        if self.fh is not None:
            self.fh.close()


def _check_classes(labels_flat: np.ndarray, idx: np.ndarray, what: str) -> None:
    y = labels_flat[idx]
    if len(idx) == 0 or y.min() == y.max():
        raise DataError(f"{what} set needs both label classes (size {len(idx)})")


def score_samples(model: ModelGraph, features: FactorMatrix, indices: np.ndarray, batch_size: int = 8192) -> np.ndarray:
    """Inference-mode logits for the given flat sample indices."""
    X = features.flat()
    out = np.empty(len(indices))
    for start in range(0, len(indices), batch_size):
        sl = indices[start : start + batch_size]
        out[start : start + len(sl)] = model.forward(X[sl], train=False)[:, 0]
    return out


def _auc_of(model, features, labels_flat, indices) -> tuple[float, np.ndarray]:
    scores = score_samples(model, features, indices)
    return roc_auc(scores, labels_flat[indices]), scores


def write_scores(path, features: FactorMatrix, labels_flat: np.ndarray, indices: np.ndarray, scores: np.ndarray) -> None:
    n_tickers = len(features.tickers)
    dates = np.datetime_as_string(np.asarray(features.dates), unit="D")
    frame = pd.DataFrame(
        {
            "date": dates[indices // n_tickers],
            "ticker": np.asarray(features.tickers, dtype=object)[indices % n_tickers],
            "score": scores,
            "label": labels_flat[indices].astype(np.int64),
        }
    )
    frame.to_csv(path, index=False, lineterminator="\n")


def _batches(cfg: TrainConfig, splits: SplitPlan, rng: np.random.Generator):
    """Yield index arrays for one epoch."""
    train = splits.train
    if cfg.loss_mode == "bce":
        perm = train[rng.permutation(len(train))]
        for start in range(0, len(perm), cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            if len(batch) >= 2:
                yield batch
        return
    # the IC term is cross-sectional: one date per step
    dates = train // splits.n_tickers
    uniq = np.unique(dates)
    for d in uniq[rng.permutation(len(uniq))]:
        batch = train[dates == d]
        if len(batch) >= 2:
            yield batch


def train(
    model: ModelGraph,
    features: FactorMatrix,
    labels: LabelSet,
    splits: SplitPlan,
    cfg: TrainConfig,
    out_dir=None,
) -> RunRecord:
    """Train with periodic validation; restore the best-validation weights and score the test set once.

    With ``out_dir`` set, writes ``metrics.jsonl``, ``checkpoint.bin`` (best
    weights, running statistics and optimizer state), ``summary.json`` and
    ``scores.csv`` (test set).
    """
    if not splits.populated:
        raise ConfigError("splits must be populated with make_splits first")
    if features.values.shape[:2] != labels.label.shape:
        raise DataError("features and labels are not aligned")
    if cfg.loss_mode != "bce" and model.feature_layer is None:
        raise ConfigError(f"loss_mode {cfg.loss_mode!r} needs a model with hidden features")
    labels_flat = labels.label.ravel()
    excess_flat = labels.excess.ravel()
    _check_classes(labels_flat, splits.valid, "validation")
    _check_classes(labels_flat, splits.test, "test")
    X = features.flat()

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    ckpt_path = out / "checkpoint.bin" if out is not None else None
    metrics = _MetricsWriter(out / "metrics.jsonl" if out is not None else None)

    opt = Adam(model.params(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    rng = np.random.default_rng(cfg.seed)
    record = RunRecord(model.spec.kind, checkpoint=str(ckpt_path) if ckpt_path else None)
    best_state = None
    step = 0
    last_validated = 0

    def validate() -> None:
        nonlocal best_state, last_validated
        auc, _ = _auc_of(model, features, labels_flat, splits.valid)
        record.valid_auc.append((step, auc))
        metrics.write({"step": step, "valid_auc": auc})
        last_validated = step
        # strict improvement keeps the earliest step on ties
        if best_state is None or auc > record.best_valid_auc:
            record.best_valid_auc = auc
            record.best_step = step
            best_state = model.copy_state()
            if ckpt_path is not None:
                save_model(model, ckpt_path, opt.state_dict(), {"step": step, "valid_auc": auc})

    try:
        for _epoch in range(cfg.epochs):
            for batch in _batches(cfg, splits, rng):
                opt.zero_grad()
                logits = model.forward(X[batch], train=True)
                loss = 0.0
                grad = np.zeros_like(logits)
                feature_grad = None
                if cfg.loss_mode in ("bce", "bce_plus_ic"):
                    loss, grad = bce_with_logits(logits, labels_flat[batch])
                if cfg.loss_mode in ("bce_plus_ic", "ic_only"):
                    ic, g_feat = ic_loss(model.features, excess_flat[batch], cfg.ic_lambda, cfg.ic_mode)
                    loss += ic
                    feature_grad = g_feat
                step += 1
                if not math.isfinite(loss):
                    raise NumericError(f"non-finite training loss at step {step}")
                model.backward(grad, feature_grad)
                opt.step()
                record.train_loss.append((step, loss))
                metrics.write({"step": step, "train_loss": loss})
                if step % cfg.validate_every == 0:
                    validate()
        if step == 0:
            raise DataError("no training batches: training set is empty")
        if last_validated != step:
            validate()
    finally:
        metrics.close()
    record.total_steps = step

    model.load_state_dict(best_state)
    record.test_auc, scores = _auc_of(model, features, labels_flat, splits.test)
    if out is not None:
        write_scores(out / "scores.csv", features, labels_flat, splits.test, scores)
        summary = record.summary()
        summary["protocol"] = {
            **splits.describe(),
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "validate_every": cfg.validate_every,
            "total_steps": step,
            "loss_mode": cfg.loss_mode,
        }
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return record


def evaluate(checkpoint, features: FactorMatrix, labels: LabelSet, indices: np.ndarray, score_path=None) -> tuple[float, np.ndarray]:
    """Score ``indices`` with a saved (or in-memory) model and return (AUC, scores)."""
    model = checkpoint if isinstance(checkpoint, ModelGraph) else load_model(checkpoint)[0]
    labels_flat = labels.label.ravel()
    indices = np.asarray(indices, dtype=np.int64)
    auc, scores = _auc_of(model, features, labels_flat, indices)
    if score_path is not None:
        write_scores(score_path, features, labels_flat, indices, scores)
    return auc, scores


def read_metrics(path) -> tuple[list, list]:
    """Parse a metrics.jsonl file into (train_loss, valid_auc) series."""
    losses, aucs = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if "train_loss" in rec:
                losses.append((rec["step"], rec["train_loss"]))
            else:
                aucs.append((rec["step"], rec["valid_auc"]))
    return losses, aucs


__all__ = [
    "RunRecord",
    "SplitPlan",
    "TrainConfig",
    "evaluate",
    "make_splits",
    "read_metrics",
    "roc_auc",
    "score_samples",
    "train",
    "usable_samples",
]
