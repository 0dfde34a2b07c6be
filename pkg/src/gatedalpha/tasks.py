"""Synthetic prediction tasks with a known generating rule, for end-to-end checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alpha.evaluate import FactorMatrix, standardize_cross_section
from .panel import LabelSet, sign_labels


@dataclass(frozen=True)
class NonlinearTask:
    features: FactorMatrix
    labels: LabelSet
    signal: np.ndarray  # noiseless score; the Bayes-optimal ranking


def random_factors(n_tickers: int, n_dates: int, n_factors: int, seed: int) -> FactorMatrix:
    """Gaussian factors, standardized per (date, factor) cross-section."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n_dates, n_tickers, n_factors))
    values = np.stack([standardize_cross_section(raw[:, :, f]) for f in range(n_factors)], axis=-1)
    dates = np.datetime64("2020-01-01") + np.arange(n_dates)
    tickers = tuple(f"T{j:05d}" for j in range(n_tickers))
    names = tuple(f"f{i:03d}" for i in range(n_factors))
    return FactorMatrix(dates, tickers, values, names, np.zeros(values.shape, dtype=bool), True)


def make_nonlinear_task(
    features: FactorMatrix,
    seed: int,
    hidden: int = 8,
    linear_weight: float = 0.5,
    noise: float = 0.1,
) -> NonlinearTask:
    """Label each sample by the sign of ``w.x + v.tanh(A x) * tanh(B x) + noise``.

    The tanh products make the rule non-monotone in every direction, so no
    affine score recovers it.  ``signal`` (the noiseless score) is the
    Bayes-optimal ranking for the labels.
    """
    rng = np.random.default_rng(seed)
    X = features.flat()
    F = X.shape[1]
    w = rng.standard_normal(F) / np.sqrt(F)
    A = rng.standard_normal((hidden, F)) * (1.5 / np.sqrt(F))
    B = rng.standard_normal((hidden, F)) * (1.5 / np.sqrt(F))
    v = rng.choice([-1.0, 1.0], hidden)
    s = linear_weight * (X @ w) + (np.tanh(X @ A.T) * np.tanh(X @ B.T)) @ v / np.sqrt(hidden)
    s = s / s.std()
    excess = s + noise * rng.standard_normal(s.shape)
    shape = features.values.shape[:2]
    excess = excess.reshape(shape)
    return NonlinearTask(features, LabelSet(1, excess, sign_labels(excess)), s.reshape(shape))
