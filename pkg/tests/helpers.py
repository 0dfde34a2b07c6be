"""Shared fixtures-as-functions and independent numerical oracles for the tests."""

from __future__ import annotations

import numpy as np

from gatedalpha.panel import FIELDS, MarketPanel, close_to_close


def bdates(n: int, start: str = "2021-01-04") -> np.ndarray:
    return np.datetime64(start, "D") + np.arange(n)


def panel_from_close(close, cap=None, industry=None, volume=None) -> MarketPanel:
    """Flat-bar panel (open = high = low = close) built around a close matrix."""
    close = np.asarray(close, dtype=np.float64)
    T, N = close.shape
    fields = {
        "open": close,
        "high": close,
        "low": close,
        "close": close,
        "volume": np.ones_like(close) if volume is None else np.asarray(volume, dtype=np.float64),
        "vwap": close,
        "returns": close_to_close(close),
        "cap": np.ones_like(close) if cap is None else np.asarray(cap, dtype=np.float64),
    }
    ind = np.zeros(N, dtype=np.int64) if industry is None else industry
    return MarketPanel(bdates(T), tuple(f"T{j}" for j in range(N)), fields, ind)


def panel_from_returns(returns, cap=None, industry=None) -> MarketPanel:
    """Panel whose close-to-close returns equal ``returns[1:]`` (row 0 is ignored)."""
    r = np.asarray(returns, dtype=np.float64).copy()
    r[0] = 0.0
    close = 100.0 * np.cumprod(1.0 + r, axis=0)
    return panel_from_close(close, cap=cap, industry=industry)


def random_field_panel(rng: np.random.Generator, T: int, N: int, nan_frac: float = 0.0, n_groups: int = 3, ties: bool = False) -> MarketPanel:
    """Arbitrary positive field values (no invariants needed by the evaluator), optional NaNs and ties."""
    fields = {}
    for name in FIELDS:
        v = rng.uniform(0.5, 2.0, (T, N))
        if ties:
            v = np.round(v * 4) / 4
        if name == "returns":
            v = v - 1.25
        if nan_frac:
            v[rng.random((T, N)) < nan_frac] = np.nan
        fields[name] = v
    industry = rng.integers(0, n_groups, N)
    return MarketPanel(bdates(T), tuple(f"T{j}" for j in range(N)), fields, industry)


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function ``f`` at ``x`` (x is restored afterwards)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-wise relative error, symmetric in its arguments."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / scale)
