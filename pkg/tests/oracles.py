"""Brute-force oracles that materialize each window or cross-section explicitly.

They use Python lists with ``statistics`` for moments and sorting for ranks,
sharing no code with either kernel backend.
"""

import math
import statistics

import numpy as np


def _avg_rank(values, v):
    """Average 1-based position of ``v`` in the sorted list."""
    s = sorted(values)
    pos = [i + 1 for i, u in enumerate(s) if u == v]
    return sum(pos) / len(pos)


def _oracle_window(name, win):
    w = len(win)
    cur = win[-1]
    if name == "ts_sum":
        return math.fsum(win)
    if name == "ts_product":
        return math.prod(win)
    if name == "ts_min":
        return min(win)
    if name == "ts_max":
        return max(win)
    if name == "ts_argmin":
        return win.index(min(win)) + 1
    if name == "ts_argmax":
        return win.index(max(win)) + 1
    if name == "ts_rank":
        return _avg_rank(win, cur) / w
    if name == "ts_stddev":
        return statistics.stdev(win) if w >= 2 else math.nan
    if name == "decay_linear":
        return math.fsum(v * (k + 1) for k, v in enumerate(win)) / (w * (w + 1) / 2)
    raise KeyError(name)


def _oracle_pair(name, xa, ya):
    if len(xa) < 2:
        return math.nan
    if name == "covariance":
        return statistics.covariance(xa, ya)
    try:
        return statistics.correlation(xa, ya)
    except statistics.StatisticsError:  # a constant window
        return math.nan


def brute_rolling(name, x, w, y=None):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    for j in range(N):
        for t in range(w - 1, T):
            xa = [float(v) for v in x[t - w + 1 : t + 1, j]]
            ya = None if y is None else [float(v) for v in y[t - w + 1 : t + 1, j]]
            if any(math.isnan(v) for v in xa) or (ya is not None and any(math.isnan(v) for v in ya)):
                continue
            out[t, j] = _oracle_window(name, xa) if y is None else _oracle_pair(name, xa, ya)
    return out


def brute_rank(x):
    out = np.full(x.shape, np.nan)
    for t in range(x.shape[0]):
        vals = [float(v) for v in x[t] if not math.isnan(v)]
        for j, v in enumerate(x[t]):
            if not math.isnan(v):
                out[t, j] = _avg_rank(vals, float(v)) / len(vals)
    return out


def brute_scale(x, a):
    out = np.full(x.shape, np.nan)
    for t in range(x.shape[0]):
        denom = math.fsum(abs(float(v)) for v in x[t] if not math.isnan(v))
        for j, v in enumerate(x[t]):
            if not math.isnan(v) and denom > 0:
                out[t, j] = v * a / denom
    return out


def brute_group_demean(x, groups):
    out = np.full(x.shape, np.nan)
    for t in range(x.shape[0]):
        for j, v in enumerate(x[t]):
            if math.isnan(v):
                continue
            peers = [float(x[t, k]) for k in range(x.shape[1]) if groups[k] == groups[j] and not math.isnan(x[t, k])]
            out[t, j] = v - math.fsum(peers) / len(peers)
    return out


def random_matrix(seed):
    """Varied shapes; every other panel is heavily tied; about 5% missing cells."""
    rng = np.random.default_rng(seed)
    T, N = int(rng.integers(6, 25)), int(rng.integers(2, 8))
    x = rng.normal(0.0, 1.0, (T, N))
    if seed % 2:
        x = np.round(x * 2) / 2
    x[rng.random((T, N)) < 0.05] = np.nan
    return x
