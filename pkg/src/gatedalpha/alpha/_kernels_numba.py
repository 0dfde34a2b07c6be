"""Loop kernels compiled with numba.  Inputs are C-contiguous (dates, tickers) float64.

Every time-series kernel writes NaN for the first ``w - 1`` rows and for any
window that contains a NaN.
"""

import numpy as np

from .._accel import jit

# sxx / sum(x^2) below this counts as zero variance
DEGENERATE = 1e-14


@jit
def ts_sum(x, w):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    for j in range(N):
        for t in range(w - 1, T):
            s = 0.0
            for k in range(t - w + 1, t + 1):
                s += x[k, j]
            out[t, j] = s
    return out


@jit
def ts_product(x, w):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    for j in range(N):
        for t in range(w - 1, T):
            p = 1.0
            for k in range(t - w + 1, t + 1):
                p *= x[k, j]
            out[t, j] = p
    return out


@jit
def ts_min(x, w):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    for j in range(N):
        for t in range(w - 1, T):
            m = np.inf
            bad = False
            for k in range(t - w + 1, t + 1):
                v = x[k, j]
                if np.isnan(v):
                    bad = True
                    break
                if v < m:
                    m = v
            if not bad:
                out[t, j] = m
    return out


@jit
def ts_max(x, w):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    for j in range(N):
        for t in range(w - 1, T):
            m = -np.inf
            bad = False
            for k in range(t - w + 1, t + 1):
                v = x[k, j]
                if np.isnan(v):
                    bad = True
                    break
                if v > m:
                    m = v
            if not bad:
                out[t, j] = m
    return out


@jit
def ts_argmin(x, w):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    for j in range(N):
        for t in range(w - 1, T):
            best = 0
            bad = False
            for i in range(w):
                v = x[t - w + 1 + i, j]
                if np.isnan(v):
                    bad = True
                    break
                if v < x[t - w + 1 + best, j]:
                    best = i
            if not bad:
                out[t, j] = best + 1.0
    return out


@jit
def ts_argmax(x, w):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    for j in range(N):
        for t in range(w - 1, T):
            best = 0
            bad = False
            for i in range(w):
                v = x[t - w + 1 + i, j]
                if np.isnan(v):
                    bad = True
                    break
                if v > x[t - w + 1 + best, j]:
                    best = i
            if not bad:
                out[t, j] = best + 1.0
    return out


@jit
def ts_rank(x, w):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    for j in range(N):
        for t in range(w - 1, T):
            last = x[t, j]
            less = 0
            equal = 0
            bad = np.isnan(last)
            for k in range(t - w + 1, t + 1):
                v = x[k, j]
                if np.isnan(v):
                    bad = True
                    break
                if v < last:
                    less += 1
                elif v == last:
                    equal += 1
            if not bad:
                out[t, j] = (less + (equal + 1) / 2.0) / w
    return out


@jit
def ts_stddev(x, w):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    if w < 2:
        return out
    for j in range(N):
        for t in range(w - 1, T):
            s = 0.0
            for k in range(t - w + 1, t + 1):
                s += x[k, j]
            if np.isnan(s):
                continue
            mean = s / w
            ss = 0.0
            for k in range(t - w + 1, t + 1):
                d = x[k, j] - mean
                ss += d * d
            out[t, j] = np.sqrt(ss / (w - 1))
    return out


@jit
def decay_linear(x, w):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    norm = w * (w + 1) / 2.0
    for j in range(N):
        for t in range(w - 1, T):
            s = 0.0
            for i in range(w):
                s += (i + 1.0) * x[t - w + 1 + i, j]
            out[t, j] = s / norm
    return out


@jit
def covariance(x, y, w):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    if w < 2:
        return out
    for j in range(N):
        for t in range(w - 1, T):
            sx = 0.0
            sy = 0.0
            for k in range(t - w + 1, t + 1):
                sx += x[k, j]
                sy += y[k, j]
            if np.isnan(sx) or np.isnan(sy):
                continue
            mx = sx / w
            my = sy / w
            sxy = 0.0
            for k in range(t - w + 1, t + 1):
                sxy += (x[k, j] - mx) * (y[k, j] - my)
            out[t, j] = sxy / (w - 1)
    return out


@jit
def correlation(x, y, w):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    if w < 2:
        return out
    for j in range(N):
        for t in range(w - 1, T):
            sx = 0.0
            sy = 0.0
            for k in range(t - w + 1, t + 1):
                sx += x[k, j]
                sy += y[k, j]
            if np.isnan(sx) or np.isnan(sy):
                continue
            mx = sx / w
            my = sy / w
            sxy = 0.0
            sxx = 0.0
            syy = 0.0
            qx = 0.0
            qy = 0.0
            for k in range(t - w + 1, t + 1):
                dx = x[k, j] - mx
                dy = y[k, j] - my
                sxy += dx * dy
                sxx += dx * dx
                syy += dy * dy
                qx += x[k, j] * x[k, j]
                qy += y[k, j] * y[k, j]
            if sxx <= DEGENERATE * qx or syy <= DEGENERATE * qy:
                continue
            r = sxy / np.sqrt(sxx * syy)
            if r > 1.0:
                r = 1.0
            elif r < -1.0:
                r = -1.0
            out[t, j] = r
    return out


@jit
def rank_rows(x):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    for t in range(T):
        idx = np.empty(N, dtype=np.int64)
        n = 0
        for j in range(N):
            if not np.isnan(x[t, j]):
                idx[n] = j
                n += 1
        if n == 0:
            continue
        vals = np.empty(n)
        for i in range(n):
            vals[i] = x[t, idx[i]]
        order = np.argsort(vals)
        i = 0
        while i < n:
            k = i
            while k + 1 < n and vals[order[k + 1]] == vals[order[i]]:
                k += 1
            avg = (i + k) / 2.0 + 1.0
            for m in range(i, k + 1):
                out[t, idx[order[m]]] = avg / n
            i = k + 1
    return out


@jit
def scale_rows(x, a):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    for t in range(T):
        s = 0.0
        for j in range(N):
            if not np.isnan(x[t, j]):
                s += abs(x[t, j])
        if s > 0.0:
            for j in range(N):
                out[t, j] = x[t, j] * a / s
    return out


@jit
def group_demean(x, groups):
    T, N = x.shape
    out = np.full((T, N), np.nan)
    gmax = 0
    for j in range(N):
        if groups[j] > gmax:
            gmax = groups[j]
    sums = np.zeros(gmax + 1)
    counts = np.zeros(gmax + 1)
    for t in range(T):
        sums[:] = 0.0
        counts[:] = 0.0
        for j in range(N):
            v = x[t, j]
            if not np.isnan(v):
                sums[groups[j]] += v
                counts[groups[j]] += 1.0
        for j in range(N):
            v = x[t, j]
            if not np.isnan(v):
                out[t, j] = v - sums[groups[j]] / counts[groups[j]]
    return out
