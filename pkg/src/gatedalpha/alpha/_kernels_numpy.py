"""Vectorized numpy versions of the alpha kernels (same contracts as the numba ones)."""

import warnings

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._kernels_numba import DEGENERATE


def _windows(x, w):
    """(T - w + 1, N, w) view plus a mask of windows free of NaN."""
    win = sliding_window_view(x, w, axis=0)
    return win, ~np.isnan(win).any(axis=-1)


def _emit(x, w, values, ok):
    out = np.full(x.shape, np.nan)
    if x.shape[0] >= w:
        out[w - 1 :] = np.where(ok, values, np.nan)
    return out


def _guard(fn):
    def wrapped(*args):
        x, w = args[0], args[-1]
        if x.shape[0] < w:
            return np.full(x.shape, np.nan)
        return fn(*args)

    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    return wrapped


@_guard
def ts_sum(x, w):
    win, ok = _windows(x, w)
    return _emit(x, w, win.sum(axis=-1), ok)


@_guard
def ts_product(x, w):
    win, ok = _windows(x, w)
    return _emit(x, w, win.prod(axis=-1), ok)


@_guard
def ts_min(x, w):
    win, ok = _windows(x, w)
    with np.errstate(invalid="ignore"):
        return _emit(x, w, win.min(axis=-1), ok)


@_guard
def ts_max(x, w):
    win, ok = _windows(x, w)
    with np.errstate(invalid="ignore"):
        return _emit(x, w, win.max(axis=-1), ok)


@_guard
def ts_argmin(x, w):
    win, ok = _windows(x, w)
    filled = np.where(np.isnan(win), np.inf, win)
    return _emit(x, w, filled.argmin(axis=-1) + 1.0, ok)


@_guard
def ts_argmax(x, w):
    win, ok = _windows(x, w)
    filled = np.where(np.isnan(win), -np.inf, win)
    return _emit(x, w, filled.argmax(axis=-1) + 1.0, ok)


@_guard
def ts_rank(x, w):
    win, ok = _windows(x, w)
    last = win[..., -1:]
    less = (win < last).sum(axis=-1)
    equal = (win == last).sum(axis=-1)
    return _emit(x, w, (less + (equal + 1) / 2.0) / w, ok)


@_guard
def ts_stddev(x, w):
    if w < 2:
        return np.full(x.shape, np.nan)
    win, ok = _windows(x, w)
    return _emit(x, w, win.std(axis=-1, ddof=1), ok)


@_guard
def decay_linear(x, w):
    win, ok = _windows(x, w)
    weights = np.arange(1.0, w + 1.0) / (w * (w + 1) / 2.0)
    return _emit(x, w, win @ weights, ok)


@_guard
def covariance(x, y, w):
    if w < 2:
        return np.full(x.shape, np.nan)
    wx, okx = _windows(x, w)
    wy, oky = _windows(y, w)
    dx = wx - wx.mean(axis=-1, keepdims=True)
    dy = wy - wy.mean(axis=-1, keepdims=True)
    return _emit(x, w, (dx * dy).sum(axis=-1) / (w - 1), okx & oky)


@_guard
def correlation(x, y, w):
    if w < 2:
        return np.full(x.shape, np.nan)
    wx, okx = _windows(x, w)
    wy, oky = _windows(y, w)
    dx = wx - wx.mean(axis=-1, keepdims=True)
    dy = wy - wy.mean(axis=-1, keepdims=True)
    sxx = (dx * dx).sum(axis=-1)
    syy = (dy * dy).sum(axis=-1)
    ok = okx & oky
    ok &= sxx > DEGENERATE * (wx * wx).sum(axis=-1)
    ok &= syy > DEGENERATE * (wy * wy).sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (dx * dy).sum(axis=-1) / np.sqrt(sxx * syy)
    return _emit(x, w, np.clip(r, -1.0, 1.0), ok)


def rank_rows(x):
    out = np.full(x.shape, np.nan)
    for t in range(x.shape[0]):
        row = x[t]
        valid = np.flatnonzero(~np.isnan(row))
        n = valid.size
        if n == 0:
            continue
        vals = row[valid]
        order = np.argsort(vals, kind="mergesort")
        sorted_vals = vals[order]
        # tie groups: start index of each run of equal values
        starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
        ends = np.r_[starts[1:], n] - 1
        avg = (starts + ends) / 2.0 + 1.0
        ranks = np.empty(n)
        ranks[order] = np.repeat(avg, ends - starts + 1)
        out[t, valid] = ranks / n
    return out


def scale_rows(x, a):
    s = np.nansum(np.abs(x), axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = x * a / s
    out[(s <= 0).ravel()] = np.nan
    return out


def group_demean(x, groups):
    out = np.full(x.shape, np.nan)
    for g in np.unique(groups):
        cols = groups == g
        block = x[:, cols]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            mean = np.nanmean(block, axis=1, keepdims=True)
        out[:, cols] = block - mean
    return out
