"""Evaluate alpha expression trees over a :class:`MarketPanel`."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import DataError
from ..panel import MarketPanel
from . import kernels
from .ast import AlphaExpr, Binary, Conditional, Const, CrossSectional, Field, Node, TimeSeries, Unary
from .parser import parse_library

logger = logging.getLogger(__name__)

_COMPARE = {
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
    "==": np.equal,
    "!=": np.not_equal,
}


def _finite(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if not np.isfinite(a).all():
        a = np.where(np.isfinite(a), a, np.nan)
    return a


def _boolean(mask: np.ndarray, *inputs: np.ndarray) -> np.ndarray:
    out = mask.astype(np.float64)
    for x in inputs:
        out[np.isnan(x)] = np.nan
    return out


def _shift(x: np.ndarray, d: int) -> np.ndarray:
    out = np.full_like(x, np.nan)
    if d < x.shape[0]:
        out[d:] = x[:-d]
    return out


class _Evaluator:
    def __init__(self, panel: MarketPanel, backend=None):
        self.panel = panel
        self.k = backend or kernels.backend()
        self.cache: dict = {}
        _, codes = np.unique(panel.industry, return_inverse=True)
        self.groups = np.ascontiguousarray(codes, dtype=np.int64)

    def __call__(self, node: Node) -> np.ndarray:
        hit = self.cache.get(node)
        if hit is None:
            hit = _finite(self.compute(node))
            hit.setflags(write=False)
            self.cache[node] = hit
        return hit

    def compute(self, node: Node) -> np.ndarray:
        p = self.panel
        if isinstance(node, Const):
            return np.full(p.shape, node.value)
        if isinstance(node, Field):
            if node.name == "adv":
                dollar = kernels.contiguous(p["close"] * p["volume"])
                return self.k.ts_sum(dollar, node.window) / node.window
            return p[node.name]
        if isinstance(node, Unary):
            x = self(node.operand)
            with np.errstate(all="ignore"):
                if node.op == "-":
                    return -x
                if node.op == "!":
                    return _boolean(x == 0, x)
                if node.op == "log":
                    return np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), np.nan)
                if node.op == "abs":
                    return np.abs(x)
                if node.op == "sign":
                    return np.sign(x)
        if isinstance(node, Binary):
            a, b = self(node.left), self(node.right)
            with np.errstate(all="ignore"):
                if node.op == "+":
                    return a + b
                if node.op == "-":
                    return a - b
                if node.op == "*":
                    return a * b
                if node.op == "/":
                    return a / b
                if node.op == "^":
                    return np.power(a, b)
                if node.op == "signedpower":
                    return np.sign(a) * np.power(np.abs(a), b)
                if node.op == "min":
                    return np.minimum(a, b)
                if node.op == "max":
                    return np.maximum(a, b)
                if node.op in _COMPARE:
                    return _boolean(_COMPARE[node.op](a, b), a, b)
                if node.op == "&&":
                    return _boolean((a != 0) & (b != 0), a, b)
                if node.op == "||":
                    return _boolean((a != 0) | (b != 0), a, b)
        if isinstance(node, Conditional):
            c, a, b = self(node.cond), self(node.then), self(node.other)
            out = np.where(c != 0, a, b)
            out[np.isnan(c)] = np.nan
            return out
        if isinstance(node, CrossSectional):
            x = kernels.contiguous(self(node.operand))
            if node.op == "rank":
                return self.k.rank_rows(x)
            if node.op == "scale":
                return self.k.scale_rows(x, 1.0 if node.param is None else float(node.param))
            if node.op == "indneutralize":
                return self.k.group_demean(x, self.groups)
        if isinstance(node, TimeSeries):
            args = [kernels.contiguous(self(a)) for a in node.args]
            w = node.window
            if node.op == "delay":
                return _shift(args[0], w)
            if node.op == "delta":
                return args[0] - _shift(args[0], w)
            return getattr(self.k, node.op)(*args, w)
        raise TypeError(f"cannot evaluate node {node!r}")


def evaluate(expr: AlphaExpr | Node, panel: MarketPanel, backend: str | None = None) -> np.ndarray:
    """Evaluate one expression to a (dates, tickers) matrix; NaN marks missing."""
    node = expr.ast if isinstance(expr, AlphaExpr) else expr
    k = kernels.backend(backend) if backend else None
    out = _Evaluator(panel, k)(node)
    return np.array(out)


def standardize_cross_section(x: np.ndarray) -> np.ndarray:
    """Per-row z-score over non-missing entries; zero-variance rows become 0."""
    x = np.asarray(x, dtype=np.float64)
    out = np.full(x.shape, np.nan)
    valid = ~np.isnan(x)
    n = valid.sum(axis=1)
    for t in np.flatnonzero(n > 0):
        row = x[t, valid[t]]
        if row.max() == row.min():
            out[t, valid[t]] = 0.0
            continue
        mean = row.mean()
        sd = row.std()
        if not sd > 1e-14 * np.sqrt(np.mean(row * row)):
            out[t, valid[t]] = 0.0
            continue
        out[t, valid[t]] = (row - mean) / sd
    return out


@dataclass(frozen=True, eq=False)
class FactorMatrix:
    """Evaluated factors: ``values[date, ticker, factor]``.

    ``imputed`` marks cells that were missing before standardization and were
    filled with the cross-sectional mean (0).  Without standardization the
    raw values keep their NaNs and ``imputed`` is all False.
    """

    dates: np.ndarray
    tickers: tuple
    values: np.ndarray
    factor_names: tuple
    imputed: np.ndarray
    standardized: bool = False

    def __post_init__(self):
        shape = (len(self.dates), len(self.tickers), len(self.factor_names))
        if self.values.shape != shape:
            raise DataError(f"factor values have shape {self.values.shape}, expected {shape}")
        if self.imputed.shape != shape:
            raise DataError(f"imputation mask has shape {self.imputed.shape}, expected {shape}")

    @property
    def n_factors(self) -> int:
        return len(self.factor_names)

    def flat(self) -> np.ndarray:
        """(dates * tickers, factors) view; row ``t * n_tickers + j``."""
        return self.values.reshape(-1, self.n_factors)

    def with_values(self, values: np.ndarray) -> "FactorMatrix":
        return FactorMatrix(self.dates, self.tickers, values, self.factor_names, self.imputed, self.standardized)

    def to_long_frame(self) -> pd.DataFrame:
        """Long table (date, ticker, factor, value) of the non-missing, non-imputed cells."""
        T, N, F = self.values.shape
        keep = ~(np.isnan(self.values) | self.imputed)
        t, j, f = np.nonzero(keep)
        return pd.DataFrame(
            {
                "date": np.datetime_as_string(np.asarray(self.dates)[t], unit="D"),
                "ticker": np.asarray(self.tickers, dtype=object)[j],
                "factor": np.asarray(self.factor_names, dtype=object)[f],
                "value": self.values[t, j, f],
            }
        )

    def save_long_csv(self, path) -> None:
        self.to_long_frame().to_csv(path, index=False, lineterminator="\n")

    def save_per_factor(self, directory) -> list[Path]:
        """One wide CSV per factor: rows are dates, columns tickers."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        dates = np.datetime_as_string(np.asarray(self.dates), unit="D")
        for f, name in enumerate(self.factor_names):
            vals = np.where(self.imputed[:, :, f], np.nan, self.values[:, :, f])
            frame = pd.DataFrame(vals, index=pd.Index(dates, name="date"), columns=list(self.tickers))
            path = directory / f"{name}.csv"
            frame.to_csv(path, na_rep="", lineterminator="\n")
            paths.append(path)
        return paths


def evaluate_library(
    exprs: list[AlphaExpr],
    panel: MarketPanel,
    standardize: bool = True,
    n_jobs: int = 1,
    backend: str | None = None,
) -> FactorMatrix:
    """Evaluate every expression and stack the results into a :class:`FactorMatrix`."""
    names = [e.name or f"alpha_{i:03d}" for i, e in enumerate(exprs)]
    if len(set(names)) != len(names):
        raise DataError("alpha names must be unique")
    k = kernels.backend(backend) if backend else None

    def one(expr: AlphaExpr) -> np.ndarray:
        # fresh evaluator per factor keeps the cache thread-local
        raw = np.array(_Evaluator(panel, k)(expr.ast))
        return standardize_cross_section(raw) if standardize else raw

    if n_jobs > 1 and len(exprs) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            columns = list(pool.map(one, exprs))
    else:
        columns = [one(e) for e in exprs]
    T, N = panel.shape
    values = np.stack(columns, axis=-1) if columns else np.zeros((T, N, 0))
    if standardize:
        imputed = np.isnan(values)
        values = np.where(imputed, 0.0, values)
    else:
        imputed = np.zeros(values.shape, dtype=bool)
    return FactorMatrix(panel.dates, panel.tickers, values, tuple(names), imputed, standardize)


def load_alpha_file(path) -> list[AlphaExpr]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"alpha file not found: {path}")
    return parse_library(path.read_text(encoding="utf-8"), origin=str(path))


def starter_library() -> list[AlphaExpr]:
    """The packaged starter set of price-volume alphas."""
    text = resources.files("gatedalpha.alpha").joinpath("data/starter_alphas.txt").read_text(encoding="utf-8")
    return parse_library(text, origin="starter_alphas.txt")
