"""Daily market panels, synthetic generation, and excess-return labels.

A panel is stored as one ``(n_dates, n_tickers)`` float64 matrix per field,
with NaN marking a missing cell.  Nothing in this module zero-fills.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .errors import DataError

logger = logging.getLogger(__name__)

FIELDS = ("open", "high", "low", "close", "volume", "vwap", "returns", "cap")
REQUIRED_COLUMNS = ("date", "ticker", "open", "high", "low", "close", "volume")
OPTIONAL_COLUMNS = ("vwap", "returns", "cap", "industry")
CSV_COLUMNS = REQUIRED_COLUMNS + OPTIONAL_COLUMNS

MISSING_GROUP = -1
RETURN_TOL = 1e-12


class PanelWarning(UserWarning):
    """Raised (as a warning) when input cells are dropped for violating invariants."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def close_to_close(close: np.ndarray) -> np.ndarray:
    """Simple daily returns ``close[t] / close[t-1] - 1``; first row missing."""
    close = np.asarray(close, dtype=np.float64)
    out = np.full_like(close, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[1:] = close[1:] / close[:-1] - 1.0
    out[~np.isfinite(out)] = np.nan
    return out


@dataclass(frozen=True, eq=False)
class MarketPanel:
    """Immutable date x ticker table of daily fields."""

    dates: np.ndarray
    tickers: tuple
    fields: Mapping[str, np.ndarray]
    industry: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        tickers = tuple(str(t) for t in self.tickers)
        shape = (len(dates), len(tickers))
        fields = {}
        for name in FIELDS:
            if name not in self.fields:
                raise DataError(f"panel is missing field {name!r}")
            arr = np.asarray(self.fields[name], dtype=np.float64)
            if arr.shape != shape:
                raise DataError(f"field {name!r} has shape {arr.shape}, expected {shape}")
            fields[name] = _readonly(arr)
        unknown = set(self.fields) - set(FIELDS)
        if unknown:
            raise DataError(f"unknown panel fields: {sorted(unknown)}")
        industry = np.asarray(self.industry, dtype=np.int64)
        if industry.shape != (shape[1],):
            raise DataError(f"industry has shape {industry.shape}, expected ({shape[1]},)")
        object.__setattr__(self, "dates", _readonly(dates))
        object.__setattr__(self, "tickers", tickers)
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "industry", _readonly(industry))
        if len(dates) > 1 and not np.all(dates[1:] > dates[:-1]):
            raise DataError("panel dates must be strictly increasing")
        if len(set(tickers)) != len(tickers):
            raise DataError("panel tickers must be unique")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.dates), len(self.tickers)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.fields[name]

    def violations(self) -> list[str]:
        """Describe every invariant violation; an empty list means the panel is valid."""
        f = self.fields
        out = []
        o, h, lo, c = f["open"], f["high"], f["low"], f["close"]
        allp = ~(np.isnan(o) | np.isnan(h) | np.isnan(lo) | np.isnan(c))
        ok = (h >= np.maximum(o, c)) & (np.minimum(o, c) >= lo)
        n_bad = int(np.sum(allp & ~ok))
        if n_bad:
            out.append(f"{n_bad} cells violate high >= max(open, close) >= min(open, close) >= low")
        if np.any(f["volume"] < 0):
            out.append("negative volume")
        if np.any(f["cap"] <= 0):
            out.append("non-positive cap")
        expected = close_to_close(c)
        both = ~np.isnan(expected)
        r = f["returns"]
        if np.any(both & ~(np.abs(r - expected) <= RETURN_TOL)):
            out.append("returns disagree with close-to-close ratio")
        return out

    def validate(self) -> "MarketPanel":
        problems = self.violations()
        if problems:
            raise DataError("invalid panel: " + "; ".join(problems))
        return self

    def equals(self, other: "MarketPanel") -> bool:
        """Field-identical comparison (NaN equals NaN)."""
        if self.tickers != other.tickers or not np.array_equal(self.dates, other.dates):
            return False
        if not np.array_equal(self.industry, other.industry):
            return False
        return all(np.array_equal(self.fields[k], other.fields[k], equal_nan=True) for k in FIELDS)


def _clean_fields(fields: dict[str, np.ndarray], where: str = "") -> None:
    """Set invariant-violating cells missing in place, warning once per kind."""
    o, h, lo, c = fields["open"], fields["high"], fields["low"], fields["close"]
    allp = ~(np.isnan(o) | np.isnan(h) | np.isnan(lo) | np.isnan(c))
    with np.errstate(invalid="ignore"):
        bad = allp & ~((h >= np.maximum(o, c)) & (np.minimum(o, c) >= lo))
    if bad.any():
        warnings.warn(
            f"{where}{int(bad.sum())} cells violate OHLC ordering; set missing", PanelWarning, stacklevel=3
        )
        for k in ("open", "high", "low", "close"):
            fields[k][bad] = np.nan
    with np.errstate(invalid="ignore"):
        neg_vol = fields["volume"] < 0
        bad_cap = fields["cap"] <= 0
        bad_close = fields["close"] <= 0
    if neg_vol.any():
        warnings.warn(f"{where}{int(neg_vol.sum())} negative volumes set missing", PanelWarning, stacklevel=3)
        fields["volume"][neg_vol] = np.nan
    if bad_cap.any():
        warnings.warn(f"{where}{int(bad_cap.sum())} non-positive caps set missing", PanelWarning, stacklevel=3)
        fields["cap"][bad_cap] = np.nan
    if bad_close.any():
        warnings.warn(f"{where}{int(bad_close.sum())} non-positive closes set missing", PanelWarning, stacklevel=3)
        fields["close"][bad_close] = np.nan


def _parse_numeric(col: pd.Series, name: str) -> np.ndarray:
    text = col.str.strip()
    empty = (text == "") | text.str.lower().isin(["nan", "na"])
    values = pd.to_numeric(text.where(~empty), errors="coerce")
    bad = values.isna() & ~empty
    if bad.any():
        i = int(np.flatnonzero(bad.to_numpy())[0])
        # header is line 1
        raise DataError(f"line {i + 2}: column {name!r} has non-numeric value {col.iloc[i]!r}")
    # to_numeric is not correctly rounded; numpy's parser is, which keeps save/load exact
    return text.where(~empty, "nan").to_numpy(dtype=str).astype(np.float64)


def load_panel(path, columns: Mapping[str, str] | None = None) -> MarketPanel:
    """Read a long-format CSV (one row per date and ticker) into a panel.

    ``columns`` maps canonical names (``date``, ``close``, ...) to the header
    names used in the file.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"panel file not found: {path}")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    if columns:
        raw = raw.rename(columns={src: dst for dst, src in columns.items()})
    missing = [c for c in REQUIRED_COLUMNS if c not in raw.columns]
    if missing:
        raise DataError(f"{path}: missing required columns {missing}")

    dates = pd.to_datetime(raw["date"].str.strip(), format="%Y-%m-%d", errors="coerce")
    if dates.isna().any():
        i = int(np.flatnonzero(dates.isna().to_numpy())[0])
        raise DataError(f"line {i + 2}: bad date {raw['date'].iloc[i]!r} (expected yyyy-mm-dd)")
    tick = raw["ticker"].str.strip()
    if (tick == "").any():
        i = int(np.flatnonzero((tick == "").to_numpy())[0])
        raise DataError(f"line {i + 2}: empty ticker")
    dup = pd.DataFrame({"d": dates, "t": tick}).duplicated()
    if dup.any():
        i = int(np.flatnonzero(dup.to_numpy())[0])
        raise DataError(f"line {i + 2}: duplicate row for ({raw['date'].iloc[i]}, {tick.iloc[i]})")

    day = dates.to_numpy().astype("datetime64[D]")
    uniq_dates = np.unique(day)
    uniq_tickers = sorted(set(tick))
    ti = np.searchsorted(uniq_dates, day)
    tj = pd.Index(uniq_tickers).get_indexer(tick)
    shape = (len(uniq_dates), len(uniq_tickers))

    values = {}
    for name in FIELDS:
        if name in raw.columns:
            values[name] = _parse_numeric(raw[name], name)
    fields = {}
    for name in FIELDS:
        mat = np.full(shape, np.nan)
        if name in values:
            mat[ti, tj] = values[name]
        fields[name] = mat

    industry = np.full(shape[1], MISSING_GROUP, dtype=np.int64)
    if "industry" in raw.columns:
        ind = _parse_numeric(raw["industry"], "industry")
        present = ~np.isnan(ind)
        if np.any(ind[present] != np.round(ind[present])):
            i = int(np.flatnonzero(present & (ind != np.round(ind)))[0])
            raise DataError(f"line {i + 2}: industry must be an integer")
        for row in np.flatnonzero(present):
            j, g = tj[row], int(ind[row])
            if industry[j] == MISSING_GROUP:
                industry[j] = g
            elif industry[j] != g:
                raise DataError(f"line {row + 2}: ticker {tick.iloc[row]!r} changes industry group")

    _clean_fields(fields, where=f"{path.name}: ")
    if "vwap" not in values:
        fields["vwap"] = (fields["high"] + fields["low"] + fields["close"]) / 3.0
    computed = close_to_close(fields["close"])
    if "returns" not in values:
        fields["returns"] = computed
    else:
        given = fields["returns"]
        defined = ~np.isnan(computed)
        off = defined & ~(np.abs(given - computed) <= RETURN_TOL)
        if off.any():
            warnings.warn(
                f"{path.name}: {int(off.sum())} returns disagree with close prices; recomputed",
                PanelWarning,
                stacklevel=2,
            )
        given[defined] = computed[defined]
    return MarketPanel(uniq_dates, tuple(uniq_tickers), fields, industry)


def save_panel(panel: MarketPanel, path) -> None:
    """Write ``panel`` in the same long CSV layout :func:`load_panel` reads."""
    n_dates, n_tickers = panel.shape
    data = {
        "date": np.repeat(np.datetime_as_string(panel.dates, unit="D"), n_tickers),
        "ticker": np.tile(np.array(panel.tickers, dtype=object), n_dates),
    }
    for name in FIELDS:
        data[name] = panel.fields[name].ravel()
    ind = pd.Series(np.tile(panel.industry, n_dates), dtype="Int64")
    data["industry"] = ind.mask(ind == MISSING_GROUP)
    df = pd.DataFrame(data, columns=list(CSV_COLUMNS))
    df.to_csv(path, index=False, na_rep="", lineterminator="\n")


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs for :func:`generate_synthetic`.  Daily log-return units."""

    start_date: str = "2020-01-02"
    price_scale: float = 20.0
    drift: float = 0.0002
    vol: float = 0.02
    market_vol: float = 0.01
    beta_low: float = 0.5
    beta_high: float = 1.5
    reversal: float = 0.0
    intraday_vol: float = 0.01
    log_volume_mean: float = 13.0
    log_volume_sigma: float = 0.5
    n_industries: int = 10


def generate_synthetic(n_tickers: int, n_dates: int, seed: int, regime: SyntheticConfig | None = None) -> MarketPanel:
    """Simulate a one-factor geometric random walk panel.

    Log returns are ``beta_j * market_t + idio_{t,j}`` where ``idio`` may carry
    a first-order reversal (``regime.reversal``) on the previous day's idio
    shock.  Deterministic for a fixed ``seed``.
    """
    cfg = regime or SyntheticConfig()
    if n_tickers < 2:
        raise DataError(f"n_tickers must be >= 2, got {n_tickers}")
    if n_dates < 30:
        raise DataError(f"synthetic panel needs at least 30 trading days (n_dates), got {n_dates}")
    if not cfg.vol > 0 or not cfg.market_vol >= 0 or not cfg.intraday_vol >= 0:
        raise DataError("volatilities must be positive (vol > 0, market_vol >= 0, intraday_vol >= 0)")
    if not cfg.price_scale > 0:
        raise DataError("price_scale must be positive")
    if cfg.n_industries < 1:
        raise DataError("n_industries must be >= 1")

    rng = np.random.default_rng(seed)
    shape = (n_dates, n_tickers)
    beta = rng.uniform(cfg.beta_low, cfg.beta_high, n_tickers)
    mkt = rng.normal(cfg.drift, cfg.market_vol, n_dates)
    shock = rng.normal(0.0, cfg.vol, shape)
    idio = shock.copy()
    idio[1:] -= cfg.reversal * shock[:-1]
    logret = mkt[:, None] * beta[None, :] + idio
    logret[0] = 0.0
    p0 = cfg.price_scale * np.exp(rng.normal(0.0, 0.5, n_tickers))
    close = p0[None, :] * np.exp(np.cumsum(logret, axis=0))

    prev = np.vstack([close[:1], close[:-1]])
    open_ = prev * np.exp(rng.normal(0.0, cfg.intraday_vol / 2, shape))
    hi_pad = np.exp(np.abs(rng.normal(0.0, cfg.intraday_vol, shape)))
    lo_pad = np.exp(-np.abs(rng.normal(0.0, cfg.intraday_vol, shape)))
    high = np.maximum(open_, close) * hi_pad
    low = np.minimum(open_, close) * lo_pad
    volume = np.exp(rng.normal(cfg.log_volume_mean, cfg.log_volume_sigma, shape))
    shares = np.exp(rng.normal(18.0, 1.0, n_tickers))
    industry = rng.integers(0, cfg.n_industries, n_tickers)

    dates = pd.bdate_range(cfg.start_date, periods=n_dates).to_numpy().astype("datetime64[D]")
    width = max(3, len(str(n_tickers - 1)))
    tickers = tuple(f"S{j:0{width}d}" for j in range(n_tickers))
    fields = {
        "open": open_,
        "high": high,
        "low": low,
        "close": close,
        "volume": volume,
        "vwap": (high + low + close) / 3.0,
        "returns": close_to_close(close),
        "cap": close * shares[None, :],
    }
    return MarketPanel(dates, tickers, fields, industry)


# --------------------------------------------------------------------------
# market and excess returns


def market_returns(panel: MarketPanel, weighting: str = "equal") -> np.ndarray:
    """Cross-sectional weighted mean return per date; NaN where no ticker has a return."""
    r = panel["returns"]
    if weighting == "equal":
        w = np.where(np.isnan(r), 0.0, 1.0)
    elif weighting == "cap":
        w = np.where(np.isnan(r) | np.isnan(panel["cap"]), 0.0, panel["cap"])
    else:
        raise ValueError(f"unknown weighting {weighting!r}; expected 'equal' or 'cap'")
    num = np.sum(np.where(w > 0, r, 0.0) * w, axis=1)
    den = np.sum(w, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / den
    out[den == 0] = np.nan
    return out


def market_return(panel: MarketPanel, t: int, weighting: str = "equal") -> float:
    """Market return proxy at date index ``t``."""
    r = panel["returns"][t]
    mask = ~np.isnan(r)
    if weighting == "cap":
        cap = panel["cap"][t]
        mask &= ~np.isnan(cap)
        w = cap[mask]
    elif weighting == "equal":
        w = np.ones(int(mask.sum()))
    else:
        raise ValueError(f"unknown weighting {weighting!r}; expected 'equal' or 'cap'")
    if not mask.any():
        raise DataError(f"no returns available at date index {t}")
    return float(np.sum(r[mask] * w) / np.sum(w))


def _risk_free(risk_free, n_dates: int) -> np.ndarray:
    if risk_free is None:
        return np.zeros(n_dates)
    rf = np.broadcast_to(np.asarray(risk_free, dtype=np.float64), (n_dates,)).copy()
    return rf


def _compound_forward(r: np.ndarray, horizon: int) -> np.ndarray:
    """``prod_{s=t+1}^{t+h} (1 + r_s) - 1`` along axis 0; last ``h`` rows missing."""
    out = np.full(r.shape, np.nan)
    n = r.shape[0]
    if horizon >= n:
        return out
    growth = np.ones((n - horizon,) + r.shape[1:])
    for s in range(1, horizon + 1):
        growth = growth * (1.0 + r[s : n - horizon + s])
    out[: n - horizon] = growth - 1.0
    return out


def capm_alpha_return(r_i, r_m, r_f, beta):
    """``(r_i - r_f) - beta * (r_m - r_f)``: the return not explained by market exposure."""
    return (np.asarray(r_i) - r_f) - beta * (np.asarray(r_m) - r_f)


def fit_betas(
    stock_excess: np.ndarray, market_excess: np.ndarray, min_obs: int = 30
) -> tuple[np.ndarray, np.ndarray]:
    """OLS slope (with intercept) of each stock column on the market series.

    Returns ``(beta, n_obs)``; beta is NaN where fewer than ``min_obs``
    overlapping observations exist or the market has zero variance.
    """
    y = np.asarray(stock_excess, dtype=np.float64)
    x = np.broadcast_to(np.asarray(market_excess, dtype=np.float64)[:, None], y.shape)
    ok = ~(np.isnan(y) | np.isnan(x))
    n = ok.sum(axis=0)
    xs = np.where(ok, x, 0.0)
    ys = np.where(ok, y, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mx = xs.sum(axis=0) / n
        my = ys.sum(axis=0) / n
        dx = np.where(ok, x - mx, 0.0)
        dy = np.where(ok, y - my, 0.0)
        sxx = np.sum(dx * dx, axis=0)
        beta = np.sum(dx * dy, axis=0) / sxx
    beta[(n < min_obs) | ~(sxx > 0)] = np.nan
    return beta, n


@dataclass(frozen=True, eq=False)
class LabelSet:
    """Forward excess returns and their binary sign labels (NaN = missing)."""

    horizon: int
    excess: np.ndarray
    label: np.ndarray
    benchmark: str = "market_mean"
    beta: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "excess", _readonly(self.excess))
        object.__setattr__(self, "label", _readonly(self.label))
        if self.beta is not None:
            object.__setattr__(self, "beta", _readonly(self.beta))


def sign_labels(excess: np.ndarray) -> np.ndarray:
    """1 where excess > 0, 0 where excess <= 0, NaN where missing."""
    out = np.where(excess > 0, 1.0, 0.0)
    out[np.isnan(excess)] = np.nan
    return out


def excess_returns(
    panel: MarketPanel,
    horizon: int = 1,
    risk_free=None,
    benchmark: str = "market_mean",
    weighting: str = "equal",
    fit_end: int | None = None,
    min_obs: int = 30,
) -> LabelSet:
    """Excess return over the next ``horizon`` days for every (date, ticker).

    ``market_mean``: compounded stock return minus compounded market return
    over ``t+1 .. t+horizon``.  ``beta_adjusted``: CAPM alpha return on the
    compounded stock, market and risk-free returns, with each ticker's beta
    fit on daily data from dates ``[0, fit_end)`` only.
    """
    n_dates = panel.shape[0]
    if horizon < 1:
        raise DataError(f"horizon must be >= 1, got {horizon}")
    if horizon >= n_dates:
        raise DataError(f"horizon {horizon} must be smaller than the number of dates {n_dates}")
    rf = _risk_free(risk_free, n_dates)
    r = panel["returns"]
    rm = market_returns(panel, weighting)
    stock = _compound_forward(r, horizon)
    market = _compound_forward(rm, horizon)

    beta = None
    if benchmark == "market_mean":
        excess = stock - market[:, None]
    elif benchmark == "beta_adjusted":
        end = n_dates if fit_end is None else int(fit_end)
        beta, _ = fit_betas(r[:end] - rf[:end, None], rm[:end] - rf[:end], min_obs=min_obs)
        skipped = np.isnan(beta)
        if skipped.any():
            warnings.warn(
                f"{int(skipped.sum())} tickers lack {min_obs} observations for beta; labels missing",
                PanelWarning,
                stacklevel=2,
            )
        rf_h = _compound_forward(rf, horizon)
        excess = capm_alpha_return(stock, market[:, None], rf_h[:, None], beta[None, :])
    else:
        raise ValueError(f"unknown benchmark {benchmark!r}; expected 'market_mean' or 'beta_adjusted'")
    return LabelSet(horizon, excess, sign_labels(excess), benchmark, beta)


@dataclass(frozen=True, eq=False)
class ReturnDecomposition:
    """Per-ticker betas and the alpha/beta split of daily returns."""

    beta: np.ndarray
    alpha_return: np.ndarray
    beta_return: np.ndarray
    market_return: np.ndarray
    risk_free: np.ndarray


def decompose(
    panel: MarketPanel,
    risk_free=None,
    weighting: str = "equal",
    min_obs: int = 30,
    fit_end: int | None = None,
) -> ReturnDecomposition:
    """Split each ticker's daily return into beta (market) and alpha parts."""
    n_dates = panel.shape[0]
    rf = _risk_free(risk_free, n_dates)
    r = panel["returns"]
    rm = market_returns(panel, weighting)
    end = n_dates if fit_end is None else int(fit_end)
    beta, n_obs = fit_betas(r[:end] - rf[:end, None], rm[:end] - rf[:end], min_obs=min_obs)
    for j in np.flatnonzero(np.isnan(beta)):
        warnings.warn(
            f"ticker {panel.tickers[j]!r} skipped: {int(n_obs[j])} overlapping observations (< {min_obs})",
            PanelWarning,
            stacklevel=2,
        )
    beta_ret = beta[None, :] * (rm - rf)[:, None]
    alpha_ret = (r - rf[:, None]) - beta_ret
    return ReturnDecomposition(beta, alpha_ret, beta_ret, rm, rf)
