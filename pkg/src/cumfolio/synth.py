"""Seeded desk-scale fixtures in the ingestion format.

Three generators: an i.i.d. Gaussian return panel, a heavy-tailed panel
driven by a common jump factor, and an index whose log-returns switch into an
anti-persistent AR(1) regime for a stretch (so the local Hurst exponent dips
and recovers).
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .data import BenchmarkWeights, PricePanel

__all__ = [
    "WIG20_TICKERS",
    "WIG20_BENCHMARK_PERCENT",
    "business_days",
    "gaussian_panel",
    "shock_panel",
    "regime_index",
    "wig20_benchmark",
]

WIG20_TICKERS = ("PKOBP", "PZU", "PEKAO", "PKNORLEN", "PGE", "KGHM", "BZWBK", "LPP", "PGNIG", "MBANK")
# benchmark contributions in percent; they sum to 99.98 and are renormalized on use
WIG20_BENCHMARK_PERCENT = (18.31, 17.55, 14.57, 10.57, 9.40, 8.93, 6.51, 5.96, 4.43, 3.75)


def business_days(n: int, start: str = "2010-05-12", holidays: Sequence[str] = ()) -> tuple[str, ...]:
    """``n`` consecutive Monday-Friday dates from ``start``, skipping ``holidays``."""
    first = np.busday_offset(np.datetime64(start), 0, roll="forward", holidays=list(holidays))
    days = np.busday_offset(first, np.arange(n), roll="forward", holidays=list(holidays))
    return tuple(str(d) for d in days)


def _tickers(m: int) -> tuple[str, ...]:
    if m <= len(WIG20_TICKERS):
        return WIG20_TICKERS[:m]
    return tuple(f"A{i + 1:02d}" for i in range(m))


def _prices_from_returns(pct: np.ndarray, start_price: float = 100.0) -> np.ndarray:
    growth = np.vstack([np.ones((1, pct.shape[1])), 1.0 + pct / 100.0])
    return start_price * np.cumprod(growth, axis=0)


def gaussian_panel(rng: np.random.Generator, n_rows: int, n_assets: int, vol: float = 1.5,
                   dates: Optional[Sequence[str]] = None) -> PricePanel:
    """Prices whose percent returns are i.i.d. ``N(0, vol**2)``."""
    dates = tuple(dates) if dates is not None else business_days(n_rows)
    pct = vol * rng.standard_normal((n_rows - 1, n_assets))
    return PricePanel(dates, _tickers(n_assets), _prices_from_returns(pct))


def shock_panel(rng: np.random.Generator, n_rows: int, n_assets: int, vol: float = 1.2,
                shock_prob: float = 0.03, shock_mean: float = -1.0, shock_sd: float = 5.0,
                dates: Optional[Sequence[str]] = None) -> PricePanel:
    """Gaussian noise plus a rare common jump loaded unevenly on the assets.

    The jump mixture gives every asset large positive excess kurtosis and
    makes the tails cross-correlated.
    """
    dates = tuple(dates) if dates is not None else business_days(n_rows)
    t = n_rows - 1
    loadings = rng.uniform(1.0, 2.0, n_assets)
    jumps = (rng.random(t) < shock_prob) * rng.normal(shock_mean, shock_sd, t)
    pct = vol * rng.standard_normal((t, n_assets)) + np.outer(jumps, loadings)
    pct = np.maximum(pct, -50.0)
    return PricePanel(dates, _tickers(n_assets), _prices_from_returns(pct))


def regime_index(rng: np.random.Generator, n_rows: int, *, ar_coef: float = -0.6,
                 regime: Optional[tuple[int, int]] = None, vol: float = 0.012,
                 ticker: str = "INDEX", dates: Optional[Sequence[str]] = None) -> PricePanel:
    """Index level with AR(1) log-returns of coefficient ``ar_coef`` inside ``regime``.

    ``regime`` is a half-open row range; outside it returns are i.i.d. With
    ``regime=None`` the whole series is AR(1).
    """
    dates = tuple(dates) if dates is not None else business_days(n_rows)
    t = n_rows - 1
    lo, hi = regime if regime is not None else (0, t)
    eps = vol * rng.standard_normal(t)
    r = np.empty(t)
    prev = 0.0
    for k in range(t):
        coef = ar_coef if lo <= k < hi else 0.0
        prev = coef * prev + eps[k]
        r[k] = prev
    level = 1000.0 * np.exp(np.concatenate([[0.0], np.cumsum(r)]))
    return PricePanel(dates, (ticker,), level[:, None])


def wig20_benchmark(tickers: Sequence[str]) -> BenchmarkWeights:
    """WIG20 contribution weights when every ticker is one of the ten names, equal weights otherwise."""
    pct = dict(zip(WIG20_TICKERS, WIG20_BENCHMARK_PERCENT))
    if all(t in pct for t in tickers):
        return BenchmarkWeights.from_percent(tickers, [pct[t] for t in tickers])
    return BenchmarkWeights(tuple(tickers), np.full(len(tickers), 1.0 / len(tickers)))
