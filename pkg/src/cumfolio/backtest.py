"""Benchmark-blended test portfolios evaluated over consecutive holding windows.

A window of ``L`` trading days spans ``L + 1`` price rows; the buy happens at
the close of the first row and the sale at the close of the last, which is
also the first row of the next window. Factor matrices are re-estimated for
every window from the ``train_len`` returns dated strictly before it.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import gaussian_kde

from .cumulants import cumulant_family, cumulant_tensor
from .data import BenchmarkWeights, PricePanel, ReturnPanel, percent_returns
from .errors import (
    DegenerateDenominator,
    DimMismatch,
    InsufficientHistory,
    OutOfRange,
    WindowTooShort,
)
from .factorization import AlsConfig, AlsTrace, FactorMatrix, als_factor, evd_factor
from .hurst import Episode

__all__ = [
    "ALL_METHODS",
    "STATISTICS",
    "BenchmarkWeights",
    "TestPortfolio",
    "WindowStats",
    "WindowResult",
    "BacktestReport",
    "blend",
    "portfolio_return",
    "window_stats",
    "cumulative",
    "schedule_windows",
    "run_backtest",
    "post_exit_backtest",
    "write_report",
]

ALL_METHODS = ("EVD", "PHI4", "PHI6", "ZERO")
STATISTICS = ("min", "max", "mean", "mode")
BENCHMARK = "BENCHMARK"


@dataclass(frozen=True, eq=False)
class TestPortfolio:
    """Value weights of one blended portfolio; negative entries are short sales."""

    __test__ = False  # keep pytest from collecting this class

    method: str
    column: int  # 1-based column of the factor matrix
    weights: np.ndarray


@dataclass(frozen=True)
class WindowStats:
    min: float
    max: float
    mean: float
    mode: float

    def as_dict(self) -> dict[str, float]:
        return {"min": self.min, "max": self.max, "mean": self.mean, "mode": self.mode}


@dataclass(eq=False)
class WindowResult:
    window: int  # 1-based
    start: str
    end: str
    returns: dict[str, np.ndarray]
    stats: dict[str, WindowStats]
    benchmark: float
    factors: dict[str, FactorMatrix] = field(default_factory=dict, repr=False)
    traces: dict[str, AlsTrace] = field(default_factory=dict, repr=False)


@dataclass(eq=False)
class BacktestReport:
    windows: list[WindowResult]
    methods: tuple[str, ...]
    config: dict
    cumulative: dict[str, dict[str, list[float]]] = field(default_factory=dict)
    benchmark_cumulative: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.cumulative:
            self.cumulative = {
                stat: {m: cumulative([getattr(w.stats[m], stat) for w in self.windows]) for m in self.methods}
                for stat in STATISTICS
            }
            self.benchmark_cumulative = cumulative([w.benchmark for w in self.windows])


# -- single-window pieces -------------------------------------------------------

def _weights_vector(bp, tickers: Optional[Sequence[str]]) -> np.ndarray:
    if isinstance(bp, BenchmarkWeights):
        return bp.weights if tickers is None else bp.aligned(tickers)
    return np.asarray(bp, dtype=float)


def blend(
    V,
    bp,
    alpha: float = 7.0,
    n_rear: int = 5,
    tickers: Optional[Sequence[str]] = None,
) -> list[TestPortfolio]:
    """Mix each rear factor column with the benchmark and renormalize to sum 1.

    ``TV[:, j] = (alpha * BP + V[:, j]) / sum(alpha * BP + V[:, j])``. The
    numerator is evaluated as ``BP + V[:, j] / alpha`` (same ratio), so
    ``alpha = inf`` gives the pure benchmark, and an all-zero column returns
    ``BP`` itself.
    """
    method = getattr(V, "method", "CUSTOM")
    V = np.asarray(getattr(V, "matrix", V), dtype=float)
    w = _weights_vector(bp, tickers)
    m = V.shape[0]
    if w.shape != (m,):
        raise DimMismatch(f"benchmark has {w.shape[0]} weights, factor matrix has {m} rows")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    k = min(n_rear, V.shape[1])
    out = []
    for j in range(V.shape[1] - k, V.shape[1]):
        if not V[:, j].any():
            # algebraically TV = BP here; skip the division so it holds bit for bit
            tv = w.copy()
        else:
            num = w + V[:, j] / alpha
            den = num.sum()
            if abs(den) * alpha < 1e-9:
                raise DegenerateDenominator(f"column {j + 1}: blended weights sum to ~0")
            tv = num / den
        tv.setflags(write=False)
        out.append(TestPortfolio(method, j + 1, tv))
    return out


def benchmark_portfolio(bp, tickers: Optional[Sequence[str]] = None) -> TestPortfolio:
    return TestPortfolio(BENCHMARK, 0, _weights_vector(bp, tickers).copy())


def portfolio_return(tp: TestPortfolio, prices, L: int) -> float:
    """Percent return after ``L`` days: ``100 * (sum_i TV_i * p[L, i] / p[0, i] - 1)``."""
    p = prices.prices if isinstance(prices, PricePanel) else np.asarray(prices, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    if L < 0 or p.shape[0] < L + 1:
        raise WindowTooShort(f"need {L + 1} price rows, window has {p.shape[0]}")
    if p.shape[1] != len(tp.weights):
        raise DimMismatch("portfolio and price window disagree on asset count")
    return float(100.0 * (np.dot(tp.weights, p[L] / p[0]) - 1.0))


def window_stats(returns, grid_points: int = 512) -> WindowStats:
    """min, max, mean and the KDE mode of one window's rear-portfolio returns.

    The mode is the argmax of a Gaussian KDE with Silverman bandwidth on an
    evenly spaced grid over ``[min, max]``.
    """
    r = np.asarray(returns, dtype=float).reshape(-1)
    lo, hi = float(r.min()), float(r.max())
    # offset form keeps the mean exactly equal to lo when all values coincide
    mean = lo + float(np.mean(r - lo))
    if hi == lo:
        return WindowStats(lo, hi, lo, lo)
    mean = min(max(mean, lo), hi)
    try:
        kde = gaussian_kde(r, bw_method="silverman")
    except np.linalg.LinAlgError:
        return WindowStats(lo, hi, mean, mean)
    grid = np.linspace(lo, hi, grid_points)
    mode = float(grid[int(np.argmax(kde(grid)))])
    return WindowStats(lo, hi, mean, mode)


def cumulative(values: Sequence[float]) -> list[float]:
    """Compounded percent path: ``100 * (prod(1 + v/100) - 1)`` after each step."""
    out, growth = [], 0.0
    for v in values:
        # track prod - 1 directly so small paths do not lose digits to cancellation
        r = v / 100.0
        growth = growth + r + growth * r
        out.append(100.0 * growth)
    return out


# -- scheduling -----------------------------------------------------------------

def schedule_windows(
    dates: Sequence[str],
    start_index: int,
    window_len: int,
    *,
    until: Optional[str] = None,
    n_windows: Optional[int] = None,
) -> list[tuple[int, int]]:
    """Row spans ``(first, last)`` of consecutive windows sharing endpoints.

    With ``until`` the schedule runs up to and including the first window
    whose last date is on or after ``until``; otherwise exactly ``n_windows``
    windows are produced.
    """
    if (until is None) == (n_windows is None):
        raise ValueError("give exactly one of `until` or `n_windows`")
    if window_len < 1:
        raise ValueError("window_len must be >= 1")
    spans: list[tuple[int, int]] = []
    i0 = start_index
    while True:
        if n_windows is not None and len(spans) >= n_windows:
            break
        i1 = i0 + window_len
        if i1 >= len(dates):
            raise InsufficientHistory(
                f"window {len(spans) + 1} starting {dates[i0] if i0 < len(dates) else '?'} "
                f"needs {window_len + 1} price rows; data ends at {dates[-1]}"
            )
        spans.append((i0, i1))
        if until is not None and dates[i1] >= until:
            break
        i0 = i1
    return spans


def _factor_matrices(
    train: np.ndarray, methods: Sequence[str], als: AlsConfig
) -> tuple[dict[str, FactorMatrix], dict[str, AlsTrace]]:
    factors: dict[str, FactorMatrix] = {}
    traces: dict[str, AlsTrace] = {}
    n_max = 6 if "PHI6" in methods else 4 if "PHI4" in methods else 0
    family = cumulant_family(train, n_max) if n_max else None
    for m in methods:
        if m == "EVD":
            c2 = family[2] if family is not None else cumulant_tensor(train, 2)
            factors[m] = evd_factor(c2)
        elif m in ("PHI4", "PHI6"):
            order = int(m[-1])
            cfg = AlsConfig(n_max=order, max_iters=als.max_iters, rel_tol=als.rel_tol)
            factors[m], traces[m] = als_factor(family.truncated(order), cfg)
        elif m == "ZERO":
            factors[m] = FactorMatrix.zero(train.shape[1])
        else:
            raise ValueError(f"unknown method {m!r}; expected one of {ALL_METHODS}")
    return factors, traces


def _run_windows(
    prices: PricePanel,
    returns: ReturnPanel,
    bp,
    spans: Sequence[tuple[int, int]],
    *,
    train_len: int,
    methods: Sequence[str],
    alpha: float,
    n_rear: int,
    als: AlsConfig,
    config: dict,
) -> BacktestReport:
    if returns.dates != prices.dates[1:] or returns.tickers != prices.tickers:
        raise DimMismatch("returns panel must be percent_returns of the price panel")
    weights = _weights_vector(bp, prices.tickers)
    bench = benchmark_portfolio(weights)
    results = []
    for k, (i0, i1) in enumerate(spans, start=1):
        # returns row r is dated prices row r + 1; keep those dated before prices row i0
        r_end = i0 - 1
        r_start = r_end - train_len
        if r_start < 0:
            raise InsufficientHistory(
                f"window {k} starting {prices.dates[i0]} needs {train_len} training returns, "
                f"only {max(r_end, 0)} available"
            )
        train = returns.returns[r_start:r_end]
        factors, traces = _factor_matrices(train, methods, als)
        window = prices.prices[i0:i1 + 1]
        L = i1 - i0
        rets, stats = {}, {}
        for m in methods:
            tps = blend(factors[m], weights, alpha=alpha, n_rear=n_rear)
            rets[m] = np.array([portfolio_return(tp, window, L) for tp in tps])
            stats[m] = window_stats(rets[m])
        results.append(WindowResult(
            window=k,
            start=prices.dates[i0],
            end=prices.dates[i1],
            returns=rets,
            stats=stats,
            benchmark=portfolio_return(bench, window, L),
            factors=factors,
            traces=traces,
        ))
    return BacktestReport(results, tuple(methods), config)


def _config_echo(**kw) -> dict:
    out = {}
    for k, v in kw.items():
        if isinstance(v, AlsConfig):
            v = {"max_iters": v.max_iters, "rel_tol": v.rel_tol}
        elif isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out


def run_backtest(
    prices: PricePanel,
    bp,
    episode: Union[Episode, tuple[str, Optional[str]]],
    *,
    returns: Optional[ReturnPanel] = None,
    window_len: int = 20,
    train_len: int = 1100,
    methods: Sequence[str] = ("EVD", "PHI4", "PHI6"),
    alpha: float = 7.0,
    n_rear: int = 5,
    als: Optional[AlsConfig] = None,
) -> BacktestReport:
    """Backtest from the day after the entry signal until the window covering the exit.

    Windows run back to back; the last one is the first whose closing date
    is on or after the exit date.
    """
    entry, exit_ = (episode.entry, episode.exit) if isinstance(episode, Episode) else episode
    if exit_ is None:
        raise ValueError("episode has no exit date; use post_exit_backtest with a window count")
    try:
        start = prices.index_of(entry) + 1
    except OutOfRange:
        raise InsufficientHistory(f"entry date {entry} not in price data") from None
    spans = schedule_windows(prices.dates, start, window_len, until=exit_)
    returns = returns if returns is not None else percent_returns(prices)
    als = als or AlsConfig()
    cfg = _config_echo(
        entry=entry, exit=exit_, window_len=window_len, train_len=train_len,
        methods=tuple(methods), alpha=alpha, n_rear=n_rear, als=als,
    )
    return _run_windows(
        prices, returns, bp, spans, train_len=train_len, methods=methods,
        alpha=alpha, n_rear=n_rear, als=als, config=cfg,
    )


def post_exit_backtest(
    prices: PricePanel,
    bp,
    start: str,
    n_windows: int,
    *,
    returns: Optional[ReturnPanel] = None,
    window_len: int = 20,
    train_len: int = 1100,
    methods: Sequence[str] = ("EVD", "PHI4", "PHI6"),
    alpha: float = 7.0,
    n_rear: int = 5,
    als: Optional[AlsConfig] = None,
) -> BacktestReport:
    """A fixed number of windows, the first one opening on ``start``."""
    try:
        i0 = prices.index_of(start)
    except OutOfRange:
        raise InsufficientHistory(f"start date {start} not in price data") from None
    spans = schedule_windows(prices.dates, i0, window_len, n_windows=n_windows)
    returns = returns if returns is not None else percent_returns(prices)
    als = als or AlsConfig()
    cfg = _config_echo(
        start=start, n_windows=n_windows, window_len=window_len, train_len=train_len,
        methods=tuple(methods), alpha=alpha, n_rear=n_rear, als=als,
    )
    return _run_windows(
        prices, returns, bp, spans, train_len=train_len, methods=methods,
        alpha=alpha, n_rear=n_rear, als=als, config=cfg,
    )


# -- output ---------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_report(report: BacktestReport, out_dir: Union[str, Path], prefix: str = "") -> list[Path]:
    """Write one CSV per statistic, per-portfolio returns and ``summary.json``.

    Returns the paths written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for stat in STATISTICS:
        path = out / f"{prefix}stat_{stat}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["window", "start", "end", "method", "value", "cumulative"])
            for k, win in enumerate(report.windows):
                for m in report.methods:
                    w.writerow([win.window, win.start, win.end, m,
                                _fmt(getattr(win.stats[m], stat)),
                                _fmt(report.cumulative[stat][m][k])])
                w.writerow([win.window, win.start, win.end, BENCHMARK,
                            _fmt(win.benchmark), _fmt(report.benchmark_cumulative[k])])
        written.append(path)

    path = out / f"{prefix}portfolio_returns.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window", "start", "end", "method", "column", "return"])
        for win in report.windows:
            for m in report.methods:
                n = len(win.returns[m])
                first = win.factors[m].dim - n + 1 if m in win.factors else 1
                for j, r in enumerate(win.returns[m]):
                    w.writerow([win.window, win.start, win.end, m, first + j, _fmt(r)])
    written.append(path)

    summary = {
        "config": report.config,
        "methods": list(report.methods),
        "n_windows": len(report.windows),
        "windows": [
            {
                "window": win.window,
                "start": win.start,
                "end": win.end,
                "benchmark": win.benchmark,
                "stats": {m: win.stats[m].as_dict() for m in report.methods},
                "als_iterations": {m: t.iterations for m, t in sorted(win.traces.items())},
            }
            for win in report.windows
        ],
        "final_cumulative": {
            stat: {m: (vals[-1] if vals else 0.0) for m, vals in report.cumulative[stat].items()}
            for stat in STATISTICS
        },
        "benchmark_final_cumulative": report.benchmark_cumulative[-1] if report.windows else 0.0,
    }
    path = out / f"{prefix}summary.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)
    return written
