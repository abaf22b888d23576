"""Price ingestion, percentage returns and row-counted window slicing.

Input files are long-format CSV with header ``date,ticker,close``. Dates are
ISO-8601 strings and are treated as opaque ordered labels: windows are
counted in rows (trading days), never in calendar time.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date as _date
from pathlib import Path
from typing import Iterable, Sequence, TypeVar, Union

import numpy as np

from .errors import (
    InvalidWeights,
    MalformedRow,
    MissingTicker,
    NonPositivePrice,
    OutOfRange,
    TooShort,
)

__all__ = [
    "PricePanel",
    "ReturnPanel",
    "BenchmarkWeights",
    "load_prices",
    "write_prices",
    "percent_returns",
    "slice_window",
    "load_benchmark",
    "write_benchmark",
]


def _frozen(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim == 1 and ndim == 2:
        arr = arr.reshape(-1, 1) if arr.size else arr.reshape(0, 0)
    arr.setflags(write=False)
    return arr


def _check_dates(dates: Sequence[str]) -> tuple[str, ...]:
    dates = tuple(str(d) for d in dates)
    for a, b in zip(dates, dates[1:]):
        if not a < b:
            raise ValueError(f"dates must be strictly increasing, got {a!r} then {b!r}")
    return dates


class _Panel:
    dates: tuple[str, ...]
    tickers: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.tickers)

    def index_of(self, day: str) -> int:
        """Row position of ``day``; raises OutOfRange if absent."""
        try:
            return self._positions()[str(day)]
        except KeyError:
            raise OutOfRange(f"date {day} not present in panel") from None

    def _positions(self) -> dict[str, int]:
        cache = self.__dict__.get("_pos")
        if cache is None:
            cache = {d: i for i, d in enumerate(self.dates)}
            object.__setattr__(self, "_pos", cache)
        return cache

    def _take(self, rows: slice):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class PricePanel(_Panel):
    """Aligned closing prices, one row per trading day and one column per asset."""

    dates: tuple[str, ...]
    tickers: tuple[str, ...]
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _check_dates(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        prices = _frozen(self.prices, 2)
        if len(self.dates) == 0:
            prices = prices.reshape(0, len(self.tickers))
        if prices.shape != (len(self.dates), len(self.tickers)):
            raise ValueError(
                f"prices shape {prices.shape} does not match "
                f"{len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        if not np.all(np.isfinite(prices)):
            raise NonPositivePrice("prices must be finite")
        if np.any(prices <= 0):
            raise NonPositivePrice("prices must be strictly positive")
        object.__setattr__(self, "prices", prices)

    def _take(self, rows: slice) -> "PricePanel":
        return PricePanel(self.dates[rows], self.tickers, self.prices[rows])

    def column(self, ticker: str) -> np.ndarray:
        return self.prices[:, self.tickers.index(ticker)]


@dataclass(frozen=True, eq=False)
class ReturnPanel(_Panel):
    """Percentage returns; ``returns[t, i]`` is the move into ``dates[t]``."""

    dates: tuple[str, ...]
    tickers: tuple[str, ...]
    returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _check_dates(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        rets = _frozen(self.returns, 2)
        if len(self.dates) == 0:
            rets = rets.reshape(0, len(self.tickers))
        if rets.shape != (len(self.dates), len(self.tickers)):
            raise ValueError(
                f"returns shape {rets.shape} does not match "
                f"{len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        if not np.all(np.isfinite(rets)):
            raise ValueError("returns must be finite")
        object.__setattr__(self, "returns", rets)

    def _take(self, rows: slice) -> "ReturnPanel":
        return ReturnPanel(self.dates[rows], self.tickers, self.returns[rows])

    @classmethod
    def from_array(cls, x, tickers: Sequence[str] | None = None) -> "ReturnPanel":
        """Wrap a bare ``T x M`` array with synthetic row labels."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        t, m = x.shape
        if tickers is None:
            tickers = [f"X{i + 1}" for i in range(m)]
        return cls(tuple(f"t{k:09d}" for k in range(t)), tuple(tickers), x)


Panel = TypeVar("Panel", PricePanel, ReturnPanel)


def _parse_row(row: dict, lineno: int) -> tuple[str, str, float]:
    try:
        day = _date.fromisoformat(row["date"].strip()).isoformat()
        ticker = row["ticker"].strip()
        close = float(row["close"])
    except (TypeError, ValueError, AttributeError) as exc:
        raise MalformedRow(f"line {lineno}: {exc}") from None
    if not ticker or not math.isfinite(close):
        raise MalformedRow(f"line {lineno}: empty ticker or non-finite close")
    if close <= 0:
        raise NonPositivePrice(f"line {lineno}: close {close} for {ticker} on {day}")
    return day, ticker, close


def load_prices(path: Union[str, Path], tickers: Iterable[str]) -> PricePanel:
    """Read a ``date,ticker,close`` CSV into an aligned panel.

    Only dates on which every requested ticker has a quote are kept (inner
    join); rows come back sorted by date and columns in the requested order.
    """
    tickers = tuple(tickers)
    quotes: dict[str, dict[str, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"date", "ticker", "close"} - set(reader.fieldnames or ())
        if missing:
            raise MalformedRow(f"{path}: header lacks columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            day, ticker, close = _parse_row(row, lineno)
            series = quotes.setdefault(ticker, {})
            if day in series:
                raise MalformedRow(f"line {lineno}: duplicate quote for {ticker} on {day}")
            series[day] = close

    absent = [t for t in tickers if t not in quotes]
    if absent:
        raise MissingTicker(f"{path}: tickers not found: {', '.join(absent)}")

    common = set.intersection(*(set(quotes[t]) for t in tickers)) if tickers else set()
    dates = sorted(common)
    prices = np.array([[quotes[t][d] for t in tickers] for d in dates], dtype=float)
    return PricePanel(tuple(dates), tickers, prices.reshape(len(dates), len(tickers)))


def write_prices(panel: PricePanel, path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "ticker", "close"])
        for t, day in enumerate(panel.dates):
            for i, ticker in enumerate(panel.tickers):
                w.writerow([day, ticker, repr(float(panel.prices[t, i]))])


def percent_returns(panel: PricePanel) -> ReturnPanel:
    """Simple returns in percent: ``100 * (p[t] - p[t-1]) / p[t-1]``."""
    if len(panel) < 2:
        raise TooShort(f"need at least 2 price rows, got {len(panel)}")
    p = panel.prices
    x = 100.0 * (p[1:] - p[:-1]) / p[:-1]
    return ReturnPanel(panel.dates[1:], panel.tickers, x)


def slice_window(panel: Panel, start: str, length: int) -> Panel:
    """Contiguous sub-panel of exactly ``length`` rows beginning at ``start``."""
    if length < 0:
        raise OutOfRange(f"negative window length {length}")
    i0 = panel.index_of(start)
    if i0 + length > len(panel):
        raise OutOfRange(
            f"window of {length} rows from {start} overruns panel "
            f"({len(panel) - i0} rows available)"
        )
    return panel._take(slice(i0, i0 + length))


@dataclass(frozen=True, eq=False)
class BenchmarkWeights:
    """Fixed long-only benchmark allocation (fractions summing to one)."""

    tickers: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        w = _frozen(self.weights, 1)
        if w.shape != (len(self.tickers),):
            raise InvalidWeights("one weight per ticker required")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidWeights("benchmark weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise InvalidWeights(f"benchmark weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_percent(cls, tickers: Sequence[str], percent: Sequence[float]) -> "BenchmarkWeights":
        """Build from percentage contributions, renormalizing rounding drift."""
        p = np.asarray(percent, dtype=float)
        return cls(tuple(tickers), p / p.sum())

    def aligned(self, tickers: Sequence[str]) -> np.ndarray:
        """Weights reordered to ``tickers``; every ticker must be present."""
        pos = {t: i for i, t in enumerate(self.tickers)}
        absent = [t for t in tickers if t not in pos]
        if absent:
            raise MissingTicker(f"benchmark has no weight for: {', '.join(absent)}")
        if len(tickers) != len(self.tickers):
            raise InvalidWeights("benchmark covers assets outside the panel")
        return self.weights[[pos[t] for t in tickers]]


def load_benchmark(path: Union[str, Path]) -> BenchmarkWeights:
    tickers, weights = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if set(reader.fieldnames or ()) < {"ticker", "weight"}:
            raise MalformedRow(f"{path}: header must be ticker,weight")
        for lineno, row in enumerate(reader, start=2):
            try:
                tickers.append(row["ticker"].strip())
                weights.append(float(row["weight"]))
            except (TypeError, ValueError, AttributeError) as exc:
                raise MalformedRow(f"line {lineno}: {exc}") from None
    return BenchmarkWeights(tuple(tickers), np.array(weights))


def write_benchmark(bp: BenchmarkWeights, path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", "weight"])
        for t, x in zip(bp.tickers, bp.weights):
            w.writerow([t, repr(float(x))])
