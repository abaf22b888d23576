"""Local Hurst exponent by detrended fluctuation analysis, plus entry/exit signals.

For every date with a full trailing observation window the log-returns of
that window are integrated into a profile, the profile is cut into boxes of
length ``s`` (counted from both ends), a polynomial trend is removed inside
each box, and ``H`` is the log-log slope of the RMS residual ``F(s)`` against
``s``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import BoxTooLarge, TooShort

__all__ = [
    "DfaConfig",
    "SignalConfig",
    "HurstSeries",
    "Episode",
    "default_box_sizes",
    "dfa_fluctuation",
    "local_hurst",
    "signals",
    "write_hurst",
    "write_episodes",
    "read_episodes",
]


def default_box_sizes(obs_window: int, count: int = 20, smallest: int = 10) -> tuple[int, ...]:
    """About ``count`` log-spaced integer box sizes in ``[smallest, obs_window // 4]``."""
    largest = obs_window // 4
    if largest < smallest:
        raise ValueError(f"observation window {obs_window} too short for boxes >= {smallest}")
    sizes = np.unique(np.round(np.geomspace(smallest, largest, count)).astype(int))
    return tuple(int(s) for s in sizes)


@dataclass(frozen=True)
class DfaConfig:
    obs_window: int = 500
    box_sizes: Optional[tuple[int, ...]] = None
    detrend_degree: int = 1

    def __post_init__(self):
        if self.box_sizes is None:
            object.__setattr__(self, "box_sizes", default_box_sizes(self.obs_window))
        sizes = tuple(sorted(int(s) for s in self.box_sizes))
        object.__setattr__(self, "box_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("at least two box sizes are needed for a slope")
        if sizes[0] < self.detrend_degree + 2:
            raise ValueError(
                f"smallest box {sizes[0]} must exceed detrend degree + 1 ({self.detrend_degree + 1})"
            )
        if sizes[-1] > self.obs_window // 4:
            raise ValueError(f"largest box {sizes[-1]} exceeds obs_window/4 = {self.obs_window // 4}")


@dataclass(frozen=True)
class SignalConfig:
    h_entry: float = 0.4
    h_exit: float = 0.425

    def __post_init__(self):
        if self.h_exit < self.h_entry:
            raise ValueError("h_exit must not be below h_entry")


@dataclass(frozen=True, eq=False)
class HurstSeries:
    dates: tuple[str, ...]
    h_values: np.ndarray
    fit_r2: np.ndarray


@dataclass(frozen=True)
class Episode:
    entry: str
    exit: Optional[str]


@lru_cache(maxsize=None)
def _detrend_basis(s: int, degree: int) -> np.ndarray:
    # orthonormal basis of polynomials of degree <= `degree` sampled on s points
    grid = np.linspace(-1.0, 1.0, s)
    vander = np.vander(grid, degree + 1, increasing=True)
    q, _ = np.linalg.qr(vander)
    q.setflags(write=False)
    return q


def _fluctuations(profiles: np.ndarray, sizes: Sequence[int], degree: int) -> np.ndarray:
    """F(s) for each row of ``profiles`` (shape ``(n_series, length)``) and each size."""
    n = profiles.shape[1]
    out = np.empty((profiles.shape[0], len(sizes)))
    for k, s in enumerate(sizes):
        nb = n // s
        q = _detrend_basis(s, degree)
        head = profiles[:, : nb * s].reshape(profiles.shape[0], nb, s)
        tail = profiles[:, n - nb * s:].reshape(profiles.shape[0], nb, s)
        boxes = np.concatenate([head, tail], axis=1)
        # residual of a least-squares fit = total energy minus projected energy
        resid = np.einsum("abs,abs->ab", boxes, boxes) - np.square(boxes @ q).sum(axis=2)
        out[:, k] = np.sqrt(np.maximum(resid, 0.0).sum(axis=1) / (s * 2 * nb))
    return out


def _profile(series: np.ndarray) -> np.ndarray:
    return np.cumsum(series - series.mean(axis=-1, keepdims=True), axis=-1)


def dfa_fluctuation(series, s: int, degree: int = 1) -> float:
    """Detrended fluctuation ``F(s)`` of one series."""
    x = np.asarray(series, dtype=float).reshape(-1)
    if s < degree + 2:
        raise ValueError(f"box size {s} too small for degree-{degree} detrending")
    if len(x) < 2 * s:
        raise BoxTooLarge(f"series of length {len(x)} cannot hold two boxes of size {s}")
    return float(_fluctuations(_profile(x)[None, :], [s], degree)[0, 0])


def _loglog_fit(log_s: np.ndarray, log_f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xs = log_s - log_s.mean()
    yc = log_f - log_f.mean(axis=1, keepdims=True)
    sxx = np.sum(xs ** 2)
    slope = (yc @ xs) / sxx
    ss_tot = np.sum(yc ** 2, axis=1)
    ss_res = np.sum((yc - slope[:, None] * xs) ** 2, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = np.where(ss_tot > 0, 1.0 - ss_res / ss_tot, np.nan)
    return slope, r2


def local_hurst(index_prices, cfg: DfaConfig | None = None, dates: Sequence[str] | None = None) -> HurstSeries:
    """Hurst exponent on each date that closes a full ``obs_window`` of prices.

    ``index_prices`` is a positive price series (or a one-column PricePanel,
    whose dates are then used). The value at date ``t`` uses the prices
    ``t - obs_window + 1 .. t``.
    """
    cfg = cfg or DfaConfig()
    if hasattr(index_prices, "prices"):
        if dates is None:
            dates = index_prices.dates
        index_prices = index_prices.prices[:, 0]
    p = np.asarray(index_prices, dtype=float).reshape(-1)
    if dates is None:
        dates = tuple(str(i) for i in range(len(p)))
    if len(p) < cfg.obs_window:
        raise TooShort(f"series of {len(p)} prices is shorter than obs_window={cfg.obs_window}")
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise ValueError("index prices must be finite and positive")

    log_ret = np.diff(np.log(p))
    windows = sliding_window_view(log_ret, cfg.obs_window - 1)
    profiles = _profile(windows)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_f = np.log(_fluctuations(profiles, cfg.box_sizes, cfg.detrend_degree))
        h, r2 = _loglog_fit(np.log(np.asarray(cfg.box_sizes, dtype=float)), log_f)
    h = np.where(np.isfinite(h), h, np.nan)
    return HurstSeries(tuple(dates[cfg.obs_window - 1:]), h, r2)


def signals(h: HurstSeries, cfg: SignalConfig | None = None) -> list[Episode]:
    """Hysteresis episodes: enter when ``H < h_entry``, leave when later ``H > h_exit``.

    An episode still open at the end of the series has ``exit=None``.
    """
    cfg = cfg or SignalConfig()
    episodes: list[Episode] = []
    entry: Optional[str] = None
    for day, value in zip(h.dates, np.asarray(h.h_values, dtype=float)):
        if np.isnan(value):
            continue
        if entry is None:
            if value < cfg.h_entry:
                entry = day
        elif value > cfg.h_exit:
            episodes.append(Episode(entry, day))
            entry = None
    if entry is not None:
        episodes.append(Episode(entry, None))
    return episodes


def write_hurst(h: HurstSeries, path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "h", "fit_r2"])
        for d, hv, r2 in zip(h.dates, h.h_values, h.fit_r2):
            w.writerow([d, repr(float(hv)), repr(float(r2))])


def write_episodes(episodes: Sequence[Episode], path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["entry_date", "exit_date"])
        for ep in episodes:
            w.writerow([ep.entry, ep.exit or ""])


def read_episodes(path: Union[str, Path]) -> list[Episode]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [Episode(r["entry_date"], r["exit_date"] or None) for r in csv.DictReader(fh)]
