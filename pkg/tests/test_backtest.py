import json

import numpy as np
import pytest

from conftest import WSE_HOLIDAYS
from cumfolio.backtest import (
    BacktestReport,
    TestPortfolio,
    blend,
    cumulative,
    portfolio_return,
    post_exit_backtest,
    run_backtest,
    schedule_windows,
    window_stats,
    write_report,
)
from cumfolio.data import BenchmarkWeights, PricePanel
from cumfolio.errors import DegenerateDenominator, DimMismatch, InsufficientHistory, WindowTooShort
from cumfolio.factorization import FactorMatrix
from cumfolio.hurst import Episode
from cumfolio.synth import business_days, gaussian_panel, shock_panel, wig20_benchmark

ENTRY, EXIT = "2014-12-19", "2015-09-10"
IN_EPISODE = ["2014-12-22", "2015-01-27", "2015-02-24", "2015-03-24", "2015-04-23",
              "2015-05-22", "2015-06-22", "2015-07-20", "2015-08-17", "2015-09-14"]
POST_EXIT = ["2015-09-14", "2015-10-12", "2015-11-09", "2015-12-08", "2016-01-12", "2016-02-09"]


@pytest.fixture(scope="module")
def wse_prices():
    dates = business_days(1600, start="2010-01-04", holidays=WSE_HOLIDAYS)
    return shock_panel(np.random.default_rng(5), len(dates), 6, dates=dates)


def _bp(prices):
    return BenchmarkWeights.from_percent(prices.tickers, np.arange(1.0, prices.n_assets + 1))


def test_blend_zero_reproduces_benchmark():
    bp = wig20_benchmark(["PKOBP", "PZU", "PEKAO", "PKNORLEN", "PGE", "KGHM"])
    for tp in blend(FactorMatrix.zero(6), bp):
        assert np.array_equal(tp.weights, bp.weights)


def test_blend_hand_example():
    V = np.array([[0.0, 0.6], [0.0, -0.4]])
    tps = blend(V, np.array([0.5, 0.5]), alpha=1.0)
    np.testing.assert_allclose(tps[-1].weights, [1.1 / 1.2, 0.1 / 1.2], rtol=1e-12)
    assert tps[-1].column == 2


def test_blend_large_alpha_limit(rng):
    V = np.linalg.qr(rng.standard_normal((4, 4)))[0]
    bp = np.array([0.1, 0.2, 0.3, 0.4])
    for tp in blend(V, bp, alpha=1e12):
        np.testing.assert_allclose(tp.weights, bp, atol=1e-10)
    for tp in blend(V, bp, alpha=np.inf):
        assert np.array_equal(tp.weights, bp)


def test_blend_rear_columns_and_closure(rng):
    V = FactorMatrix(np.linalg.qr(rng.standard_normal((10, 10)))[0], "EVD")
    tps = blend(V, np.full(10, 0.1), alpha=7.0)
    assert [tp.column for tp in tps] == [6, 7, 8, 9, 10]
    assert all(tp.method == "EVD" for tp in tps)
    for tp in tps:
        assert abs(tp.weights.sum() - 1.0) <= 1e-9


def test_blend_errors():
    with pytest.raises(DegenerateDenominator):
        blend(np.array([[0.0, -1.0], [0.0, 0.0]]), np.array([0.5, 0.5]), alpha=1.0)
    with pytest.raises(DimMismatch):
        blend(np.eye(3), np.array([0.5, 0.5]))


def test_portfolio_return_examples():
    tp = TestPortfolio("X", 1, np.full(5, 0.2))
    flat = np.full((21, 5), 40.0)
    assert portfolio_return(tp, flat, 20) == 0.0
    doubled = flat.copy()
    doubled[-1] *= 2
    assert portfolio_return(tp, doubled, 20) == pytest.approx(100.0)
    one = flat.copy()
    one[-1, 2] *= 1.1
    assert portfolio_return(tp, one, 20) == pytest.approx(2.0)
    with pytest.raises(WindowTooShort):
        portfolio_return(tp, flat[:20], 20)


def test_window_stats_examples():
    s = window_stats([1.5] * 5)
    assert (s.min, s.max, s.mean, s.mode) == (1.5, 1.5, 1.5, 1.5)
    s = window_stats([1, 2, 3, 4, 5])
    assert (s.min, s.max, s.mean) == (1.0, 5.0, 3.0)
    assert abs(s.mode - 3.0) < 0.01
    s = window_stats([0, 0, 0, 0, 10])
    assert s.mean == 2.0
    assert abs(s.mode) < 0.5


def test_window_stats_order(rng):
    for _ in range(50):
        s = window_stats(rng.standard_normal(5) * 10)
        assert s.min <= s.mean <= s.max
        assert s.min <= s.mode <= s.max


def test_cumulative_examples():
    assert cumulative([5.0]) == [5.0]
    np.testing.assert_allclose(cumulative([10.0, -10.0]), [10.0, -1.0])
    assert cumulative([]) == []


def test_schedule_wse_calendar(wse_prices):
    dates = wse_prices.dates
    spans = schedule_windows(dates, dates.index(ENTRY) + 1, 20, until=EXIT)
    assert len(spans) == 9
    assert [dates[a] for a, _ in spans] + [dates[spans[-1][1]]] == IN_EPISODE
    assert all(b - a == 20 for a, b in spans)
    post = schedule_windows(dates, dates.index(POST_EXIT[0]), 20, n_windows=5)
    assert [dates[a] for a, _ in post] + [dates[post[-1][1]]] == POST_EXIT


def test_schedule_exit_on_boundary_closes_there():
    dates = business_days(200)
    spans = schedule_windows(dates, 10, 20, until=dates[50])
    assert spans == [(10, 30), (30, 50)]


def test_schedule_insufficient_future():
    with pytest.raises(InsufficientHistory):
        schedule_windows(business_days(50), 10, 20, n_windows=3)


def test_run_backtest_wse(wse_prices):
    report = run_backtest(wse_prices, _bp(wse_prices), Episode(ENTRY, EXIT),
                          train_len=1100, methods=("EVD", "ZERO"))
    assert len(report.windows) == 9
    assert [w.start for w in report.windows] == IN_EPISODE[:-1]
    assert report.windows[-1].end == IN_EPISODE[-1]
    for stat in ("min", "max", "mean", "mode"):
        assert len(report.cumulative[stat]["EVD"]) == 9
    for w in report.windows:
        assert len(w.returns["EVD"]) == 5
        assert w.stats["EVD"].min <= w.stats["EVD"].mean <= w.stats["EVD"].max
        zero = w.stats["ZERO"]
        assert zero.min == zero.max == zero.mean == zero.mode == w.benchmark
    assert report.cumulative["mean"]["ZERO"] == report.benchmark_cumulative


def test_training_slice_excludes_window(wse_prices):
    # moving prices inside or after the window must not change its factor matrix
    report = run_backtest(wse_prices, _bp(wse_prices), (ENTRY, "2015-01-05"),
                          train_len=300, methods=("EVD",))
    bumped = wse_prices.prices.copy()
    i0 = wse_prices.index_of("2014-12-22")
    bumped[i0 + 1:] *= np.linspace(1.0, 1.5, len(bumped) - i0 - 1)[:, None]
    other = PricePanel(wse_prices.dates, wse_prices.tickers, bumped)
    again = run_backtest(other, _bp(other), (ENTRY, "2015-01-05"), train_len=300, methods=("EVD",))
    assert np.array_equal(report.windows[0].factors["EVD"].matrix, again.windows[0].factors["EVD"].matrix)


def test_insufficient_training_history(wse_prices):
    with pytest.raises(InsufficientHistory):
        run_backtest(wse_prices, _bp(wse_prices), (wse_prices.dates[100], wse_prices.dates[130]),
                     train_len=1100, methods=("EVD",))


def test_post_exit(wse_prices):
    bp = _bp(wse_prices)
    report = post_exit_backtest(wse_prices, bp, POST_EXIT[0], 5, train_len=500, methods=("EVD",))
    assert [w.start for w in report.windows] == POST_EXIT[:-1]
    empty = post_exit_backtest(wse_prices, bp, POST_EXIT[0], 0, train_len=500, methods=("EVD",))
    assert isinstance(empty, BacktestReport) and empty.windows == []
    with pytest.raises(InsufficientHistory):
        post_exit_backtest(wse_prices, bp, wse_prices.dates[-30], 2, train_len=500)


def test_phi_methods_and_determinism(tmp_path):
    prices = gaussian_panel(np.random.default_rng(8), 400, 5)
    bp = _bp(prices)
    ep = (prices.dates[320], prices.dates[350])
    runs = []
    for k in range(2):
        rep = run_backtest(prices, bp, ep, train_len=300, methods=("PHI4", "PHI6", "ZERO"))
        out = tmp_path / f"run{k}"
        write_report(rep, out)
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert runs[0] == runs[1]
    assert set(runs[0]) == {"stat_min.csv", "stat_max.csv", "stat_mean.csv", "stat_mode.csv",
                            "portfolio_returns.csv", "summary.json"}
    assert rep.windows[0].traces["PHI6"].converged
    summary = json.loads(runs[0]["summary.json"])
    assert summary["config"]["train_len"] == 300


def test_report_csv_layout(tmp_path):
    prices = gaussian_panel(np.random.default_rng(9), 300, 5)
    rep = run_backtest(prices, _bp(prices), (prices.dates[220], prices.dates[260]),
                       train_len=200, methods=("EVD",))
    write_report(rep, tmp_path, prefix="p_")
    lines = (tmp_path / "p_stat_mean.csv").read_text().splitlines()
    assert lines[0] == "window,start,end,method,value,cumulative"
    methods = [ln.split(",")[3] for ln in lines[1:]]
    assert methods == ["EVD", "BENCHMARK"] * len(rep.windows)
