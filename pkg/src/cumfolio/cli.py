"""Command-line front end.

Every subcommand is driven by one YAML config file (``--config``) plus a few
flag overrides, and writes plain CSV/JSON into an output directory. Outputs
are staged in a temporary directory and only moved into place once the whole
command has succeeded.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np
import yaml

from . import __version__
from .backtest import ALL_METHODS, post_exit_backtest, run_backtest, write_report
from .cumulants import (
    cumulant_family,
    cumulant_family_upto,
    normalized_cumulant_profile,
    write_tensors,
)
from .data import (
    load_benchmark,
    load_prices,
    percent_returns,
    write_benchmark,
    write_prices,
)
from .errors import CumfolioError, InsufficientHistory
from .factorization import AlsConfig, als_factor, evd_factor, write_factor
from .hurst import (
    DfaConfig,
    Episode,
    SignalConfig,
    local_hurst,
    read_episodes,
    signals,
    write_episodes,
    write_hurst,
)
from .synth import gaussian_panel, regime_index, shock_panel, wig20_benchmark

log = logging.getLogger("cumfolio")

OUT_ENV = "CUMFOLIO_OUT"


@dataclass
class RunConfig:
    data: Optional[str] = None
    benchmark: Optional[str] = None
    tickers: list[str] = field(default_factory=list)
    index_data: Optional[str] = None
    index_ticker: str = "INDEX"
    train_len: int = 1100
    train_end: Optional[str] = None
    window_len: int = 20
    alpha: float = 7.0
    n_rear: int = 5
    methods: list[str] = field(default_factory=lambda: ["EVD", "PHI4", "PHI6"])
    nmax: int = 6
    als_max_iters: int = 100
    als_rel_tol: float = 1e-6
    obs_window: int = 500
    box_sizes: Optional[list[int]] = None
    detrend_degree: int = 1
    h_entry: float = 0.4
    h_exit: float = 0.425
    episode: str = "auto"
    post_exit_windows: int = 0
    out: Optional[str] = None
    seed: int = 0
    synth_rows: int = 2100
    synth_assets: int = 10

    @classmethod
    def load(cls, path: Optional[str]) -> "RunConfig":
        if path is None:
            return cls()
        cfg_path = Path(path)
        if not cfg_path.is_file():
            raise FileNotFoundError(f"config file not found: {cfg_path}")
        raw = yaml.safe_load(cfg_path.read_text(encoding="utf-8")) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"{cfg_path}: top level must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"{cfg_path}: unknown keys {unknown}")
        cfg = cls(**raw)
        # relative paths are relative to the config file
        base = cfg_path.resolve().parent
        for key in ("data", "benchmark", "index_data", "out"):
            value = getattr(cfg, key)
            if value is not None and not Path(value).is_absolute():
                setattr(cfg, key, str(base / value))
        return cfg

    def validate(self) -> None:
        bad = [m for m in self.methods if m not in ALL_METHODS]
        if not self.methods or bad:
            raise ValueError(f"methods must be a non-empty subset of {ALL_METHODS}, got {self.methods}")
        if self.nmax not in (4, 6):
            raise ValueError(f"nmax must be 4 or 6, got {self.nmax}")

    def require(self, *keys: str) -> None:
        for key in keys:
            value = getattr(self, key)
            if value in (None, [], ""):
                raise ValueError(f"config key `{key}` is required for this command")
            if key in ("data", "benchmark", "index_data") and not Path(value).is_file():
                raise FileNotFoundError(f"{key} file not found: {value}")

    @property
    def als(self) -> AlsConfig:
        return AlsConfig(n_max=self.nmax, max_iters=self.als_max_iters, rel_tol=self.als_rel_tol)

    @property
    def dfa(self) -> DfaConfig:
        sizes = tuple(self.box_sizes) if self.box_sizes else None
        return DfaConfig(self.obs_window, sizes, self.detrend_degree)


@contextmanager
def staged_output(out_dir: Path) -> Iterator[Path]:
    """Yield a scratch directory whose files move into ``out_dir`` on success."""
    out_dir.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir))
    try:
        yield scratch
        for item in sorted(scratch.rglob("*")):
            if item.is_file():
                target = out_dir / item.relative_to(scratch)
                target.parent.mkdir(parents=True, exist_ok=True)
                os.replace(item, target)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def _training_returns(cfg: RunConfig):
    prices = load_prices(cfg.data, cfg.tickers)
    returns = percent_returns(prices)
    end = len(returns) if cfg.train_end is None else returns.index_of(cfg.train_end) + 1
    start = end - cfg.train_len
    if start < 0:
        raise InsufficientHistory(f"only {end} returns available, train_len is {cfg.train_len}")
    return returns._take(slice(start, end))


# -- subcommands ----------------------------------------------------------------

def cmd_synth(cfg: RunConfig, out: Path) -> None:
    rng = np.random.default_rng(cfg.seed)
    n, m = cfg.synth_rows, cfg.synth_assets
    gauss = gaussian_panel(rng, n, m)
    heavy = shock_panel(rng, n, m, dates=gauss.dates)
    # one observation window of anti-persistence keeps the local H dip clear of chance dips
    lo = int(0.55 * n)
    regime = (lo, min(lo + 500, n - 1))
    index = regime_index(rng, n, regime=regime, ticker=cfg.index_ticker, dates=gauss.dates)
    index_iid = regime_index(rng, n, ar_coef=0.0, ticker=cfg.index_ticker, dates=gauss.dates)
    with staged_output(out) as tmp:
        write_prices(gauss, tmp / "prices_gaussian.csv")
        write_prices(heavy, tmp / "prices_heavy.csv")
        write_prices(index, tmp / "index.csv")
        write_prices(index_iid, tmp / "index_iid.csv")
        write_benchmark(wig20_benchmark(gauss.tickers), tmp / "benchmark.csv")
        config = {
            "data": "prices_heavy.csv",
            "benchmark": "benchmark.csv",
            "tickers": list(gauss.tickers),
            "index_data": "index.csv",
            "index_ticker": cfg.index_ticker,
            "train_len": cfg.train_len,
            "window_len": cfg.window_len,
            "alpha": cfg.alpha,
            "methods": ["EVD", "PHI4", "PHI6"],
            "nmax": 6,
            "obs_window": cfg.obs_window,
            "h_entry": cfg.h_entry,
            "h_exit": cfg.h_exit,
            "episode": "auto",
            "seed": cfg.seed,
        }
        (tmp / "config.yaml").write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")


def cmd_cumulants(cfg: RunConfig, out: Path) -> None:
    cfg.require("data", "tickers")
    train = _training_returns(cfg)
    tensors = cumulant_family_upto(train, cfg.nmax)
    with staged_output(out) as tmp:
        for t in tensors:
            write_tensors([t], tmp / f"cumulant_C{t.order}.csv")
    log.info("wrote %d cumulant tensors from %s..%s", len(tensors), train.dates[0], train.dates[-1])


def cmd_factorize(cfg: RunConfig, out: Path) -> None:
    cfg.require("data", "tickers")
    train = _training_returns(cfg)
    methods = [m for m in cfg.methods if m != "ZERO"]
    n_max = 6 if "PHI6" in methods else 4
    family = cumulant_family(train, n_max)
    traces = {}
    with staged_output(out) as tmp:
        for m in methods:
            if m == "EVD":
                fm = evd_factor(family[2])
            else:
                order = int(m[-1])
                fm, trace = als_factor(family.truncated(order), replace(cfg.als, n_max=order))
                traces[m] = {"phi": trace.phi, "factor_change": trace.factor_change,
                             "converged": trace.converged, "iterations": trace.iterations}
            write_factor(fm, tmp / f"factor_{m}.csv", train.tickers)
            profile = normalized_cumulant_profile(family, fm)
            with open(tmp / f"profile_{m}.csv", "w", encoding="utf-8") as fh:
                fh.write("portfolio,order,raw,reported\n")
                for j, n, raw, rep in profile.rows():
                    fh.write(f"{j},{n},{raw!r},{rep!r}\n")
        with open(tmp / "als_trace.json", "w", encoding="utf-8") as fh:
            json.dump(traces, fh, indent=2, sort_keys=True)
            fh.write("\n")


def cmd_hurst(cfg: RunConfig, out: Path) -> None:
    cfg.require("index_data")
    index = load_prices(cfg.index_data, [cfg.index_ticker])
    h = local_hurst(index, cfg.dfa)
    episodes = signals(h, SignalConfig(cfg.h_entry, cfg.h_exit))
    with staged_output(out) as tmp:
        write_hurst(h, tmp / "hurst.csv")
        write_episodes(episodes, tmp / "episodes.csv")
    log.info("%d episode(s) found", len(episodes))


def _pick_episode(cfg: RunConfig, out: Path, dates: Sequence[str]) -> Episode:
    if cfg.episode != "auto":
        entry, sep, exit_ = cfg.episode.partition(":")
        if not sep or not entry or not exit_:
            raise ValueError(f"--episode must be 'auto' or 'START:END', got {cfg.episode!r}")
        return Episode(entry, exit_)
    path = out / "episodes.csv"
    if not path.is_file():
        raise FileNotFoundError(f"{path} not found; run `cumfolio hurst` first or pass --episode START:END")
    pos = {d: i for i, d in enumerate(dates)}
    for ep in read_episodes(path):
        # first closed episode with a full training history before its first window
        if ep.exit is not None and ep.entry in pos and pos[ep.entry] >= cfg.train_len + 1:
            return ep
    raise InsufficientHistory(f"no episode in {path} has an exit and {cfg.train_len} days of history")


def cmd_backtest(cfg: RunConfig, out: Path) -> None:
    cfg.require("data", "benchmark", "tickers")
    prices = load_prices(cfg.data, cfg.tickers)
    bp = load_benchmark(cfg.benchmark)
    episode = _pick_episode(cfg, out, prices.dates)
    kw = dict(window_len=cfg.window_len, train_len=cfg.train_len, methods=tuple(cfg.methods),
              alpha=cfg.alpha, n_rear=cfg.n_rear, als=cfg.als)
    returns = percent_returns(prices)
    report = run_backtest(prices, bp, episode, returns=returns, **kw)
    post = None
    if cfg.post_exit_windows > 0:
        post = post_exit_backtest(prices, bp, report.windows[-1].end, cfg.post_exit_windows,
                                  returns=returns, **kw)
    with staged_output(out) as tmp:
        write_report(report, tmp)
        if post is not None:
            write_report(post, tmp, prefix="post_exit_")
    log.info("backtest: %d windows from %s to %s", len(report.windows),
             report.windows[0].start, report.windows[-1].end)


def format_report(summary: dict) -> str:
    methods = summary["methods"]
    lines = [f"windows: {summary['n_windows']}"]
    header = f"{'statistic':<10}" + "".join(f"{m:>12}" for m in methods) + f"{'BENCHMARK':>12}"
    lines.append(header)
    for stat in ("min", "max", "mean", "mode"):
        vals = summary["final_cumulative"][stat]
        row = f"{stat:<10}" + "".join(f"{vals[m]:>12.4f}" for m in methods)
        row += f"{summary['benchmark_final_cumulative']:>12.4f}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def cmd_report(cfg: RunConfig, out: Path) -> None:
    summaries = sorted(out.glob("*summary.json"))
    if not summaries:
        raise FileNotFoundError(f"no summary.json in {out}; run `cumfolio backtest` first")
    text = []
    for path in summaries:
        summary = json.loads(path.read_text(encoding="utf-8"))
        text.append(f"# {path.name}: cumulative return (%) at the last window\n")
        text.append(format_report(summary))
    body = "".join(text)
    with staged_output(out) as tmp:
        (tmp / "report.txt").write_text(body, encoding="utf-8")
    sys.stdout.write(body)


COMMANDS = {
    "synth": cmd_synth,
    "cumulants": cmd_cumulants,
    "factorize": cmd_factorize,
    "hurst": cmd_hurst,
    "backtest": cmd_backtest,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--out", metavar="DIR", help=f"output directory (fallback: ${OUT_ENV})")
    common.add_argument("--nmax", type=int, choices=(4, 6), help="highest cumulant order")
    common.add_argument("--episode", help="'auto' (read episodes.csv) or START:END dates")
    common.add_argument("--seed", type=int, help="seed for synthetic data")
    common.add_argument("--threads", type=int, metavar="N", help="cap on BLAS/OpenMP threads")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="cumfolio",
        description="Multi-cumulant portfolio factorization, Hurst signals and window backtests.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synth": "write seeded synthetic price/index/benchmark fixtures",
        "cumulants": "dump cumulant tensors C2..Cn of the training slice",
        "factorize": "factor matrices (EVD, PHI4, PHI6) of the training slice",
        "hurst": "local Hurst exponent of the index and entry/exit episodes",
        "backtest": "window-by-window backtest against the benchmark",
        "report": "summarize backtest outputs",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _resolve(args: argparse.Namespace) -> tuple[RunConfig, Path]:
    cfg = RunConfig.load(args.config)
    overrides = {"nmax": args.nmax, "episode": args.episode, "seed": args.seed}
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    cfg.validate()
    out = args.out or cfg.out or os.environ.get(OUT_ENV) or "cumfolio_out"
    return cfg, Path(out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, out = _resolve(args)
        if args.threads:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=args.threads):
                COMMANDS[args.command](cfg, out)
        else:
            COMMANDS[args.command](cfg, out)
    except (CumfolioError, OSError, ValueError, yaml.YAMLError) as exc:
        print(f"cumfolio {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
