"""Multi-cumulant portfolio factorization with Hurst-exponent timing."""

__version__ = "0.1.0"

from .backtest import (
    BacktestReport,
    blend,
    portfolio_return,
    post_exit_backtest,
    run_backtest,
    window_stats,
)
from .cumulants import (
    CumulantFamily,
    SymmetricTensor,
    central_moment_tensor,
    cumulant_family,
    cumulant_tensor,
    directional_cumulant,
    normalized_cumulant_profile,
)
from .data import (
    BenchmarkWeights,
    PricePanel,
    ReturnPanel,
    load_benchmark,
    load_prices,
    percent_returns,
    slice_window,
)
from .factorization import (
    AlsConfig,
    FactorMatrix,
    als_factor,
    als_init,
    als_step,
    evd_factor,
    phi,
)
from .hurst import DfaConfig, HurstSeries, SignalConfig, dfa_fluctuation, local_hurst, signals
from .tensor_algebra import (
    core_tensor,
    frobenius_norm_sq,
    partial_contraction,
    scaled_concat,
    unfold_mode1,
)

__all__ = [
    "__version__",
    "BacktestReport",
    "blend",
    "portfolio_return",
    "post_exit_backtest",
    "run_backtest",
    "window_stats",
    "CumulantFamily",
    "SymmetricTensor",
    "central_moment_tensor",
    "cumulant_family",
    "cumulant_tensor",
    "directional_cumulant",
    "normalized_cumulant_profile",
    "BenchmarkWeights",
    "PricePanel",
    "ReturnPanel",
    "load_benchmark",
    "load_prices",
    "percent_returns",
    "slice_window",
    "AlsConfig",
    "FactorMatrix",
    "als_factor",
    "als_init",
    "als_step",
    "evd_factor",
    "phi",
    "DfaConfig",
    "HurstSeries",
    "SignalConfig",
    "dfa_fluctuation",
    "local_hurst",
    "signals",
    "core_tensor",
    "frobenius_norm_sq",
    "partial_contraction",
    "scaled_concat",
    "unfold_mode1",
]
