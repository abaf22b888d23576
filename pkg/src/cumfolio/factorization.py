"""Factor matrices from covariance EVD and from the multi-cumulant ALS iteration.

Columns of a factor matrix are orthonormal weight vectors (portfolios). The
front columns carry most of the cumulant mass; the rear columns are the
low-variability candidates used for investment.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .cumulants import CumulantFamily, SymmetricTensor
from .errors import DimMismatch, NotFinite
from .tensor_algebra import (
    core_tensor,
    frobenius_norm_sq,
    partial_contraction,
    scaled_concat,
    unfold_mode1,
)

__all__ = [
    "METHODS",
    "FactorMatrix",
    "AlsConfig",
    "AlsTrace",
    "apply_sign_convention",
    "evd_factor",
    "phi",
    "als_init",
    "als_step",
    "als_factor",
    "write_factor",
    "read_factor",
]

METHODS = ("EVD", "PHI4", "PHI6")


def apply_sign_convention(V: np.ndarray) -> np.ndarray:
    """Flip columns so the entry of largest magnitude in each is positive."""
    V = np.array(V, dtype=float, copy=True)
    if V.size == 0:
        return V
    pivot = np.abs(V).argmax(axis=0)
    signs = np.sign(V[pivot, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


@dataclass(frozen=True, eq=False)
class FactorMatrix:
    """Orthonormal ``M x M`` factor matrix tagged with the method that built it."""

    matrix: np.ndarray
    method: str
    column_scores: Optional[np.ndarray] = None

    def __post_init__(self):
        V = np.array(self.matrix, dtype=float, copy=True)
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise DimMismatch(f"factor matrix must be square, got {V.shape}")
        V.setflags(write=False)
        object.__setattr__(self, "matrix", V)
        if self.column_scores is not None:
            s = np.array(self.column_scores, dtype=float, copy=True)
            s.setflags(write=False)
            object.__setattr__(self, "column_scores", s)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def rear(self, k: int) -> np.ndarray:
        """The last ``k`` columns, in their original order."""
        return self.matrix[:, self.dim - k:]

    def orthonormality_error(self) -> float:
        V = self.matrix
        return float(np.abs(V.T @ V - np.eye(self.dim)).max())

    @classmethod
    def identity(cls, dim: int, method: str = "IDENTITY") -> "FactorMatrix":
        return cls(np.eye(dim), method)

    @classmethod
    def zero(cls, dim: int) -> "FactorMatrix":
        """All-zero 'factor' that makes blended portfolios equal the benchmark."""
        return cls(np.zeros((dim, dim)), "ZERO")


@dataclass(frozen=True)
class AlsConfig:
    n_max: int = 6
    max_iters: int = 100
    rel_tol: float = 1e-6

    def __post_init__(self):
        if self.n_max not in (4, 6):
            raise ValueError(f"n_max must be 4 or 6, got {self.n_max}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")

    @property
    def factorial_weights(self) -> tuple[float, ...]:
        return tuple(1.0 / math.factorial(i) for i in range(2, self.n_max + 1))


@dataclass
class AlsTrace:
    """Per-iteration record of an ALS run.

    ``phi[0]`` is the objective at the initial factor matrix; ``factor_change[k]``
    is the largest absolute entry change between iterates ``k`` and ``k+1``.
    """

    phi: list[float] = field(default_factory=list)
    factor_change: list[float] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.iterates) - 1

    @property
    def hit_max_iters(self) -> bool:
        return not self.converged


def _as_matrix2(C2) -> np.ndarray:
    if isinstance(C2, SymmetricTensor):
        if C2.order != 2:
            raise DimMismatch(f"expected an order-2 tensor, got order {C2.order}")
        return C2.to_dense()
    return np.asarray(C2, dtype=float)


def evd_factor(C2) -> FactorMatrix:
    """Eigenvectors of the covariance, eigenvalues in descending order."""
    C = _as_matrix2(C2)
    if not np.all(np.isfinite(C)):
        raise NotFinite("covariance contains non-finite entries")
    C = 0.5 * (C + C.T)
    w, U = np.linalg.eigh(C)
    order = np.argsort(-w, kind="stable")
    return FactorMatrix(apply_sign_convention(U[:, order]), "EVD", w[order])


def phi(family: CumulantFamily, V) -> float:
    """``sum_i ||core_tensor(C_i, V)||^2 / i!`` over the orders in the family."""
    V = np.asarray(getattr(V, "matrix", V), dtype=float)
    if V.shape[0] != family.dim:
        raise DimMismatch(f"factor matrix has {V.shape[0]} rows, family dim is {family.dim}")
    return float(sum(
        frobenius_norm_sq(core_tensor(C, V)) / math.factorial(C.order)
        for C in family.tensors
    ))


def _method_tag(n_max: int) -> str:
    return f"PHI{n_max}"


def _left_singular(blocks: Sequence[np.ndarray], orders: Sequence[int], tag: str) -> FactorMatrix:
    A = scaled_concat(blocks, [1.0 / math.factorial(n) for n in orders])
    if not np.all(np.isfinite(A)):
        raise NotFinite("non-finite entries in the unfolded cumulants")
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    return FactorMatrix(apply_sign_convention(U), tag, s)


def als_init(family: CumulantFamily) -> FactorMatrix:
    """Left singular vectors of ``[C2/2!, C3_(1)/3!, ..., Cn_(1)/n!]``."""
    blocks = [unfold_mode1(C) for C in family.tensors]
    return _left_singular(blocks, [C.order for C in family.tensors], _method_tag(family.n_max))


def als_step(family: CumulantFamily, V_prev) -> FactorMatrix:
    """One ALS update: contract modes 2..n with ``V_prev``, then re-take left singular vectors."""
    V = np.asarray(getattr(V_prev, "matrix", V_prev), dtype=float)
    if V.shape[0] != family.dim:
        raise DimMismatch(f"factor matrix has {V.shape[0]} rows, family dim is {family.dim}")
    blocks = [unfold_mode1(partial_contraction(C, V)) for C in family.tensors]
    return _left_singular(blocks, [C.order for C in family.tensors], _method_tag(family.n_max))


def als_factor(family: CumulantFamily, cfg: AlsConfig | None = None) -> tuple[FactorMatrix, AlsTrace]:
    """Iterate :func:`als_step` from :func:`als_init` until ``phi`` settles.

    Stops when ``|phi_k - phi_{k-1}| <= rel_tol * max(|phi_{k-1}|, 1)`` or after
    ``max_iters`` steps. Reaching ``max_iters`` is not an error; the trace
    reports ``converged=False``.
    """
    cfg = cfg or AlsConfig(n_max=family.n_max)
    if cfg.n_max != family.n_max:
        family = family.truncated(cfg.n_max)
    V = als_init(family)
    trace = AlsTrace(phi=[phi(family, V)], iterates=[V.matrix])
    if math.isinf(cfg.rel_tol):
        trace.converged = True
        return V, trace
    for _ in range(cfg.max_iters):
        V_new = als_step(family, V)
        value = phi(family, V_new)
        prev = trace.phi[-1]
        trace.phi.append(value)
        trace.factor_change.append(float(np.abs(V_new.matrix - V.matrix).max()))
        trace.iterates.append(V_new.matrix)
        V = V_new
        if abs(value - prev) <= cfg.rel_tol * max(abs(prev), 1.0):
            trace.converged = True
            break
    return V, trace


def write_factor(fm: FactorMatrix, path: Union[str, Path], tickers: Sequence[str] | None = None) -> None:
    """CSV: header ``method,score1..scoreM`` then one ``ticker,v1..vM`` row per asset."""
    m = fm.dim
    tickers = list(tickers) if tickers is not None else [f"X{i + 1}" for i in range(m)]
    scores = [""] * m if fm.column_scores is None else [repr(float(s)) for s in fm.column_scores]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([fm.method, *scores])
        for t, row in zip(tickers, fm.matrix):
            w.writerow([t, *(repr(float(v)) for v in row)])


def read_factor(path: Union[str, Path]) -> tuple[FactorMatrix, list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    method, *scores = rows[0]
    tickers = [r[0] for r in rows[1:]]
    V = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    col = None if all(s == "" for s in scores) else np.array([float(s) for s in scores])
    if method == "ZERO":
        return FactorMatrix.zero(V.shape[0]), tickers
    return FactorMatrix(V, method, col), tickers
