"""Unfoldings, multilinear contractions and norms used by the factorization."""
from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from .cumulants import SymmetricTensor
from .errors import DimMismatch, RowMismatch

__all__ = [
    "unfold_mode1",
    "mode_product",
    "core_tensor",
    "partial_contraction",
    "frobenius_norm_sq",
    "scaled_concat",
]

TensorLike = Union[SymmetricTensor, np.ndarray]


def _dense(tensor: TensorLike) -> np.ndarray:
    if isinstance(tensor, SymmetricTensor):
        return tensor.to_dense()
    return np.asarray(tensor, dtype=float)


def _factor(V, dim: int) -> np.ndarray:
    V = np.asarray(getattr(V, "matrix", V), dtype=float)
    if V.ndim != 2 or V.shape[0] != dim:
        raise DimMismatch(f"factor matrix of shape {V.shape} does not fit tensor dim {dim}")
    return V


def unfold_mode1(tensor: TensorLike) -> np.ndarray:
    """Mode-1 unfolding, ``M x M**(n-1)``.

    Entry ``(j1, j2..jn)`` lands in column ``sum_k j_k * M**(k-2)``, i.e. the
    first trailing index runs fastest.
    """
    dense = _dense(tensor)
    if dense.ndim < 2:
        raise ValueError("unfolding needs a tensor of order >= 2")
    return dense.reshape(dense.shape[0], -1, order="F")


def mode_product(dense: np.ndarray, V: np.ndarray, mode: int) -> np.ndarray:
    """``out[.., l, ..] = sum_j dense[.., j, ..] * V[j, l]`` along ``mode``."""
    moved = np.moveaxis(dense, mode, -1) @ V
    return np.moveaxis(moved, -1, mode)


def core_tensor(tensor: SymmetricTensor, V) -> SymmetricTensor:
    """Transform ``tensor`` by ``V`` in every mode; the result stays symmetric."""
    V = _factor(V, tensor.dim)
    if V.shape[1] != tensor.dim:
        raise DimMismatch("core tensor needs a square factor matrix")
    dense = tensor.to_dense()
    # each pass contracts the last axis and prepends the new one, so after
    # n passes every mode has been transformed exactly once
    for _ in range(tensor.order):
        dense = np.moveaxis(dense @ V, -1, 0)
    return SymmetricTensor.from_dense(dense)


def partial_contraction(tensor: TensorLike, V) -> np.ndarray:
    """Transform modes 2..n by ``V`` and leave mode 1 alone (dense result)."""
    dense = _dense(tensor)
    V = _factor(V, dense.shape[0])
    for mode in range(1, dense.ndim):
        dense = mode_product(dense, V, mode)
    return dense


def frobenius_norm_sq(tensor: TensorLike) -> float:
    """Sum of squares over all ``M**n`` positions of the materialized tensor."""
    if isinstance(tensor, SymmetricTensor):
        return float(np.sum(tensor.multiplicities() * tensor.values ** 2))
    return float(np.sum(np.square(np.asarray(tensor, dtype=float))))


def scaled_concat(matrices: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    """``[w1 * A1, w2 * A2, ...]`` side by side."""
    if len(matrices) != len(weights):
        raise ValueError(f"{len(matrices)} matrices but {len(weights)} weights")
    mats = [np.asarray(m, dtype=float) for m in matrices]
    rows = {m.shape[0] for m in mats}
    if len(rows) > 1:
        raise RowMismatch(f"row counts differ: {sorted(rows)}")
    return np.hstack([w * m for w, m in zip(weights, mats)])
