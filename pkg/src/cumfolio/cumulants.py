"""Sample cumulant tensors of orders 2 to 6.

Every estimator here uses the biased ``1/T`` normalization, including the
covariance. With that choice each tensor is exactly the order-n derivative of
the empirical log moment-generating function at zero, which is what the
higher orders require anyway; for ``T = 1100`` the difference from the
``1/(T-1)`` covariance is below 0.1%.

Cumulants are assembled from central moments with the set-partition
(moment-to-cumulant) formula. On centered data every partition containing a
singleton block vanishes, so only partitions into blocks of size >= 2 are
summed.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement, permutations
from pathlib import Path
from typing import Iterator, Sequence, Union

import numpy as np

from .data import ReturnPanel
from .errors import DimMismatch, TooShort, UnsupportedOrder, ZeroVariance

__all__ = [
    "MAX_ORDER",
    "SymmetricTensor",
    "CumulantFamily",
    "CumulantProfile",
    "central_moment_tensor",
    "cumulant_tensor",
    "cumulant_family",
    "directional_cumulant",
    "normalized_cumulant_profile",
    "contract_all_modes",
    "write_tensors",
    "read_tensors",
]

MAX_ORDER = 6


# -- compact symmetric storage ------------------------------------------------

@lru_cache(maxsize=None)
def multi_indices(dim: int, order: int) -> np.ndarray:
    """All sorted multi-indices ``i1 <= ... <= in`` in lexicographic order."""
    keys = np.array(list(combinations_with_replacement(range(dim), order)), dtype=np.intp)
    keys = keys.reshape(-1, order)
    keys.setflags(write=False)
    return keys


@lru_cache(maxsize=None)
def _binomials(n: int) -> np.ndarray:
    table = np.zeros((n + 1, n + 1), dtype=np.int64)
    for a in range(n + 1):
        for b in range(a + 1):
            table[a, b] = math.comb(a, b)
    return table


def _colex_rank(sorted_idx: np.ndarray, dim: int) -> np.ndarray:
    # a non-decreasing tuple i_k maps to the strictly increasing c_k = i_k + k,
    # which the combinatorial number system ranks densely
    order = sorted_idx.shape[-1]
    binom = _binomials(dim + order)
    ranks = np.zeros(sorted_idx.shape[:-1], dtype=np.int64)
    for k in range(order):
        ranks += binom[sorted_idx[..., k] + k, k + 1]
    return ranks


@lru_cache(maxsize=None)
def _rank_to_position(dim: int, order: int) -> np.ndarray:
    keys = multi_indices(dim, order)
    lookup = np.empty(len(keys), dtype=np.intp)
    lookup[_colex_rank(keys, dim)] = np.arange(len(keys))
    lookup.setflags(write=False)
    return lookup


def storage_position(idx, dim: int) -> np.ndarray:
    """Position in compact storage of arbitrary (unsorted) multi-indices.

    ``idx`` has the index tuple along its last axis.
    """
    idx = np.sort(np.asarray(idx, dtype=np.intp), axis=-1)
    order = idx.shape[-1]
    return _rank_to_position(dim, order)[_colex_rank(idx, dim)]


@dataclass(frozen=True, eq=False)
class SymmetricTensor:
    """Order-n symmetric tensor over ``dim`` variables, distinct entries only.

    ``values[k]`` belongs to the sorted multi-index ``multi_indices(dim, order)[k]``.
    """

    order: int
    dim: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True).reshape(-1)
        expected = math.comb(self.dim + self.order - 1, self.order)
        if vals.size != expected:
            raise ValueError(
                f"order-{self.order} tensor over {self.dim} variables needs "
                f"{expected} entries, got {vals.size}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def keys(self) -> np.ndarray:
        return multi_indices(self.dim, self.order)

    @property
    def entries(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(i) for i in k): float(v) for k, v in zip(self.keys, self.values)}

    def __getitem__(self, idx) -> float:
        idx = tuple(idx)
        if len(idx) != self.order:
            raise IndexError(f"expected {self.order} indices, got {len(idx)}")
        if any(i < 0 or i >= self.dim for i in idx):
            raise IndexError(f"index {idx} out of range for dim {self.dim}")
        return float(self.values[storage_position(idx, self.dim)])

    def multiplicities(self) -> np.ndarray:
        """Number of full-array positions sharing each stored entry."""
        n = self.order
        counts = np.full(len(self.keys), math.factorial(n), dtype=np.int64)
        for v in range(self.dim):
            c = (self.keys == v).sum(axis=1)
            counts //= np.array([math.factorial(int(x)) for x in c], dtype=np.int64)
        return counts

    def to_dense(self) -> np.ndarray:
        shape = (self.dim,) * self.order
        grid = np.indices(shape, dtype=np.intp).reshape(self.order, -1).T
        return self.values[storage_position(grid, self.dim)].reshape(shape)

    @classmethod
    def from_dense(cls, arr, *, check: bool = False, atol: float = 0.0) -> "SymmetricTensor":
        """Compact an n-way array; with ``check`` verify it is symmetric."""
        arr = np.asarray(arr, dtype=float)
        order, dim = arr.ndim, arr.shape[0]
        if any(s != dim for s in arr.shape):
            raise DimMismatch(f"non-cubical array of shape {arr.shape}")
        if check:
            for perm in set(permutations(range(order))):
                if not np.allclose(arr, arr.transpose(perm), rtol=0.0, atol=atol):
                    raise ValueError("array is not symmetric")
        keys = multi_indices(dim, order)
        return cls(order, dim, arr[tuple(keys.T)])

    @classmethod
    def zeros(cls, order: int, dim: int) -> "SymmetricTensor":
        return cls(order, dim, np.zeros(math.comb(dim + order - 1, order)))


@dataclass(frozen=True, eq=False)
class CumulantFamily:
    """Consecutive cumulant tensors ``C2 .. C_nmax`` of one sample."""

    tensors: tuple[SymmetricTensor, ...]
    n_max: int
    dim: int
    sample_size: int

    def __post_init__(self):
        tensors = tuple(self.tensors)
        object.__setattr__(self, "tensors", tensors)
        if [t.order for t in tensors] != list(range(2, self.n_max + 1)):
            raise ValueError("family must hold orders 2..n_max consecutively")
        if any(t.dim != self.dim for t in tensors):
            raise DimMismatch("all tensors in a family share one dimension")

    def __getitem__(self, order: int) -> SymmetricTensor:
        return self.tensors[order - 2]

    def truncated(self, n_max: int) -> "CumulantFamily":
        return CumulantFamily(self.tensors[: n_max - 1], n_max, self.dim, self.sample_size)

    @classmethod
    def from_tensors(cls, tensors: Sequence[SymmetricTensor], sample_size: int = 0) -> "CumulantFamily":
        tensors = tuple(tensors)
        return cls(tensors, tensors[-1].order, tensors[0].dim, sample_size)


# -- estimators ----------------------------------------------------------------

def _as_matrix(panel) -> np.ndarray:
    if isinstance(panel, ReturnPanel):
        x = panel.returns
    else:
        x = np.asarray(panel, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise TooShort(f"need at least 2 observations, got {x.shape[0]}")
    return x


def _centered(panel) -> np.ndarray:
    x = _as_matrix(panel)
    return x - x.mean(axis=0)


def _moment_values(xc: np.ndarray, order: int, chunk: int = 2048) -> np.ndarray:
    t, dim = xc.shape
    keys = multi_indices(dim, order)
    out = np.empty(len(keys))
    for lo in range(0, len(keys), chunk):
        k = keys[lo:lo + chunk]
        prod = xc[:, k[:, 0]].copy()
        for j in range(1, order):
            prod *= xc[:, k[:, j]]
        out[lo:lo + chunk] = prod.sum(axis=0) / t
    return out


def _check_order(order: int, lowest: int) -> None:
    if not lowest <= order <= MAX_ORDER:
        raise UnsupportedOrder(f"order must lie in [{lowest}, {MAX_ORDER}], got {order}")


def central_moment_tensor(panel, order: int) -> SymmetricTensor:
    """Joint central moments ``(1/T) sum_t prod_k (x[t, i_k] - mean_i_k)``."""
    _check_order(order, 1)
    xc = _centered(panel)
    if order == 1:
        # means of centered data are zero by construction
        return SymmetricTensor.zeros(1, xc.shape[1])
    return SymmetricTensor(order, xc.shape[1], _moment_values(xc, order))


def _partitions(items: tuple[int, ...]) -> Iterator[list[tuple[int, ...]]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for sub in _partitions(rest):
        yield [(first,)] + sub
        for i, block in enumerate(sub):
            yield sub[:i] + [(first,) + block] + sub[i + 1:]


@lru_cache(maxsize=None)
def singleton_free_partitions(n: int) -> tuple[tuple[int, tuple[tuple[int, ...], ...]], ...]:
    """``(coefficient, blocks)`` for each partition of ``range(n)`` without singletons.

    The coefficient is ``(-1)**(b-1) * (b-1)!`` for ``b`` blocks.
    """
    out = []
    for p in _partitions(tuple(range(n))):
        if any(len(b) == 1 for b in p):
            continue
        b = len(p)
        coef = (-1) ** (b - 1) * math.factorial(b - 1)
        out.append((coef, tuple(tuple(sorted(block)) for block in sorted(p))))
    return tuple(out)


def _cumulant_from_moments(moments: dict[int, np.ndarray], order: int, dim: int) -> SymmetricTensor:
    keys = multi_indices(dim, order)
    acc = np.zeros(len(keys))
    for coef, blocks in singleton_free_partitions(order):
        term = np.full(len(keys), float(coef))
        for block in blocks:
            # columns of a sorted key taken in increasing position stay sorted
            sub = keys[:, block]
            term *= moments[len(block)][_rank_to_position(dim, len(block))[_colex_rank(sub, dim)]]
        acc += term
    return SymmetricTensor(order, dim, acc)


def cumulant_tensor(panel, order: int) -> SymmetricTensor:
    """Sample cumulant tensor ``C_order`` (``2 <= order <= 6``)."""
    return cumulant_family_upto(panel, order)[-1]


def cumulant_family_upto(panel, n_max: int) -> list[SymmetricTensor]:
    _check_order(n_max, 2)
    xc = _centered(panel)
    dim = xc.shape[1]
    moments = {k: _moment_values(xc, k) for k in range(2, n_max + 1)}
    return [_cumulant_from_moments(moments, n, dim) for n in range(2, n_max + 1)]


def cumulant_family(panel, n_max: int) -> CumulantFamily:
    """``C2 .. C_nmax`` from a single centering pass; ``n_max`` is 4 or 6."""
    if n_max not in (4, 6):
        raise UnsupportedOrder(f"n_max must be 4 or 6, got {n_max}")
    tensors = cumulant_family_upto(panel, n_max)
    t = _as_matrix(panel).shape[0]
    return CumulantFamily(tuple(tensors), n_max, tensors[0].dim, t)


def _univariate_cumulant(m: dict[int, float], order: int) -> float:
    if order == 2:
        return m[2]
    if order == 3:
        return m[3]
    if order == 4:
        return m[4] - 3 * m[2] ** 2
    if order == 5:
        return m[5] - 10 * m[3] * m[2]
    return m[6] - 15 * m[4] * m[2] - 10 * m[3] ** 2 + 30 * m[2] ** 3


def directional_cumulant(panel, a, order: int) -> float:
    """Cumulant of the scalar series ``y = X @ a`` from univariate formulas."""
    _check_order(order, 2)
    x = _as_matrix(panel)
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.shape[0] != x.shape[1]:
        raise DimMismatch(f"weight vector has length {a.shape[0]}, panel has {x.shape[1]} columns")
    y = x @ a
    yc = y - y.mean()
    m = {k: float(np.mean(yc ** k)) for k in range(2, order + 1)}
    return _univariate_cumulant(m, order)


def contract_all_modes(tensor: SymmetricTensor, v) -> float:
    """``sum C[i1..in] v[i1] ... v[in]``."""
    dense = tensor.to_dense()
    v = np.asarray(v, dtype=float)
    for _ in range(tensor.order):
        dense = dense @ v
    return float(dense)


@dataclass(frozen=True)
class CumulantProfile:
    """Cumulants of each portfolio ``Y_j = X @ V[:, j]``.

    ``raw[n]`` holds kappa_n per column; ``standardized[n]`` holds
    ``kappa_n / kappa_2 ** (n/2)`` for ``n >= 3`` and the raw variance for ``n = 2``.
    """

    orders: tuple[int, ...]
    raw: dict[int, np.ndarray]
    standardized: dict[int, np.ndarray]

    def rows(self) -> list[tuple[int, int, float, float]]:
        """``(portfolio j (1-based), order, raw, reported)`` rows."""
        out = []
        n_cols = len(self.raw[self.orders[0]])
        for j in range(n_cols):
            for n in self.orders:
                out.append((j + 1, n, float(self.raw[n][j]), float(self.standardized[n][j])))
        return out


def normalized_cumulant_profile(family: CumulantFamily, V) -> CumulantProfile:
    V = np.asarray(getattr(V, "matrix", V), dtype=float)
    if V.shape[0] != family.dim:
        raise DimMismatch(f"factor matrix has {V.shape[0]} rows, family dim is {family.dim}")
    raw = {}
    for tensor in family.tensors:
        raw[tensor.order] = np.array([contract_all_modes(tensor, V[:, j]) for j in range(V.shape[1])])
    var = raw[2]
    if family.n_max >= 3 and np.any(var <= 0):
        j = int(np.argmax(var <= 0))
        raise ZeroVariance(f"portfolio {j + 1} has zero variance")
    std = {2: var.copy()}
    for n in range(3, family.n_max + 1):
        std[n] = raw[n] / var ** (n / 2)
    orders = tuple(range(2, family.n_max + 1))
    return CumulantProfile(orders, raw, std)


# -- dump format ---------------------------------------------------------------

_DUMP_HEADER = ["order"] + [f"i{k}" for k in range(1, MAX_ORDER + 1)] + ["value"]


def write_tensors(tensors: Sequence[SymmetricTensor], path: Union[str, Path]) -> None:
    """Write tensors as ``order,i1..i6,value`` rows (1-based, unused slots blank)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_DUMP_HEADER)
        for t in tensors:
            for key, val in zip(t.keys, t.values):
                idx = [str(int(i) + 1) for i in key] + [""] * (MAX_ORDER - t.order)
                w.writerow([t.order, *idx, repr(float(val))])


def read_tensors(path: Union[str, Path], dim: int | None = None) -> list[SymmetricTensor]:
    """Inverse of :func:`write_tensors`; ``dim`` defaults to the largest index seen."""
    rows: dict[int, dict[tuple[int, ...], float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            order = int(row["order"])
            key = tuple(int(row[f"i{k}"]) - 1 for k in range(1, order + 1))
            rows.setdefault(order, {})[key] = float(row["value"])
    if dim is None:
        dim = 1 + max(max(k) for entries in rows.values() for k in entries)
    out = []
    for order in sorted(rows):
        keys = multi_indices(dim, order)
        vals = np.array([rows[order][tuple(int(i) for i in k)] for k in keys])
        out.append(SymmetricTensor(order, dim, vals))
    return out
