"""Independent reference computations used only by the tests.

Nothing here imports the code under test: each oracle takes a different
route to the same quantity (power-series algebra, explicit loops, Jacobi
rotations) so agreement is meaningful.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict

import numpy as np


# -- cumulants as Taylor coefficients of the empirical log-MGF -----------------

def _poly_mul(a: dict, b: dict, max_deg: int) -> dict:
    out: dict = defaultdict(float)
    for ea, ca in a.items():
        da = sum(ea)
        for eb, cb in b.items():
            if da + sum(eb) <= max_deg:
                out[tuple(x + y for x, y in zip(ea, eb))] += ca * cb
    return dict(out)


def log_mgf_cumulants(x: np.ndarray, max_deg: int = 6) -> dict:
    """Map exponent vectors ``alpha`` (|alpha| <= max_deg) to joint cumulants.

    Builds the truncated series of ``E exp(tau . x)`` from raw sample moments,
    expands ``log(1 + u) = u - u^2/2 + ...`` to total degree ``max_deg`` and
    reads off ``alpha! * coefficient``.
    """
    t, m = x.shape
    u = {}
    for deg in range(1, max_deg + 1):
        for combo in itertools.combinations_with_replacement(range(m), deg):
            alpha = tuple(Counter(combo).get(i, 0) for i in range(m))
            moment = np.mean(np.prod(x ** np.array(alpha), axis=1))
            u[alpha] = moment / math.prod(math.factorial(a) for a in alpha)
    log_series: dict = defaultdict(float)
    power = dict(u)
    for k in range(1, max_deg + 1):
        for e, c in power.items():
            log_series[e] += (-1) ** (k + 1) * c / k
        power = _poly_mul(power, u, max_deg)
    return {e: c * math.prod(math.factorial(a) for a in e) for e, c in log_series.items()}


def cumulant_from_oracle(oracle: dict, idx: tuple, m: int) -> float:
    counts = Counter(idx)
    return oracle[tuple(counts.get(i, 0) for i in range(m))]


# -- brute-force multilinear algebra --------------------------------------------

def brute_core(dense: np.ndarray, V: np.ndarray) -> np.ndarray:
    n, m = dense.ndim, dense.shape[0]
    out = np.zeros((m,) * n)
    for ls in itertools.product(range(m), repeat=n):
        acc = 0.0
        for js in itertools.product(range(m), repeat=n):
            w = dense[js]
            for j, l in zip(js, ls):
                w *= V[j, l]
            acc += w
        out[ls] = acc
    return out


def brute_partial(dense: np.ndarray, V: np.ndarray) -> np.ndarray:
    n, m = dense.ndim, dense.shape[0]
    out = np.zeros((m,) * n)
    for j1 in range(m):
        for ls in itertools.product(range(m), repeat=n - 1):
            acc = 0.0
            for js in itertools.product(range(m), repeat=n - 1):
                w = dense[(j1,) + js]
                for j, l in zip(js, ls):
                    w *= V[j, l]
                acc += w
            out[(j1,) + ls] = acc
    return out


def brute_unfold(dense: np.ndarray) -> np.ndarray:
    """Column index ``sum_k j_k M^(k-2)`` over trailing modes, by explicit loops."""
    n, m = dense.ndim, dense.shape[0]
    out = np.zeros((m, m ** (n - 1)))
    for js in itertools.product(range(m), repeat=n):
        col = sum(j * m ** k for k, j in enumerate(js[1:]))
        out[js[0], col] = dense[js]
    return out


def symmetrize(arr: np.ndarray) -> np.ndarray:
    perms = list(itertools.permutations(range(arr.ndim)))
    return sum(arr.transpose(p) for p in perms) / len(perms)


# -- Jacobi eigen-solver for left singular vectors ------------------------------

def jacobi_eigh(a: np.ndarray, sweeps: int = 100, tol: float = 1e-15):
    """Cyclic Jacobi rotations; eigenvalues descending, columns sign-normalized."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * np.sqrt(np.sum(a ** 2)):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    w = np.diag(a)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    for j in range(n):
        i = np.argmax(np.abs(v[:, j]))
        if v[i, j] < 0:
            v[:, j] *= -1
    return w, v


def jacobi_left_singular(a: np.ndarray):
    """Left singular vectors of ``a`` as eigenvectors of ``a a^T``."""
    w, u = jacobi_eigh(a @ a.T)
    return np.sqrt(np.maximum(w, 0.0)), u


def principal_angle_gap(a: np.ndarray, b: np.ndarray) -> float:
    """``1 - smallest cosine`` between the column spans of ``a`` and ``b``."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return float(1.0 - s.min())
