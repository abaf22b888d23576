import numpy as np
import pytest

from cumfolio.cumulants import SymmetricTensor, cumulant_tensor
from cumfolio.errors import DimMismatch, RowMismatch
from cumfolio.tensor_algebra import (
    core_tensor,
    frobenius_norm_sq,
    mode_product,
    partial_contraction,
    scaled_concat,
    unfold_mode1,
)
from oracles import brute_core, brute_partial, brute_unfold, symmetrize


def _sym(rng, order, dim):
    return SymmetricTensor.from_dense(symmetrize(rng.standard_normal((dim,) * order)))


def _orthogonal(rng, dim):
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q


def test_unfold_order_two_is_identity(rng):
    t = _sym(rng, 2, 3)
    assert np.array_equal(unfold_mode1(t), t.to_dense())


def test_unfold_column_formula():
    # entry (1,2,2) in 1-based indices lands in row 1, column 4
    dense = np.zeros((2, 2, 2))
    dense[0, 1, 1] = 5.0
    mat = unfold_mode1(dense)
    assert mat.shape == (2, 4)
    assert mat[0, 3] == 5.0
    assert np.count_nonzero(mat) == 1


@pytest.mark.parametrize("order", [3, 4, 5])
def test_unfold_matches_loops(rng, order):
    dense = rng.standard_normal((3,) * order)
    assert np.array_equal(unfold_mode1(dense), brute_unfold(dense))


def test_unfold_zero():
    assert not unfold_mode1(SymmetricTensor.zeros(4, 3)).any()


def test_core_identity_and_order_two(rng):
    t = _sym(rng, 4, 3)
    np.testing.assert_allclose(core_tensor(t, np.eye(3)).values, t.values, atol=1e-14)
    c2 = _sym(rng, 2, 3)
    V = _orthogonal(rng, 3)
    np.testing.assert_allclose(core_tensor(c2, V).to_dense(), V.T @ c2.to_dense() @ V, atol=1e-13)


def test_core_matches_brute_force(rng):
    t = _sym(rng, 3, 2)
    V = rng.standard_normal((2, 2))
    np.testing.assert_allclose(core_tensor(t, V).to_dense(), brute_core(t.to_dense(), V), rtol=1e-12, atol=1e-14)


def test_core_output_is_symmetric(rng):
    t = _sym(rng, 4, 3)
    V = rng.standard_normal((3, 3))
    dense = core_tensor(t, V).to_dense()
    np.testing.assert_allclose(dense, brute_core(t.to_dense(), V), rtol=1e-11, atol=1e-12)


def test_partial_examples(rng):
    t = _sym(rng, 3, 3)
    np.testing.assert_allclose(partial_contraction(t, np.eye(3)), t.to_dense(), atol=1e-14)
    c2 = _sym(rng, 2, 3)
    V = rng.standard_normal((3, 3))
    np.testing.assert_allclose(partial_contraction(c2, V), c2.to_dense() @ V, rtol=1e-13)


def test_partial_matches_brute_force(rng):
    t = _sym(rng, 3, 2)
    V = rng.standard_normal((2, 2))
    np.testing.assert_allclose(partial_contraction(t, V), brute_partial(t.to_dense(), V), rtol=1e-12, atol=1e-14)


def test_core_equals_partial_then_first_mode(rng):
    for _ in range(5):
        t = _sym(rng, 3, 3)
        V = rng.standard_normal((3, 3))
        two_stage = mode_product(partial_contraction(t, V), V, 0)
        np.testing.assert_allclose(core_tensor(t, V).to_dense(), two_stage, rtol=1e-12, atol=1e-12)


def test_dim_mismatch(rng):
    t = _sym(rng, 3, 3)
    with pytest.raises(DimMismatch):
        core_tensor(t, np.eye(2))
    with pytest.raises(DimMismatch):
        partial_contraction(t, np.eye(4))


def test_frobenius_examples():
    assert frobenius_norm_sq(SymmetricTensor.zeros(3, 4)) == 0.0
    assert frobenius_norm_sq(SymmetricTensor.from_dense(np.eye(3))) == 3.0
    t = SymmetricTensor(3, 2, [0.0, 2.0, 0.0, 0.0])  # entry (1,1,2) = 2, 1-based
    assert frobenius_norm_sq(t) == 12.0
    assert frobenius_norm_sq(t.to_dense()) == 12.0


@pytest.mark.parametrize("order", [2, 3, 4, 5, 6])
def test_frobenius_orthogonal_invariance(order):
    rng = np.random.default_rng(order)
    t = cumulant_tensor(rng.standard_t(4, size=(100, 4)), order)
    V = _orthogonal(rng, 4)
    assert frobenius_norm_sq(core_tensor(t, V)) == pytest.approx(frobenius_norm_sq(t), rel=1e-9)


@pytest.mark.parametrize("order", [2, 4, 6])
def test_unfold_preserves_norm(rng, order):
    t = cumulant_tensor(rng.standard_normal((50, 3)), order)
    assert np.sum(unfold_mode1(t) ** 2) == pytest.approx(frobenius_norm_sq(t), rel=1e-13)


def test_scaled_concat(rng):
    a = rng.standard_normal((2, 2))
    b = rng.standard_normal((2, 4))
    assert np.array_equal(scaled_concat([a], [1.0]), a)
    out = scaled_concat([a, b], [1 / 2, 1 / 6])
    assert out.shape == (2, 6)
    np.testing.assert_allclose(out[:, 2:], b / 6)
    assert not scaled_concat([a, b], [0.0, 0.0]).any()
    with pytest.raises(RowMismatch):
        scaled_concat([a, np.ones((3, 2))], [1.0, 1.0])
