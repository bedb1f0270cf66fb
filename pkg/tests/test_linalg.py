import numpy as np
import pytest
import scipy.linalg

import sparsegp as sg
from sparsegp.errors import DimensionMismatch, SingularMatrix


def test_identity_zero_jitter():
    f = sg.cholesky(np.eye(3), base_jitter=0.0)
    assert np.allclose(np.asarray(f.lower), np.eye(3))
    assert f.jitter == 0.0


def test_hand_checked_2x2():
    f = sg.cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]), base_jitter=0.0)
    expected = np.array([[2.0, 0.0], [1.0, np.sqrt(2.0)]])
    assert np.allclose(np.asarray(f.lower), expected, atol=1e-14)


def test_reconstruction_oracle():
    rng = np.random.default_rng(0)
    w = rng.standard_normal((20, 20))
    a = w.T @ w + np.eye(20)
    f = sg.cholesky(a, base_jitter=0.0)
    ll = np.asarray(f.lower)
    rel = np.linalg.norm(ll @ ll.T - a) / np.linalg.norm(a)
    assert rel < 1e-10


def test_reconstruction_includes_jitter():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((12, 12))
    a = w.T @ w + np.eye(12)
    f = sg.cholesky(a, base_jitter=1e-4)
    ll = np.asarray(f.lower)
    target = a + f.jitter * np.eye(12)
    assert np.linalg.norm(ll @ ll.T - target) / np.linalg.norm(target) < 1e-8


def test_jitter_escalates_for_singular_input():
    a = np.ones((4, 4))  # rank one
    f = sg.cholesky(a, base_jitter=0.0)
    assert f.jitter > 0.0
    assert np.all(np.diag(np.asarray(f.lower)) > 0)


def test_singular_matrix_raised():
    with pytest.raises(SingularMatrix):
        sg.cholesky(np.array([[-1.0, 0.0], [0.0, -1.0]]), base_jitter=0.0)


def test_solve_identity():
    f = sg.cholesky(np.eye(3), base_jitter=0.0)
    b = np.arange(6.0).reshape(3, 2)
    assert np.allclose(np.asarray(sg.solve_triangular(f, b)), b)


def test_solve_hand_case():
    f = sg.cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]), base_jitter=0.0)
    x = np.asarray(sg.solve_triangular(f, np.array([2.0, 3.0])))
    assert np.allclose(x, [1.0, np.sqrt(2.0)], atol=1e-14)


def test_solve_residual_oracle():
    rng = np.random.default_rng(2)
    w = rng.standard_normal((15, 15))
    a = w @ w.T + np.eye(15)
    f = sg.cholesky(a, base_jitter=0.0)
    b = rng.standard_normal((15, 3))
    x = np.asarray(sg.solve_triangular(f, b))
    assert np.abs(np.asarray(f.lower) @ x - b).max() < 1e-10
    xt = np.asarray(sg.solve_triangular(f, b, transpose=True))
    assert np.abs(np.asarray(f.lower).T @ xt - b).max() < 1e-10


def test_solve_dimension_mismatch():
    f = sg.cholesky(np.eye(3), base_jitter=0.0)
    with pytest.raises(DimensionMismatch):
        sg.solve_triangular(f, np.zeros(4))


def test_logdet_identity():
    assert float(sg.logdet(sg.cholesky(np.eye(5), base_jitter=0.0))) == 0.0


def test_logdet_diagonal():
    f = sg.cholesky(np.diag([4.0, 9.0]), base_jitter=0.0)
    assert abs(float(sg.logdet(f)) - np.log(36.0)) < 1e-12


def test_logdet_lu_oracle():
    rng = np.random.default_rng(3)
    w = rng.standard_normal((10, 10))
    a = w @ w.T + np.eye(10)
    f = sg.cholesky(a, base_jitter=0.0)
    lu, piv = scipy.linalg.lu_factor(a)
    oracle = np.sum(np.log(np.abs(np.diag(lu))))
    assert abs(float(sg.logdet(f)) - oracle) < 1e-9


def test_logdet_inverse_cancels():
    rng = np.random.default_rng(4)
    w = rng.standard_normal((10, 10))
    a = w @ w.T + np.eye(10)
    f = sg.cholesky(a, base_jitter=0.0)
    inv = np.asarray(sg.solve_triangular(f, sg.solve_triangular(f, np.eye(10)), transpose=True))
    f_inv = sg.cholesky(inv, base_jitter=0.0)
    assert abs(float(sg.logdet(f)) + float(sg.logdet(f_inv))) < 1e-7


def test_non_square_rejected():
    with pytest.raises(DimensionMismatch):
        sg.cholesky(np.zeros((2, 3)), base_jitter=0.0)
