import numpy as np
import pytest
import scipy.stats

import sparsegp as sg
from sparsegp.errors import DatasetTooLarge, DimensionMismatch


def _random_state(seed, n=5, d=1, noise=0.1):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, (n, d))
    y = rng.standard_normal(n)
    kernel = sg.KernelSpec("sqexp", 1.2, [0.8])
    return sg.build_exact(kernel, noise, x, y), x, y, kernel


def test_single_point_standard_case():
    kernel = sg.KernelSpec("sqexp", 1.0, [1.0])
    state = sg.build_exact(kernel, 1.0, [[0.0]], [0.0])
    val = float(sg.exact_log_marginal(state))
    assert abs(val - (-0.5 * np.log(2.0 * np.pi * 2.0))) < 1e-12


def test_log_marginal_density_oracle():
    state, x, y, kernel = _random_state(0, n=3)
    cov = np.asarray(sg.cross_cov(kernel, x, x)) + 0.1 * np.eye(3)
    oracle = scipy.stats.multivariate_normal(mean=np.zeros(3), cov=cov).logpdf(y)
    assert abs(float(sg.exact_log_marginal(state)) - oracle) < 1e-9


def test_noiseless_interpolation():
    rng = np.random.default_rng(1)
    x = np.linspace(0, 3, 6)[:, None]
    y = rng.standard_normal(6)
    kernel = sg.KernelSpec("sqexp", 1.0, [1.0])
    state = sg.build_exact(kernel, 1e-12, x, y)
    mean, _ = sg.exact_predict(state, x[2:3])
    assert abs(float(mean[0]) - y[2]) < 1e-4


def test_prior_reversion_far_from_data():
    state, _, _, kernel = _random_state(2)
    mean, cov = sg.exact_predict(state, [[50.0]])  # >20 lengthscales away
    assert abs(float(mean[0])) < 1e-6
    assert abs(float(cov[0, 0]) - 1.2) < 1e-6


def test_predictive_matches_joint_conditioning_oracle():
    state, x, y, kernel = _random_state(3, n=5)
    xs = np.random.default_rng(4).uniform(-2, 2, (3, 1))
    joint_x = np.vstack([x, xs])
    k_all = np.asarray(sg.cross_cov(kernel, joint_x, joint_x))
    k_tt = k_all[:5, :5] + 0.1 * np.eye(5)
    k_st = k_all[5:, :5]
    k_ss = k_all[5:, 5:]
    mean_o = k_st @ np.linalg.solve(k_tt, y)
    cov_o = k_ss - k_st @ np.linalg.solve(k_tt, k_st.T)
    mean, cov = sg.exact_predict(state, xs)
    assert np.abs(np.asarray(mean) - mean_o).max() < 1e-8
    assert np.abs(np.asarray(cov) - cov_o).max() < 1e-8


def test_observation_space_adds_noise():
    state, x, _, _ = _random_state(5)
    _, latent = sg.exact_predict(state, x[:2])
    _, obs = sg.exact_predict(state, x[:2], include_noise=True)
    assert np.allclose(np.asarray(obs) - np.asarray(latent), 0.1 * np.eye(2), atol=1e-12)


def test_predictive_covariance_psd():
    state, _, _, _ = _random_state(6, n=8)
    xs = np.random.default_rng(7).uniform(-3, 3, (6, 1))
    _, cov = sg.exact_predict(state, xs)
    eigs = np.linalg.eigvalsh(np.asarray(cov))
    assert eigs.min() > -1e-10


def test_permutation_invariance():
    rng = np.random.default_rng(8)
    x = rng.uniform(-2, 2, (12, 2))
    y = rng.standard_normal(12)
    kernel = sg.KernelSpec("sqexp_ard", 0.9, [0.7, 1.4])
    base = float(sg.exact_log_marginal(sg.build_exact(kernel, 0.2, x, y)))
    perm = rng.permutation(12)
    shuffled = float(sg.exact_log_marginal(sg.build_exact(kernel, 0.2, x[perm], y[perm])))
    assert abs(base - shuffled) < 1e-9


def test_alpha_residual_invariant():
    state, x, y, kernel = _random_state(9, n=20)
    cov = np.asarray(sg.cross_cov(kernel, x, x)) + 0.1 * np.eye(20)
    resid = cov @ np.asarray(state.alpha) - y
    assert np.abs(resid).max() < 1e-7


def test_desk_scale_guard():
    kernel = sg.KernelSpec("sqexp", 1.0, [1.0])
    with pytest.raises(DatasetTooLarge):
        sg.build_exact(kernel, 0.1, np.zeros((20001, 1)), np.zeros(20001))


def test_predict_dimension_mismatch():
    state, _, _, _ = _random_state(10)
    with pytest.raises(DimensionMismatch):
        sg.exact_predict(state, np.zeros((2, 3)))
