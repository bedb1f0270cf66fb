"""Shared instance generators and dense brute-force oracles.

Every oracle here recomputes the quantity under test with plain numpy/scipy
dense linear algebra, materializing the full covariances the library never
forms.  Jitter recorded on a cache is replicated so oracle and fast path see
the same matrix.
"""

from functools import lru_cache

import jax
import jax.numpy as jnp
import numpy as np
import scipy.linalg
import scipy.stats

import sparsegp as sg
from sparsegp.datasets import Dataset


def random_instance(seed, n_lo=10, n_hi=200, m_lo=1, m_hi=20, families=("sqexp", "matern32")):
    """Random data, kernel, noise and inducing set for property tests."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_lo, n_hi + 1))
    m = int(rng.integers(m_lo, min(m_hi, n) + 1))
    d = int(rng.integers(1, 4))
    x = rng.uniform(-2.0, 2.0, size=(n, d)) * np.sqrt(d)
    y = rng.standard_normal(n) * rng.uniform(0.5, 2.0)
    data = sg.from_raw(x, y)
    family = families[int(rng.integers(0, len(families)))]
    if family == "sqexp_ard":
        ell = rng.uniform(0.3, 3.0, size=d)
    else:
        ell = np.array([rng.uniform(0.3, 3.0)])
    kernel = sg.KernelSpec(family, float(rng.uniform(0.3, 3.0)), ell)
    noise_var = float(rng.uniform(0.01, 1.0))
    z = data.x[np.sort(rng.choice(n, size=m, replace=False))] + 0.01 * rng.standard_normal((m, d))
    model = sg.SparseModel(kernel, noise_var, z, data)
    return model, rng


def dense_parts(model, cache):
    """Dense K_uu (with the cache's jitter), K_fu, K_ff, Q_ff and residuals."""
    z = np.asarray(model.inducing)
    x = np.asarray(model.data.x)
    kuu = np.asarray(sg.cross_cov(model.kernel, z, z))
    kuu = kuu + cache.kuu_factor.jitter * np.eye(z.shape[0])
    kfu = np.asarray(sg.cross_cov(model.kernel, x, z))
    kff = np.asarray(sg.cross_cov(model.kernel, x, x))
    qff = kfu @ np.linalg.solve(kuu, kfu.T)
    resid = np.maximum(np.diag(kff) - np.diag(qff), 0.0)
    return kuu, kfu, kff, qff, resid


def dense_collapsed_bounds(model, cache):
    """Evaluate all three collapsed bounds by materializing Q_ff + noise I."""
    _, _, _, qff, resid = dense_parts(model, cache)
    n = qff.shape[0]
    y = np.asarray(model.data.y)
    s2 = float(model.noise_var)
    dtc = scipy.stats.multivariate_normal(mean=np.zeros(n), cov=qff + s2 * np.eye(n)).logpdf(y)
    return {
        "sgpr": dtc - resid.sum() / (2.0 * s2),
        "sgpr_new": dtc - 0.5 * np.log1p(resid / s2).sum(),
        "sgpr_artemev": dtc - 0.5 * n * np.log1p(resid.mean() / s2),
    }


def dense_gaussian_kl(m0, c0, m1, c1):
    """KL(N(m0, c0) || N(m1, c1)) with dense solves."""
    k = len(m0)
    c1_inv = np.linalg.inv(c1)
    _, ld0 = np.linalg.slogdet(c0)
    _, ld1 = np.linalg.slogdet(c1)
    diff = np.asarray(m1) - np.asarray(m0)
    return 0.5 * (np.trace(c1_inv @ c0) + diff @ c1_inv @ diff - k + ld1 - ld0)


def dense_optimal_qu(model, cache):
    """Posterior over inducing values from the prior times the projected
    Gaussian likelihood, by completing the square densely."""
    kuu, kfu, _, _, _ = dense_parts(model, cache)
    s2 = float(model.noise_var)
    y = np.asarray(model.data.y)
    p = np.linalg.solve(kuu, kfu.T).T  # K_fu K_uu^-1
    prec = np.linalg.inv(kuu) + p.T @ p / s2
    cov = np.linalg.inv(prec)
    mean = cov @ p.T @ y / s2
    return mean, cov


def sym_sqrt(a):
    w, v = np.linalg.eigh(a)
    return v @ np.diag(np.sqrt(np.maximum(w, 0.0))) @ v.T


def random_spd(rng, n, scale=1.0):
    w = rng.standard_normal((n, n))
    return scale * (w @ w.T / n + np.eye(n))


def chain_values(model):
    """The three collapsed bounds plus the exact log marginal likelihood."""
    cache = sg.build_cache(model)
    vals = (
        float(sg.elbo_sgpr(model, cache).bound),
        float(sg.elbo_sgpr_artemev(model, cache).bound),
        float(sg.elbo_sgpr_new(model, cache).bound),
        float(
            sg.exact_log_marginal(
                sg.build_exact(model.kernel, model.noise_var, model.data.x, model.data.y)
            )
        ),
    )
    return vals, cache


@lru_cache(maxsize=None)
def _compiled_chain(n, m, d, family):
    """Jit-compiled bound chain for one (n, m, d, family) shape bucket.

    Compilation is the dominant cost of evaluating the library on fresh array
    shapes, so property sweeps reuse a small set of buckets.
    """

    def chain(x, y, z, amp2, ell, noise):
        data = Dataset(x=x, y=y, x_means=np.zeros(d), y_mean=0.0)
        kernel = sg.KernelSpec(family, amp2, ell)
        model = sg.SparseModel(kernel, noise, z, data)
        cache = sg.build_cache(model, base_jitter=1e-8, retry=False)
        b1 = sg.elbo_sgpr(model, cache).bound
        b2 = sg.elbo_sgpr_artemev(model, cache).bound
        b3 = sg.elbo_sgpr_new(model, cache).bound
        lml = sg.exact_log_marginal(sg.build_exact(kernel, noise, x, y, retry=False))
        return jnp.stack([b1, b2, b3, lml, jnp.max(cache.resid)])

    return jax.jit(chain)


def random_chain_values(seed, shape_buckets):
    """(sgpr, artemev, new, exact, max_resid) for a random instance drawn in
    one of the fixed shape buckets."""
    rng = np.random.default_rng(seed)
    n, m, d = shape_buckets[seed % len(shape_buckets)]
    family = ("sqexp", "matern32")[int(rng.integers(0, 2))]
    x = rng.uniform(-2.0, 2.0, size=(n, d)) * np.sqrt(d)
    y = rng.standard_normal(n) * rng.uniform(0.5, 2.0)
    y = y - y.mean()
    z = x[np.sort(rng.choice(n, size=m, replace=False))] + 0.01 * rng.standard_normal((m, d))
    amp2 = float(rng.uniform(0.3, 3.0))
    ell = np.array([rng.uniform(0.3, 3.0)])
    noise = float(rng.uniform(0.01, 1.0))
    fn = _compiled_chain(n, m, d, family)
    return np.asarray(fn(x, y, z, amp2, ell, noise))
