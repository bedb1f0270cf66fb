"""Collapsed sparse-GP regression bounds.

All three bounds share the DTC log-likelihood log N(y | 0, Q + noise I),
where Q is the rank-M Nystrom approximation K_fu K_uu^-1 K_uf, and differ
only in how they penalize the diagonal residuals r_i = k_ii - q_ii:

* ``elbo_sgpr``          trace penalty      sum(r_i) / (2 noise_var)
* ``elbo_sgpr_artemev``  pooled-log penalty (N/2) log(1 + mean(r_i)/noise_var)
* ``elbo_sgpr_new``      per-point penalty  (1/2) sum log(1 + r_i/noise_var)

which satisfy sgpr <= artemev <= new <= exact log marginal likelihood.  The
DTC term is evaluated through the M x M matrix B = I + A A^T / noise_var with
A = L^-1 K_uf (never materializing the N x N covariance), so every bound
costs O(N M^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np

from .datasets import Dataset
from .errors import DimensionMismatch, NonPositiveV
from .kernels import KernelSpec, cross_cov, diag_cov
from .linalg import SpdFactor, cholesky, logdet, solve_triangular

_LOG_2PI = jnp.log(2.0 * jnp.pi)


@dataclass(frozen=True)
class SparseModel:
    """Kernel, noise variance, inducing inputs, and the data they act on."""

    kernel: KernelSpec
    noise_var: object
    inducing: jnp.ndarray  # (M, d)
    data: Dataset

    def __post_init__(self):
        z = jnp.atleast_2d(jnp.asarray(self.inducing, dtype=float))
        object.__setattr__(self, "inducing", z)
        if z.shape[0] < 1:
            raise DimensionMismatch("at least one inducing point is required")
        if z.shape[1] != self.data.dim:
            raise DimensionMismatch(
                f"inducing inputs have dimension {z.shape[1]}, data has {self.data.dim}"
            )

    @property
    def num_inducing(self) -> int:
        return self.inducing.shape[0]


@dataclass(frozen=True)
class NystromCache:
    """Per-(hyperparameter, Z) factorizations reused by every bound.

    ``a`` is L^-1 K_uf for the selected rows; ``resid`` holds the clamped
    diagonal residuals k_ii - q_ii (>= 0 exactly, negatives are round-off and
    their count is kept for diagnostics).  ``rows`` is None when the cache
    covers the full training set.
    """

    kuu_factor: SpdFactor
    kfu: jnp.ndarray
    a: jnp.ndarray
    kdiag: jnp.ndarray
    qdiag: jnp.ndarray
    resid: jnp.ndarray
    clamped_count: object
    rows: np.ndarray | None = None

    @property
    def num_rows(self) -> int:
        return self.a.shape[1]


@dataclass(frozen=True)
class OptimalQu:
    """Closed-form optimal Gaussian over the inducing values."""

    mean: jnp.ndarray
    cov: jnp.ndarray


@dataclass(frozen=True)
class BoundReport:
    """A bound value with its term decomposition and residual diagnostics.

    ``dtc_term`` is the data-fit part (DTC log-likelihood for collapsed
    bounds, expected log-likelihood sum for uncollapsed ones), ``reg_term``
    the residual regularizer, ``kl_term`` the KL over the inducing values
    (zero for collapsed bounds, where it is absorbed analytically).
    """

    bound: object
    dtc_term: object
    reg_term: object
    kl_term: object
    r_min: object
    r_max: object
    v_min: object
    v_max: object
    clamped_count: object
    v_opt: object = field(default=None, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "bound": float(self.bound),
            "dtc_term": float(self.dtc_term),
            "reg_term": float(self.reg_term),
            "v_min": float(self.v_min),
            "v_max": float(self.v_max),
            "clamped_count": int(self.clamped_count),
        }


def build_cache(
    model: SparseModel,
    rows=None,
    base_jitter: float = 0.0,
    retry: bool = True,
) -> NystromCache:
    """Factor K_uu and project the (selected) training rows onto it.

    The inducing covariance starts at zero jitter (escalating only on
    failure) so that Z = X reproduces the exact GP as closely as floating
    point allows.  Traced callers must pass ``retry=False`` and a fixed
    ``base_jitter``.
    """
    x = model.data.x if rows is None else jnp.asarray(model.data.x)[rows]
    kuu = cross_cov(model.kernel, model.inducing, model.inducing)
    factor = cholesky(kuu, base_jitter=base_jitter, retry=retry)
    kfu = cross_cov(model.kernel, x, model.inducing)
    a = solve_triangular(factor, kfu.T)
    qdiag = jnp.sum(a * a, axis=0)
    kdiag = diag_cov(model.kernel, x)
    raw = kdiag - qdiag
    resid = jnp.maximum(raw, 0.0)
    clamped = jnp.sum(raw < 0.0)
    return NystromCache(
        kuu_factor=factor,
        kfu=kfu,
        a=a,
        kdiag=kdiag,
        qdiag=qdiag,
        resid=resid,
        clamped_count=clamped,
        rows=rows,
    )


def _targets(model: SparseModel, cache: NystromCache) -> jnp.ndarray:
    y = jnp.asarray(model.data.y, dtype=float)
    return y if cache.rows is None else y[jnp.asarray(cache.rows)]


def _dtc_core(model: SparseModel, cache: NystromCache):
    """DTC log-likelihood pieces via B = I + A A^T / noise_var.

    Returns (dtc, lb, ay_white) where lb factors B and ay_white = L_B^-1 A y.
    """
    y = _targets(model, cache)
    n = y.shape[0]
    sigma2 = model.noise_var
    a = cache.a
    m = a.shape[0]
    b = jnp.eye(m) + (a @ a.T) / sigma2
    lb = cholesky(b, base_jitter=0.0, retry=False)  # b >= I, never singular
    ay = a @ y
    ay_white = solve_triangular(lb, ay)
    log_det = n * jnp.log(sigma2) + logdet(lb)
    quad = (y @ y) / sigma2 - (ay_white @ ay_white) / sigma2**2
    dtc = -0.5 * (n * _LOG_2PI + log_det + quad)
    return dtc, lb, ay_white


def dtc_log_likelihood(model: SparseModel, cache: NystromCache) -> jnp.ndarray:
    """log N(y | 0, Q + noise_var I) in O(N M^2)."""
    dtc, _, _ = _dtc_core(model, cache)
    return dtc


def _report(dtc, reg, cache: NystromCache, v) -> BoundReport:
    v = jnp.atleast_1d(jnp.asarray(v))
    return BoundReport(
        bound=dtc - reg,
        dtc_term=dtc,
        reg_term=reg,
        kl_term=jnp.asarray(0.0),
        r_min=jnp.min(cache.resid),
        r_max=jnp.max(cache.resid),
        v_min=jnp.min(v),
        v_max=jnp.max(v),
        clamped_count=cache.clamped_count,
        v_opt=v if v.shape[0] == cache.num_rows else None,
    )


def elbo_sgpr(model: SparseModel, cache: NystromCache) -> BoundReport:
    """Classic collapsed bound: DTC minus the trace penalty."""
    dtc, _, _ = _dtc_core(model, cache)
    reg = jnp.sum(cache.resid) / (2.0 * model.noise_var)
    return _report(dtc, reg, cache, jnp.asarray(1.0))


def elbo_sgpr_new(model: SparseModel, cache: NystromCache) -> BoundReport:
    """Tightened collapsed bound with the per-point log penalty; the report
    carries the optimal per-point scales for histogram output."""
    dtc, _, _ = _dtc_core(model, cache)
    reg = 0.5 * jnp.sum(jnp.log1p(cache.resid / model.noise_var))
    return _report(dtc, reg, cache, optimal_v(cache, model.noise_var))


def elbo_sgpr_artemev(model: SparseModel, cache: NystromCache) -> BoundReport:
    """Pooled-residual bound: the spherical restriction of the per-point one.

    Also exposes the restricted optimal scalar scale
    v* = 1 / (1 + sum(r)/(N noise_var)) through v_min = v_max.
    """
    dtc, _, _ = _dtc_core(model, cache)
    n = cache.num_rows
    pooled = jnp.sum(cache.resid) / (n * model.noise_var)
    reg = 0.5 * n * jnp.log1p(pooled)
    return _report(dtc, reg, cache, 1.0 / (1.0 + pooled))


def optimal_v(cache: NystromCache, noise_var) -> jnp.ndarray:
    """Per-point optimal scales v_i = 1 / (1 + r_i / noise_var), in (0, 1]."""
    return 1.0 / (1.0 + cache.resid / noise_var)


def kl_qfu_pfu(v) -> jnp.ndarray:
    """KL between the rescaled and the plain conditional over training values:
    0.5 * sum(v - log v - 1)."""
    v = jnp.atleast_1d(jnp.asarray(v, dtype=float))
    if not isinstance(v, jax.core.Tracer) and bool(jnp.any(v <= 0.0)):
        raise NonPositiveV("all scales v must be > 0")
    return 0.5 * jnp.sum(v - jnp.log(v) - 1.0)


def optimal_qu(model: SparseModel, cache: NystromCache) -> OptimalQu:
    """Closed-form optimum of the variational Gaussian over inducing values.

    mean = Kuu Lam^-1 K_uf y / noise_var and cov = Kuu Lam^-1 Kuu with
    Lam = Kuu + K_uf K_fu / noise_var, computed through the same B factor as
    the bounds.  Identical for the classic and per-point-penalty bounds.
    """
    _, lb, ay_white = _dtc_core(model, cache)
    lower = cache.kuu_factor.lower
    mean = lower @ solve_triangular(lb, ay_white, transpose=True) / model.noise_var
    wt = solve_triangular(lb, lower.T)
    cov = wt.T @ wt
    return OptimalQu(mean=mean, cov=0.5 * (cov + cov.T))


def sparse_predict(
    model: SparseModel,
    qu,
    xstar,
    cache: NystromCache | None = None,
    include_noise: bool = False,
):
    """Predictive mean and covariance of the sparse posterior at new inputs.

    ``qu`` is either an :class:`OptimalQu` or a
    :class:`~sparsegp.svgp.GaussianVariational` (whitened or not).  Passing
    the cache reuses its K_uu factor; otherwise the factor is rebuilt.
    """
    xstar = jnp.atleast_2d(jnp.asarray(xstar, dtype=float))
    if xstar.shape[1] != model.inducing.shape[1]:
        raise DimensionMismatch(
            f"test inputs have dimension {xstar.shape[1]}, inducing {model.inducing.shape[1]}"
        )
    if cache is not None:
        factor = cache.kuu_factor
    else:
        kuu = cross_cov(model.kernel, model.inducing, model.inducing)
        factor = cholesky(kuu, base_jitter=0.0)
    ksu = cross_cov(model.kernel, xstar, model.inducing)
    a_star = solve_triangular(factor, ksu.T)  # L^-1 K_us

    whitened = bool(getattr(qu, "whitened", False))
    mean_q = jnp.asarray(qu.mean).reshape(-1)
    if mean_q.shape[0] != model.num_inducing:
        raise DimensionMismatch("variational mean length differs from the inducing count")

    if whitened:
        mean = a_star.T @ mean_q
        proj = jnp.asarray(qu.cov_factor).T @ a_star
        proj_cov = proj.T @ proj
    else:
        mean = a_star.T @ solve_triangular(factor, mean_q)
        b_star = solve_triangular(factor, a_star, transpose=True)  # Kuu^-1 K_us
        cov_q = qu.cov if hasattr(qu, "cov") else qu.cov_factor @ qu.cov_factor.T
        proj_cov = b_star.T @ cov_q @ b_star

    kss = cross_cov(model.kernel, xstar, xstar)
    cov = kss - a_star.T @ a_star + proj_cov
    cov = 0.5 * (cov + cov.T)
    if include_noise:
        cov = cov + model.noise_var * jnp.eye(xstar.shape[0])
    return mean, cov
