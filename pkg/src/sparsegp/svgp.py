"""Uncollapsed sparse-GP bounds with an explicit Gaussian over the inducing
values, plus the unbiased minibatch estimator.

The per-point penalty again comes in the classic (trace) and tightened (log)
flavors; substituting the closed-form optimal q(u) recovers the corresponding
collapsed bound from :mod:`sparsegp.sgpr` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import jax.numpy as jnp

from .errors import DimensionMismatch, EmptyBatch, IndexOutOfRange
from .linalg import SpdFactor, logdet, solve_triangular
from .sgpr import BoundReport, NystromCache, SparseModel, _targets

_LOG_2PI = jnp.log(2.0 * jnp.pi)

CLASSIC = "classic"
NEW = "new"


@dataclass(frozen=True)
class GaussianVariational:
    """q over the inducing values: mean and lower-triangular covariance factor.

    In the whitened parametrization the distribution lives on eps with
    u = L_uu eps, so the KL is taken against a standard normal; unwhitened it
    is over u directly, against N(0, K_uu).
    """

    mean: jnp.ndarray
    cov_factor: jnp.ndarray
    whitened: bool = True

    def __post_init__(self):
        mean = jnp.asarray(self.mean, dtype=float).reshape(-1)
        factor = jnp.atleast_2d(jnp.asarray(self.cov_factor, dtype=float))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov_factor", factor)
        if factor.shape != (mean.shape[0], mean.shape[0]):
            raise DimensionMismatch(
                f"cov factor {factor.shape} does not match mean length {mean.shape[0]}"
            )

    @property
    def cov(self) -> jnp.ndarray:
        return self.cov_factor @ self.cov_factor.T

    def unwhitened(self, kuu_factor: SpdFactor) -> "GaussianVariational":
        """Map to the equivalent distribution over u itself."""
        if not self.whitened:
            return self
        lower = kuu_factor.lower
        return GaussianVariational(
            mean=lower @ self.mean, cov_factor=lower @ self.cov_factor, whitened=False
        )


def kl_qu_pu(q: GaussianVariational, kuu_factor: SpdFactor) -> jnp.ndarray:
    """KL from q to the inducing prior.

    Whitened: KL(N(m, S) || N(0, I)); unwhitened: KL(N(m, S) || N(0, K_uu)).
    """
    m = q.mean.shape[0]
    if kuu_factor.size != m:
        raise DimensionMismatch(
            f"K_uu factor is {kuu_factor.size}x{kuu_factor.size}, q has dimension {m}"
        )
    log_det_s = 2.0 * jnp.sum(jnp.log(jnp.abs(jnp.diag(q.cov_factor))))
    if q.whitened:
        trace = jnp.sum(q.cov_factor**2)
        sq_mean = q.mean @ q.mean
        return 0.5 * (trace + sq_mean - m - log_det_s)
    wf = solve_triangular(kuu_factor, q.cov_factor)
    wm = solve_triangular(kuu_factor, q.mean)
    return 0.5 * (jnp.sum(wf**2) + wm @ wm - m + logdet(kuu_factor) - log_det_s)


def projected_moments(q: GaussianVariational, cache: NystromCache):
    """Per-row mean and variance of the linear read-out of q(u).

    Returns (mu, w) with mu_i = k_i' Kuu^-1 E[u] and
    w_i = k_i' Kuu^-1 Cov[u] Kuu^-1 k_i, for the rows covered by the cache.
    """
    if q.whitened:
        coeff = cache.a  # L^-1 k_i columns; Kuu^-1 L = L^-T
    else:
        coeff = solve_triangular(cache.kuu_factor, cache.a, transpose=True)
    mu = coeff.T @ q.mean
    w = jnp.sum((q.cov_factor.T @ coeff) ** 2, axis=0)
    return mu, w


def _pointwise_terms(q: GaussianVariational, model: SparseModel, cache: NystromCache, variant: str):
    """Expected Gaussian log-likelihoods and residual penalties per row."""
    if variant not in (CLASSIC, NEW):
        raise ValueError(f"unknown variant {variant!r}")
    y = _targets(model, cache)
    sigma2 = model.noise_var
    mu, w = projected_moments(q, cache)
    ell = -0.5 * _LOG_2PI - 0.5 * jnp.log(sigma2) - (y - mu) ** 2 / (2.0 * sigma2) - w / (
        2.0 * sigma2
    )
    if variant == CLASSIC:
        penalty = cache.resid / (2.0 * sigma2)
    else:
        penalty = 0.5 * jnp.log1p(cache.resid / sigma2)
    return ell, penalty


def expected_gaussian_loglik(
    q: GaussianVariational, model: SparseModel, cache: NystromCache, i: int
) -> jnp.ndarray:
    """E_q(u)[log N(y_i | k_i' Kuu^-1 u, noise_var)] for one training row."""
    n = cache.num_rows
    if not (0 <= int(i) < n):
        raise IndexOutOfRange(f"row {i} outside [0, {n})")
    ell, _ = _pointwise_terms(q, model, cache, CLASSIC)
    return ell[int(i)]


def elbo_svgp_uncollapsed(
    q: GaussianVariational, model: SparseModel, cache: NystromCache, variant: str = NEW
) -> BoundReport:
    """Full-data uncollapsed bound for an explicit q(u)."""
    if cache.rows is not None:
        raise DimensionMismatch("uncollapsed bound needs a full-data cache")
    ell, penalty = _pointwise_terms(q, model, cache, variant)
    kl = kl_qu_pu(q, cache.kuu_factor)
    fit = jnp.sum(ell)
    reg = jnp.sum(penalty)
    v = 1.0 / (1.0 + cache.resid / model.noise_var) if variant == NEW else jnp.asarray(1.0)
    v = jnp.atleast_1d(v)
    return BoundReport(
        bound=fit - reg - kl,
        dtc_term=fit,
        reg_term=reg,
        kl_term=kl,
        r_min=jnp.min(cache.resid),
        r_max=jnp.max(cache.resid),
        v_min=jnp.min(v),
        v_max=jnp.max(v),
        clamped_count=cache.clamped_count,
        v_opt=v if v.shape[0] == cache.num_rows else None,
    )


def elbo_svgp_minibatch(
    q: GaussianVariational,
    model: SparseModel,
    cache_rows: NystromCache,
    batch,
    variant: str = NEW,
) -> jnp.ndarray:
    """Unbiased minibatch estimate: the per-point sum is rescaled by N/|B|,
    the KL is kept whole.  ``cache_rows`` must cover exactly the batch rows."""
    batch = jnp.asarray(batch).reshape(-1)
    if batch.shape[0] == 0:
        raise EmptyBatch("minibatch must hold at least one index")
    if cache_rows.num_rows != batch.shape[0]:
        raise DimensionMismatch(
            f"cache covers {cache_rows.num_rows} rows, batch has {batch.shape[0]}"
        )
    ell, penalty = _pointwise_terms(q, model, cache_rows, variant)
    kl = kl_qu_pu(q, cache_rows.kuu_factor)
    scale = model.data.n / batch.shape[0]
    return scale * jnp.sum(ell - penalty) - kl
