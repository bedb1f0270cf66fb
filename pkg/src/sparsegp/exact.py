"""Exact Gaussian-process regression: the log marginal likelihood and the
predictive posterior.  Serves as the reference every sparse bound is compared
against.
"""

from __future__ import annotations

from dataclasses import dataclass

import jax.numpy as jnp

from .errors import DatasetTooLarge, DimensionMismatch
from .kernels import KernelSpec, cross_cov
from .linalg import SpdFactor, chol_solve, cholesky, logdet, solve_triangular

# Refuse exact computation past desk scale rather than thrash.
MAX_EXACT_POINTS = 20000

_LOG_2PI = jnp.log(2.0 * jnp.pi)


@dataclass(frozen=True)
class ExactGpState:
    """Trained exact-GP state with the noise-augmented kernel factor cached.

    ``alpha`` solves (K + noise_var I) alpha = y; rebuilding after any
    hyperparameter change is the caller's job.
    """

    kernel: KernelSpec
    noise_var: object
    x: jnp.ndarray
    y: jnp.ndarray
    factor: SpdFactor
    alpha: jnp.ndarray


def build_exact(kernel: KernelSpec, noise_var, x, y, retry: bool = True) -> ExactGpState:
    """Factor K_xx + noise_var I and cache alpha.

    The noise term regularizes the diagonal already, so the factorization
    starts at zero jitter.
    """
    x = jnp.atleast_2d(jnp.asarray(x, dtype=float))
    y = jnp.asarray(y, dtype=float).reshape(-1)
    n = x.shape[0]
    if n > MAX_EXACT_POINTS:
        raise DatasetTooLarge(f"exact GP refused for N={n} > {MAX_EXACT_POINTS}")
    if y.shape[0] != n:
        raise DimensionMismatch(f"{n} inputs but {y.shape[0]} targets")
    kxx = cross_cov(kernel, x, x)
    cov = kxx + noise_var * jnp.eye(n)
    factor = cholesky(cov, base_jitter=0.0, retry=retry)
    alpha = chol_solve(factor, y)
    return ExactGpState(kernel=kernel, noise_var=noise_var, x=x, y=y, factor=factor, alpha=alpha)


def exact_log_marginal(state: ExactGpState) -> jnp.ndarray:
    """log N(y | 0, K + noise_var I)."""
    n = state.y.shape[0]
    return -0.5 * (state.y @ state.alpha) - 0.5 * logdet(state.factor) - 0.5 * n * _LOG_2PI


def exact_predict(state: ExactGpState, xstar, include_noise: bool = False):
    """Predictive mean and covariance at new inputs.

    With ``include_noise`` the observation noise is added to the covariance,
    giving the predictive over targets rather than latent values.
    """
    xstar = jnp.atleast_2d(jnp.asarray(xstar, dtype=float))
    if xstar.shape[1] != state.x.shape[1]:
        raise DimensionMismatch(
            f"test inputs have dimension {xstar.shape[1]}, training used {state.x.shape[1]}"
        )
    ksf = cross_cov(state.kernel, xstar, state.x)
    mean = ksf @ state.alpha
    w = solve_triangular(state.factor, ksf.T)
    cov = cross_cov(state.kernel, xstar, xstar) - w.T @ w
    cov = 0.5 * (cov + cov.T)
    if include_noise:
        cov = cov + state.noise_var * jnp.eye(xstar.shape[0])
    return mean, cov
