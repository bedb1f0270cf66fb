"""Dense SPD linear algebra: Cholesky with a jitter ladder, triangular solves,
log-determinants.

Every covariance factorization in the package goes through :func:`cholesky` so
that the jitter policy lives in exactly one place.  Matrices are plain 2-D
arrays in row-major (numpy default) layout; ``jax.numpy`` is used throughout so
the same routines work inside differentiated/compiled code, where the retry
ladder must be disabled (``retry=False``) because failure detection needs
concrete values.
"""

from __future__ import annotations

from dataclasses import dataclass

import jax
import jax.numpy as jnp

from .errors import DimensionMismatch, SingularMatrix

# Jitter ladder: start at the requested base (default 1e-6 * mean diagonal),
# escalate tenfold per retry, never beyond 1e-2 * mean diagonal.  A zero base
# escalates from 1e-10 * mean diagonal so that well-conditioned matrices can
# be factored exactly while near-singular ones still get rescued.
DEFAULT_REL_JITTER = 1e-6
_ZERO_START_REL_JITTER = 1e-10
_MAX_REL_JITTER = 1e-2
_MAX_ATTEMPTS = 6


@dataclass(frozen=True)
class SpdFactor:
    """Lower Cholesky factor ``L`` with ``L @ L.T = A + jitter * I``."""

    lower: jnp.ndarray
    jitter: float

    @property
    def size(self) -> int:
        return self.lower.shape[0]


def _jitter_ladder(base: float, mean_diag: float) -> list[float]:
    cap = _MAX_REL_JITTER * mean_diag
    ladder = [base]
    j = base if base > 0.0 else _ZERO_START_REL_JITTER * mean_diag
    while len(ladder) < _MAX_ATTEMPTS and j <= cap:
        if j != ladder[-1]:
            ladder.append(j)
        j *= 10.0
    return ladder


def cholesky(a, base_jitter: float | None = None, retry: bool = True) -> SpdFactor:
    """Factor a symmetric matrix, escalating jitter on failure.

    Parameters
    ----------
    a : (n, n) array
        Symmetric input; symmetrized as (a + a.T) / 2 before factoring.
    base_jitter : float, optional
        Jitter added on the first attempt.  Defaults to
        ``1e-6 * mean(diag(a))``.  Pass 0.0 for matrices that already carry
        their own regularization (e.g. a noise term on the diagonal).
    retry : bool
        When True (eager evaluation only), failed factorizations are retried
        with tenfold-larger jitter, at most five more times.  Must be False
        inside jit/grad-traced code; there a failure surfaces as NaNs in the
        result, to be caught by the caller's finite check.

    Raises
    ------
    SingularMatrix
        If every attempt of the ladder fails.
    """
    a = jnp.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    eye = jnp.eye(n, dtype=a.dtype)

    if not retry or isinstance(a, jax.core.Tracer):
        j = DEFAULT_REL_JITTER * float(jnp.mean(jnp.diag(a))) if base_jitter is None else base_jitter
        return SpdFactor(lower=jnp.linalg.cholesky(a + j * eye), jitter=j)

    mean_diag = float(jnp.mean(jnp.abs(jnp.diag(a)))) if n > 0 else 1.0
    mean_diag = max(mean_diag, 1e-300)
    base = DEFAULT_REL_JITTER * mean_diag if base_jitter is None else float(base_jitter)
    for j in _jitter_ladder(base, mean_diag):
        lower = jnp.linalg.cholesky(a + j * eye)
        if not bool(jnp.isnan(lower).any()):
            return SpdFactor(lower=lower, jitter=j)
    raise SingularMatrix(
        f"Cholesky failed for {n}x{n} matrix after jitter escalation up to "
        f"{_MAX_REL_JITTER:g} * mean(diag)"
    )


def solve_triangular(factor: SpdFactor, b, transpose: bool = False) -> jnp.ndarray:
    """Solve ``L x = b`` (or ``L.T x = b`` when ``transpose``)."""
    lower = factor.lower
    b = jnp.asarray(b)
    if b.shape[0] != lower.shape[0]:
        raise DimensionMismatch(
            f"rhs has leading dimension {b.shape[0]}, factor is {lower.shape[0]}"
        )
    return jax.scipy.linalg.solve_triangular(lower, b, lower=True, trans=1 if transpose else 0)


def chol_solve(factor: SpdFactor, b) -> jnp.ndarray:
    """Solve ``(A + jitter I) x = b`` via two triangular solves."""
    return solve_triangular(factor, solve_triangular(factor, b), transpose=True)


def logdet(factor: SpdFactor) -> jnp.ndarray:
    """log-determinant of the factored matrix: ``2 * sum(log(diag(L)))``."""
    return 2.0 * jnp.sum(jnp.log(jnp.diag(factor.lower)))
