"""Stationary covariance functions: squared exponential (shared or per-dimension
lengthscales) and Matern-3/2 with a common lengthscale.

Squared distances are computed in the expanded form ||a||^2 + ||b||^2 - 2 a.b
and clamped at zero, which keeps the Matern square root away from tiny
negative round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import jax.numpy as jnp

from .errors import DimensionMismatch

SQEXP = "sqexp"
SQEXP_ARD = "sqexp_ard"
MATERN32 = "matern32"
FAMILIES = (SQEXP, SQEXP_ARD, MATERN32)

# floor under squared distances before sqrt; keeps the Matern kernel
# differentiable at coincident points (the clamp zeroes the gradient there)
_R2_FLOOR = 1e-36


@dataclass(frozen=True)
class KernelSpec:
    """Covariance family plus its positive parameters.

    ``lengthscales`` holds one entry for the shared-lengthscale families and
    d entries for ``sqexp_ard``.
    """

    family: str
    amplitude_sq: object  # positive scalar (may be a traced value)
    lengthscales: object  # positive (k,) vector

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "lengthscales", jnp.atleast_1d(jnp.asarray(self.lengthscales)))

    def to_config(self) -> dict:
        return {
            "family": self.family,
            "amplitude_sq": float(self.amplitude_sq),
            "lengthscales": [float(v) for v in jnp.atleast_1d(self.lengthscales)],
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "KernelSpec":
        return cls(cfg["family"], cfg["amplitude_sq"], jnp.asarray(cfg["lengthscales"], dtype=float))


def _check_inputs(spec: KernelSpec, a, b=None):
    a = jnp.atleast_2d(jnp.asarray(a, dtype=float))
    if b is None:
        b = a
    else:
        b = jnp.atleast_2d(jnp.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"input dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    ell = jnp.atleast_1d(spec.lengthscales)
    if spec.family == SQEXP_ARD and ell.shape[0] != a.shape[1]:
        raise DimensionMismatch(
            f"ard kernel has {ell.shape[0]} lengthscales for {a.shape[1]}-dimensional inputs"
        )
    if spec.family != SQEXP_ARD and ell.shape[0] != 1:
        raise DimensionMismatch(f"{spec.family} uses a single shared lengthscale")
    return a, b, ell


def _sqdist(a, b) -> jnp.ndarray:
    """Clamped pairwise squared distances between rows of a and b."""
    a2 = jnp.sum(a * a, axis=1)[:, None]
    b2 = jnp.sum(b * b, axis=1)[None, :]
    d2 = a2 + b2 - 2.0 * (a @ b.T)
    return jnp.maximum(d2, 0.0)


def cross_cov(spec: KernelSpec, a, b) -> jnp.ndarray:
    """Covariance matrix with entries k(a_i, b_j)."""
    a, b, ell = _check_inputs(spec, a, b)
    if spec.family in (SQEXP, SQEXP_ARD):
        d2 = _sqdist(a / ell, b / ell)
        return spec.amplitude_sq * jnp.exp(-0.5 * d2)
    # matern32, common lengthscale
    r = jnp.sqrt(jnp.maximum(_sqdist(a, b), _R2_FLOOR)) / ell[0]
    z = jnp.sqrt(3.0) * r
    return spec.amplitude_sq * (1.0 + z) * jnp.exp(-z)


def diag_cov(spec: KernelSpec, a) -> jnp.ndarray:
    """Diagonal k(a_i, a_i); constant amplitude for the stationary families."""
    a, _, _ = _check_inputs(spec, a)
    return spec.amplitude_sq * jnp.ones(a.shape[0])
