"""Parameter transforms, gradient machinery, Adam, k-means initialization,
and the training loops for every method.

Positive scales (noise/amplitude/lengthscale square roots, factor diagonals,
the residual scale v) live in unconstrained space through a softplus
bijection; everything else is free.  Gradients come from reverse-mode
differentiation of the bound composed with the transforms; a central
finite-difference reference with the same call signature is kept for
verification.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, replace

import jax
import jax.numpy as jnp
import numpy as np

from .datasets import Dataset
from .errors import ConfigError, DimensionMismatch, MTooLarge, NonFiniteObjective
from .exact import build_exact, exact_log_marginal, exact_predict
from .kernels import SQEXP, SQEXP_ARD, FAMILIES, KernelSpec
from .poisson import elbo_nonconjugate, elbo_nonconjugate_minibatch
from .sgpr import (
    SparseModel,
    build_cache,
    elbo_sgpr,
    elbo_sgpr_artemev,
    elbo_sgpr_new,
    optimal_qu,
    optimal_v,
    sparse_predict,
)
from .svgp import CLASSIC, NEW, GaussianVariational, elbo_svgp_minibatch, elbo_svgp_uncollapsed

COLLAPSED_METHODS = {"sgpr": elbo_sgpr, "sgpr_new": elbo_sgpr_new, "sgpr_artemev": elbo_sgpr_artemev}
STOCHASTIC_METHODS = {"svgp": CLASSIC, "svgp_new": NEW}
POISSON_METHODS = ("svgp_poisson", "svgp_poisson_new")
METHODS = ("exact",) + tuple(COLLAPSED_METHODS) + tuple(STOCHASTIC_METHODS) + POISSON_METHODS

# noise stddev is floored in constrained space to keep exact interpolation
# from blowing up the objective
NOISE_STD_FLOOR = 1e-3
# fixed relative jitter on K_uu inside differentiated objectives (no retries
# are possible under tracing)
TRAIN_REL_JITTER = 1e-6

DEFAULT_INIT_SIGMA = 0.51
DEFAULT_INIT_AMPLITUDE = 0.69
DEFAULT_INIT_LENGTHSCALE = 1.0


# ---------------------------------------------------------------------------
# transforms


def softplus(x):
    return jnp.logaddexp(x, 0.0)


def softplus_inv(y):
    """Inverse of log(1 + e^x); stable for small and large arguments."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        small = np.log(np.expm1(np.minimum(y, 30.0)))
    return np.where(y > 30.0, y, small)


@dataclass(frozen=True)
class ParamField:
    """One named block of the flat unconstrained vector."""

    name: str
    shape: tuple
    transform: str = "free"  # free | positive | tril
    minimum: float = 0.0

    @property
    def size(self) -> int:
        if self.transform == "tril":
            m = self.shape[0]
            return m * (m + 1) // 2
        return int(np.prod(self.shape, dtype=int)) if self.shape else 1


class ParameterMap:
    """Flat unconstrained vector <-> dict of constrained values.

    The map owns the field order, the slices into the vector, and the
    bijections, so constrain(unconstrain(p)) round-trips exactly up to
    floating point.
    """

    def __init__(self, fields: list[ParamField]):
        self.fields = list(fields)
        self.slices: dict[str, slice] = {}
        offset = 0
        for f in self.fields:
            self.slices[f.name] = slice(offset, offset + f.size)
            offset += f.size
        self.total_size = offset

    def unconstrain(self, values: dict) -> np.ndarray:
        vec = np.zeros(self.total_size)
        for f in self.fields:
            val = np.asarray(values[f.name], dtype=float)
            if f.transform == "free":
                raw = val.reshape(-1)
            elif f.transform == "positive":
                raw = softplus_inv(val - f.minimum).reshape(-1)
            else:  # tril
                m = f.shape[0]
                rows, cols = np.tril_indices(m)
                flat = val[rows, cols]
                raw = np.where(rows == cols, softplus_inv(flat), flat)
            vec[self.slices[f.name]] = raw
        return vec

    def constrain(self, vector) -> dict:
        vector = jnp.asarray(vector)
        out = {}
        for f in self.fields:
            raw = vector[self.slices[f.name]]
            if f.transform == "free":
                out[f.name] = raw.reshape(f.shape) if f.shape else raw[0]
            elif f.transform == "positive":
                val = f.minimum + softplus(raw)
                out[f.name] = val.reshape(f.shape) if f.shape else val[0]
            else:
                m = f.shape[0]
                rows, cols = np.tril_indices(m)
                vals = jnp.where(rows == cols, softplus(raw), raw)
                out[f.name] = jnp.zeros((m, m)).at[(rows, cols)].set(vals)
        return out


# ---------------------------------------------------------------------------
# gradients


def gradient(objective, params) -> np.ndarray:
    """Gradient of a scalar objective at an unconstrained parameter vector."""
    params = np.asarray(params, dtype=float)
    value, grad = jax.value_and_grad(lambda p: jnp.asarray(objective(p)).sum())(
        jnp.asarray(params)
    )
    grad = np.asarray(grad)
    if not np.isfinite(float(value)):
        raise NonFiniteObjective("objective is not finite at the given parameters")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteObjective("gradient is not finite")
    return grad


def fd_gradient(objective, params, rel_step: float = 1e-5) -> np.ndarray:
    """Central finite differences with h = rel_step * max(1, |p_i|); the
    reference any faster gradient path must match."""
    params = np.asarray(params, dtype=float)
    grad = np.zeros_like(params)
    for i in range(params.size):
        h = rel_step * max(1.0, abs(params[i]))
        up, dn = params.copy(), params.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (float(objective(up)) - float(objective(dn))) / (2.0 * h)
    return grad


# ---------------------------------------------------------------------------
# Adam (ascent)


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step: int
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(size: int, learning_rate: float) -> AdamState:
    return AdamState(
        first_moment=np.zeros(size), second_moment=np.zeros(size), step=0,
        learning_rate=learning_rate,
    )


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray):
    """One ascent step; returns the advanced state and parameters."""
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if params.shape != grad.shape or params.shape != state.first_moment.shape:
        raise DimensionMismatch("params, grad and moments must share a shape")
    t = state.step + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad**2
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params + state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = replace(state, first_moment=m, second_moment=v, step=t)
    return new_state, new_params


# ---------------------------------------------------------------------------
# k-means


def kmeans_init(x, m: int, max_iters: int = 30, seed: int = 0) -> np.ndarray:
    """Lloyd's algorithm seeded from a random training subset.

    Empty clusters are reseeded at the point currently farthest from its
    assigned center.  Deterministic for a fixed seed.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    if m > n:
        raise MTooLarge(f"asked for {m} centers from {n} points")
    if m == n:
        return x.copy()
    rng = np.random.default_rng(seed)
    centers = x[np.sort(rng.choice(n, size=m, replace=False))].copy()
    assign = np.full(n, -1)
    for _ in range(max_iters):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        point_d2 = d2[np.arange(n), new_assign]
        for j in range(m):
            members = new_assign == j
            if members.any():
                centers[j] = x[members].mean(axis=0)
            else:
                far = int(point_d2.argmax())
                centers[j] = x[far]
                new_assign[far] = j
                point_d2[far] = 0.0
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return centers


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class TrainConfig:
    """Everything one training run needs besides the data."""

    method: str
    kernel_family: str = SQEXP
    num_inducing: int = 8
    iters: int = 2000
    epochs: int = 100
    batch_size: int | None = None
    learning_rate: float = 0.01
    seed: int = 0
    train_inducing: bool = True
    init_sigma: float = DEFAULT_INIT_SIGMA
    init_amplitude: float = DEFAULT_INIT_AMPLITUDE
    init_lengthscale: float = DEFAULT_INIT_LENGTHSCALE
    init_v: float = 1.0
    log_every: int = 10
    kmeans_iters: int = 30

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.kernel_family not in FAMILIES:
            raise ConfigError(f"unknown kernel family {self.kernel_family!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, cfg: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(cfg) - known
        if extra:
            raise ConfigError(f"unknown training config keys: {sorted(extra)}")
        return cls(**cfg)


@dataclass
class FitResult:
    """Trained parameters plus traces; self-contained for later prediction."""

    method: str
    config: TrainConfig
    params: dict
    unconstrained: np.ndarray
    fixed_inducing: np.ndarray | None
    trace_steps: list
    trace_bound: list
    trace_sigma2: list
    v_hist: np.ndarray | None
    final_bound: float
    aborted: bool
    wall_clock: float
    train_x: np.ndarray
    train_y: np.ndarray
    x_means: np.ndarray
    y_mean: float
    counts: bool

    @property
    def inducing(self) -> np.ndarray | None:
        if "inducing" in self.params:
            return np.asarray(self.params["inducing"])
        return self.fixed_inducing

    def kernel(self) -> KernelSpec:
        return KernelSpec(
            self.config.kernel_family,
            float(self.params["amplitude"]) ** 2,
            np.asarray(self.params["lengthscales"], dtype=float),
        )

    def noise_var(self) -> float:
        return float(self.params["sigma"]) ** 2 if "sigma" in self.params else 0.0


def _is_poisson(method: str) -> bool:
    return method in POISSON_METHODS


def _is_stochastic(method: str) -> bool:
    return method in STOCHASTIC_METHODS or _is_poisson(method)


def build_parameter_map(config: TrainConfig, data: Dataset):
    """Parameter fields, initial constrained values, and the fixed (untrained)
    pieces for a method."""
    d = data.dim
    k = d if config.kernel_family == SQEXP_ARD else 1
    fields = []
    init: dict = {}
    fixed: dict = {}

    if not _is_poisson(config.method):
        fields.append(ParamField("sigma", (), "positive", minimum=NOISE_STD_FLOOR))
        init["sigma"] = config.init_sigma
    fields.append(ParamField("amplitude", (), "positive"))
    init["amplitude"] = config.init_amplitude
    fields.append(ParamField("lengthscales", (k,), "positive"))
    init["lengthscales"] = np.full(k, config.init_lengthscale)

    if config.method != "exact":
        m = min(config.num_inducing, data.n)
        z0 = kmeans_init(data.x, m, max_iters=config.kmeans_iters, seed=config.seed)
        if config.train_inducing:
            fields.append(ParamField("inducing", (m, d), "free"))
            init["inducing"] = z0
        else:
            fixed["inducing"] = z0
        if _is_stochastic(config.method):
            fields.append(ParamField("qu_mean", (m,), "free"))
            init["qu_mean"] = np.zeros(m)
            fields.append(ParamField("qu_factor", (m, m), "tril"))
            init["qu_factor"] = np.eye(m)
        if config.method == "svgp_poisson_new":
            fields.append(ParamField("v", (), "positive"))
            init["v"] = config.init_v
    return ParameterMap(fields), init, fixed


def _make_objective(config: TrainConfig, data: Dataset, pmap: ParameterMap, fixed: dict):
    """Objective (and minibatch objective) as pure functions of the
    unconstrained vector, safe to jit and differentiate."""
    method = config.method
    family = config.kernel_family

    def _model(c):
        kernel = KernelSpec(family, c["amplitude"] ** 2, c["lengthscales"])
        noise = c["sigma"] ** 2 if "sigma" in c else 1.0
        z = c.get("inducing", fixed.get("inducing"))
        return SparseModel(kernel, noise, z, data)

    def _qu(c):
        return GaussianVariational(c["qu_mean"], c["qu_factor"], whitened=True)

    if method == "exact":

        def objective(vec):
            c = pmap.constrain(vec)
            kernel = KernelSpec(family, c["amplitude"] ** 2, c["lengthscales"])
            state = build_exact(kernel, c["sigma"] ** 2, data.x, data.y, retry=False)
            return exact_log_marginal(state)

        return objective, None

    def _cache(model, rows=None):
        jitter = TRAIN_REL_JITTER * model.kernel.amplitude_sq
        return build_cache(model, rows=rows, base_jitter=jitter, retry=False)

    if method in COLLAPSED_METHODS:
        bound_fn = COLLAPSED_METHODS[method]

        def objective(vec):
            c = pmap.constrain(vec)
            model = _model(c)
            return bound_fn(model, _cache(model)).bound

        return objective, None

    if method in STOCHASTIC_METHODS:
        variant = STOCHASTIC_METHODS[method]

        def objective(vec):
            c = pmap.constrain(vec)
            model = _model(c)
            return elbo_svgp_uncollapsed(_qu(c), model, _cache(model), variant).bound

        def batch_objective(vec, rows):
            c = pmap.constrain(vec)
            model = _model(c)
            return elbo_svgp_minibatch(_qu(c), model, _cache(model, rows), rows, variant)

        return objective, batch_objective

    # poisson methods

    def objective(vec):
        c = pmap.constrain(vec)
        model = _model(c)
        v = c.get("v", 1.0)
        return elbo_nonconjugate(_qu(c), model, _cache(model), v).bound

    def batch_objective(vec, rows):
        c = pmap.constrain(vec)
        model = _model(c)
        v = c.get("v", 1.0)
        return elbo_nonconjugate_minibatch(_qu(c), model, _cache(model, rows), rows, v)

    return objective, batch_objective


def fit(config: TrainConfig, data: Dataset) -> FitResult:
    """Train one method on one dataset with Adam.

    Full-batch methods run ``iters`` steps and log every ``log_every``;
    stochastic methods run ``epochs`` epochs of shuffled without-replacement
    minibatches and log the full-data bound once per epoch.  A non-finite
    objective aborts the run, keeping the last finite parameters.
    """
    if _is_poisson(config.method) and not data.counts:
        raise ConfigError(f"{config.method} needs count targets")
    if config.method != "exact" and config.num_inducing < 1:
        raise ConfigError("num_inducing must be >= 1")

    start = time.perf_counter()
    pmap, init, fixed = build_parameter_map(config, data)
    vec = pmap.unconstrain(init)
    objective, batch_objective = _make_objective(config, data, pmap, fixed)

    value_and_grad = jax.jit(jax.value_and_grad(lambda p: jnp.asarray(objective(p))))
    full_value = jax.jit(lambda p: jnp.asarray(objective(p)))
    batch_vg = None
    if batch_objective is not None and config.batch_size is not None:
        batch_vg = jax.jit(
            jax.value_and_grad(lambda p, rows: jnp.asarray(batch_objective(p, rows)))
        )

    adam = init_adam(pmap.total_size, config.learning_rate)
    steps: list[int] = []
    bounds: list[float] = []
    sigma2s: list[float] = []
    aborted = False

    def _log(step_idx: int, value: float):
        steps.append(step_idx)
        bounds.append(float(value))
        if "sigma" in pmap.slices:
            sigma2s.append(float(pmap.constrain(vec)["sigma"]) ** 2)

    def _ascend(value, grad):
        """Apply one Adam ascent step; False aborts on a non-finite value."""
        nonlocal adam, vec, aborted
        g = np.asarray(grad)
        if not math.isfinite(float(value)) or not np.all(np.isfinite(g)):
            aborted = True
            return False
        adam, vec = adam_step(adam, vec, g)
        return True

    if not _is_stochastic(config.method) or config.batch_size is None:
        total = config.iters if not _is_stochastic(config.method) else config.epochs
        for step in range(total):
            value, grad = value_and_grad(jnp.asarray(vec))
            if step % config.log_every == 0 and math.isfinite(float(value)):
                _log(step, float(value))
            if not _ascend(value, grad):
                break
        if not aborted:
            _log(total, float(full_value(jnp.asarray(vec))))
    else:
        rng = np.random.default_rng(config.seed)
        n = data.n
        bsz = min(config.batch_size, n)
        _log(0, float(full_value(jnp.asarray(vec))))
        for epoch in range(config.epochs):
            perm = rng.permutation(n)
            for lo in range(0, n, bsz):
                rows = jnp.asarray(perm[lo : lo + bsz])
                value, grad = batch_vg(jnp.asarray(vec), rows)
                if not _ascend(value, grad):
                    break
            if aborted:
                break
            _log(epoch + 1, float(full_value(jnp.asarray(vec))))

    constrained = {k: np.asarray(v) for k, v in pmap.constrain(vec).items()}
    final_bound = bounds[-1] if bounds else float("nan")

    v_hist = None
    if config.method == "sgpr_new" and not aborted:
        kernel = KernelSpec(
            config.kernel_family, float(constrained["amplitude"]) ** 2, constrained["lengthscales"]
        )
        model = SparseModel(
            kernel, float(constrained["sigma"]) ** 2,
            constrained.get("inducing", fixed.get("inducing")), data,
        )
        v_hist = np.asarray(optimal_v(build_cache(model), model.noise_var))

    return FitResult(
        method=config.method,
        config=config,
        params=constrained,
        unconstrained=np.asarray(vec),
        fixed_inducing=fixed.get("inducing"),
        trace_steps=steps,
        trace_bound=bounds,
        trace_sigma2=sigma2s,
        v_hist=v_hist,
        final_bound=final_bound,
        aborted=aborted,
        wall_clock=time.perf_counter() - start,
        train_x=np.asarray(data.x),
        train_y=np.asarray(data.y),
        x_means=np.asarray(data.x_means),
        y_mean=float(data.y_mean),
        counts=data.counts,
    )


# ---------------------------------------------------------------------------
# prediction from a finished fit


def _train_dataset(fit_result: FitResult) -> Dataset:
    return Dataset(
        x=fit_result.train_x,
        y=fit_result.train_y,
        x_means=fit_result.x_means,
        y_mean=fit_result.y_mean,
        counts=fit_result.counts,
        name="train",
    )


def predict_from_fit(fit_result: FitResult, x_raw, include_noise: bool = True, chunk: int = 512):
    """Predictive mean and variance at raw-scale inputs.

    Gaussian methods return moments of the target predictive in the original
    output scale; Poisson methods return moments of the latent log-intensity
    (counts are never centered).
    """
    data = _train_dataset(fit_result)
    xs = data.normalize_x(x_raw)
    method = fit_result.method
    kernel = fit_result.kernel()

    means, variances = [], []
    if method == "exact":
        state = build_exact(kernel, fit_result.noise_var(), data.x, data.y)
        for lo in range(0, xs.shape[0], chunk):
            mu, cov = exact_predict(state, xs[lo : lo + chunk], include_noise=include_noise)
            means.append(np.asarray(mu))
            variances.append(np.asarray(jnp.diag(cov)))
    else:
        model = SparseModel(kernel, fit_result.noise_var() or 1.0, fit_result.inducing, data)
        cache = build_cache(model)
        if method in COLLAPSED_METHODS:
            qu = optimal_qu(model, cache)
        else:
            qu = GaussianVariational(
                fit_result.params["qu_mean"], fit_result.params["qu_factor"], whitened=True
            )
        add_noise = include_noise and not _is_poisson(method)
        for lo in range(0, xs.shape[0], chunk):
            mu, cov = sparse_predict(
                model, qu, xs[lo : lo + chunk], cache=cache, include_noise=add_noise
            )
            means.append(np.asarray(mu))
            variances.append(np.asarray(jnp.diag(cov)))

    mean = np.concatenate(means)
    var = np.maximum(np.concatenate(variances), 0.0)
    if not fit_result.counts:
        mean = mean + fit_result.y_mean
    return mean, var
