"""Sparse variational Gaussian-process regression with tightened evidence
lower bounds, an exact-GP baseline, stochastic/minibatch training, a Poisson
count-regression extension, and an experiment CLI.

All numerics run in float64; the jax precision flag is set here, before any
array is created, so importing any submodule goes through this package first.
"""

import jax as _jax

_jax.config.update("jax_enable_x64", True)

from . import errors  # noqa: E402
from .datasets import (  # noqa: E402
    Dataset,
    from_raw,
    load_csv,
    make_poisson_toy,
    make_snelson_like,
    make_synthetic_regression,
    split_dataset,
)
from .exact import ExactGpState, build_exact, exact_log_marginal, exact_predict  # noqa: E402
from .experiments import (  # noqa: E402
    ExperimentConfig,
    Metrics,
    evaluate,
    run_experiment,
)
from .kernels import KernelSpec, cross_cov, diag_cov  # noqa: E402
from .linalg import SpdFactor, cholesky, logdet, solve_triangular  # noqa: E402
from .poisson import (  # noqa: E402
    MarginalQfi,
    elbo_nonconjugate,
    elbo_nonconjugate_minibatch,
    expected_poisson_loglik,
    gauss_hermite_expected,
    marginal_qfi,
)
from .sgpr import (  # noqa: E402
    BoundReport,
    NystromCache,
    OptimalQu,
    SparseModel,
    build_cache,
    dtc_log_likelihood,
    elbo_sgpr,
    elbo_sgpr_artemev,
    elbo_sgpr_new,
    kl_qfu_pfu,
    optimal_qu,
    optimal_v,
    sparse_predict,
)
from .svgp import (  # noqa: E402
    GaussianVariational,
    elbo_svgp_minibatch,
    elbo_svgp_uncollapsed,
    expected_gaussian_loglik,
    kl_qu_pu,
)
from .training import (  # noqa: E402
    AdamState,
    FitResult,
    ParameterMap,
    ParamField,
    TrainConfig,
    adam_step,
    fd_gradient,
    fit,
    gradient,
    init_adam,
    kmeans_init,
    predict_from_fit,
)

__all__ = [
    "AdamState",
    "BoundReport",
    "Dataset",
    "ExactGpState",
    "ExperimentConfig",
    "FitResult",
    "GaussianVariational",
    "KernelSpec",
    "MarginalQfi",
    "Metrics",
    "NystromCache",
    "OptimalQu",
    "ParamField",
    "ParameterMap",
    "SparseModel",
    "SpdFactor",
    "TrainConfig",
    "adam_step",
    "build_cache",
    "build_exact",
    "cholesky",
    "cross_cov",
    "diag_cov",
    "dtc_log_likelihood",
    "elbo_nonconjugate",
    "elbo_nonconjugate_minibatch",
    "elbo_sgpr",
    "elbo_sgpr_artemev",
    "elbo_sgpr_new",
    "elbo_svgp_minibatch",
    "elbo_svgp_uncollapsed",
    "errors",
    "evaluate",
    "exact_log_marginal",
    "exact_predict",
    "expected_gaussian_loglik",
    "expected_poisson_loglik",
    "fd_gradient",
    "fit",
    "from_raw",
    "gauss_hermite_expected",
    "gradient",
    "init_adam",
    "kl_qfu_pfu",
    "kl_qu_pu",
    "kmeans_init",
    "load_csv",
    "logdet",
    "make_poisson_toy",
    "make_snelson_like",
    "make_synthetic_regression",
    "marginal_qfi",
    "optimal_qu",
    "optimal_v",
    "predict_from_fit",
    "run_experiment",
    "solve_triangular",
    "sparse_predict",
    "split_dataset",
]
