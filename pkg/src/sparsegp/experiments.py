"""Experiment orchestration: metric computation, method grids over repeated
train/test splits, and report emission.

Outputs are JSON (per repeat, machine-readable) plus CSV tables and trace
files laid out for external plotting.  Everything is deterministic under a
fixed seed, and the JSON writer is byte-stable: keys are sorted and floats go
through repr.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .datasets import (
    Dataset,
    load_csv,
    make_poisson_toy,
    make_snelson_like,
    make_synthetic_regression,
    split_dataset,
)
from .errors import ConfigError, DimensionMismatch, SparseGpError
from .training import FitResult, TrainConfig, fit, predict_from_fit

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Metrics:
    """Mean per-point predictive log density and RMSE, in the original
    output scale."""

    log_lik: float
    rmse: float
    n: int

    def to_dict(self) -> dict:
        return {"log_lik": self.log_lik, "rmse": self.rmse, "n": self.n}


def _poisson_logpmf_table(y, f):
    """log Poisson(y | exp(f)) for broadcastable arrays."""
    from jax.scipy.special import gammaln

    return y * f - np.exp(f) - np.asarray(gammaln(np.asarray(y) + 1.0))


def evaluate(fit_result: FitResult, test: Dataset) -> Metrics:
    """Score a fit on held-out data.

    Gaussian methods use the observation-space predictive density; count
    methods integrate the Poisson pmf over the latent predictive with
    Gauss-Hermite quadrature and use the predictive mean intensity for RMSE.
    """
    if test.dim != fit_result.train_x.shape[1]:
        raise DimensionMismatch(
            f"test dimension {test.dim} differs from training {fit_result.train_x.shape[1]}"
        )
    x_raw = test.x + test.x_means
    y_raw = np.asarray(test.denormalize_y(test.y))

    if fit_result.counts:
        mu, var = predict_from_fit(fit_result, x_raw, include_noise=False)
        nodes, weights = np.polynomial.hermite.hermgauss(50)
        f = mu[:, None] + np.sqrt(2.0 * np.maximum(var, 0.0))[:, None] * nodes[None, :]
        logp = _poisson_logpmf_table(y_raw[:, None], f)
        shift = logp.max(axis=1, keepdims=True)
        dens = (weights[None, :] * np.exp(logp - shift)).sum(axis=1) / math.sqrt(math.pi)
        per_point = np.log(dens) + shift[:, 0]
        rate = np.exp(mu + 0.5 * var)
        rmse = float(np.sqrt(np.mean((rate - y_raw) ** 2)))
    else:
        mean, var = predict_from_fit(fit_result, x_raw, include_noise=True)
        per_point = -0.5 * (_LOG_2PI + np.log(var) + (y_raw - mean) ** 2 / var)
        rmse = float(np.sqrt(np.mean((mean - y_raw) ** 2)))
    return Metrics(log_lik=float(np.mean(per_point)), rmse=rmse, n=test.n)


# ---------------------------------------------------------------------------
# experiment configuration

_CONFIG_SCHEMA = {
    "type": "object",
    "required": ["name", "dataset", "methods"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "repeats": {"type": "integer", "minimum": 1},
        "out_dir": {"type": "string"},
        "dataset": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {
                    "enum": ["csv", "snelson_like", "poisson_toy", "synthetic"]
                },
                "path": {"type": "string"},
                "target": {"type": ["string", "integer"]},
                "header": {"type": "boolean"},
                "n": {"type": "integer", "minimum": 1},
                "d": {"type": "integer", "minimum": 1},
                "counts": {"type": "boolean"},
            },
        },
        "split": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "train_frac": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "val_frac": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            },
        },
        "methods": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "object", "required": ["method"]},
        },
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dataset: dict
    methods: list
    seed: int = 0
    repeats: int = 1
    out_dir: str = "results"
    train_frac: float = 0.8
    val_frac: float = 0.2

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(raw, _CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"bad experiment config: {exc.message}") from exc
        split = raw.get("split", {})
        cfg = cls(
            name=raw["name"],
            dataset=raw["dataset"],
            methods=raw["methods"],
            seed=raw.get("seed", 0),
            repeats=raw.get("repeats", 1),
            out_dir=raw.get("out_dir", "results"),
            train_frac=split.get("train_frac", 0.8),
            val_frac=split.get("val_frac", 0.2),
        )
        for m in cfg.methods:
            TrainConfig.from_dict(_strip_label(m))  # raises ConfigError on unknown keys
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as handle:
            try:
                raw = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)


def _strip_label(method_cfg: dict) -> dict:
    return {k: v for k, v in method_cfg.items() if k != "label"}


def load_experiment_dataset(spec: dict, seed: int):
    """Raw (uncentered) arrays for the configured dataset source."""
    kind = spec["kind"]
    if kind == "csv":
        if "path" not in spec:
            raise ConfigError("csv dataset needs a 'path'")
        ds = load_csv(spec["path"], spec.get("target", -1), header=spec.get("header", True))
        return ds.x + ds.x_means, ds.denormalize_y(ds.y), bool(spec.get("counts", False))
    if kind == "snelson_like":
        ds = make_snelson_like(n=spec.get("n", 40), seed=seed)
        return ds.x + ds.x_means, ds.denormalize_y(ds.y), False
    if kind == "poisson_toy":
        ds = make_poisson_toy(seed=seed, n=spec.get("n", 50))
        return ds.x + ds.x_means, ds.y, True
    if kind == "synthetic":
        ds = make_synthetic_regression(n=spec.get("n", 2000), d=spec.get("d", 2), seed=seed)
        return ds.x + ds.x_means, ds.denormalize_y(ds.y), False
    raise ConfigError(f"unknown dataset kind {kind!r}")


# ---------------------------------------------------------------------------
# serialization helpers


def _jsonify(value):
    if isinstance(value, dict):
        return {k: _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonify(value.tolist())
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    return value


def write_json(path, payload: dict) -> None:
    with open(path, "w") as handle:
        json.dump(_jsonify(payload), handle, sort_keys=True, indent=1)
        handle.write("\n")


def _fit_payload(result: FitResult, metrics: dict) -> dict:
    params = {k: _jsonify(np.asarray(v)) for k, v in result.params.items()}
    payload = {
        "method": result.method,
        "config": result.config.to_dict(),
        "aborted": result.aborted,
        "final_bound": result.final_bound,
        "trace": {
            "step": list(result.trace_steps),
            "bound": list(result.trace_bound),
            "sigma2": list(result.trace_sigma2),
        },
        "params": params,
        "metrics": metrics,
        "normalization": {
            "x_means": _jsonify(result.x_means),
            "y_mean": result.y_mean,
        },
    }
    if result.fixed_inducing is not None:
        payload["fixed_inducing"] = _jsonify(result.fixed_inducing)
    if result.v_hist is not None:
        payload["v_histogram"] = _jsonify(result.v_hist)
    return payload


def fit_result_to_json(result: FitResult, include_data: bool = True) -> dict:
    """Self-contained fit payload; training rows are embedded so prediction
    can run later without the original dataset."""
    payload = _fit_payload(result, metrics={})
    if include_data:
        payload["train_data"] = {
            "x": _jsonify(result.train_x),
            "y": _jsonify(result.train_y),
            "counts": result.counts,
        }
    return payload


def fit_result_from_json(payload: dict) -> FitResult:
    config = TrainConfig.from_dict(payload["config"])
    params = {k: np.asarray(v) for k, v in payload["params"].items()}
    train = payload.get("train_data")
    if train is None:
        raise ConfigError("fit payload holds no embedded training data")
    return FitResult(
        method=payload["method"],
        config=config,
        params=params,
        unconstrained=np.zeros(0),
        fixed_inducing=(
            np.asarray(payload["fixed_inducing"]) if "fixed_inducing" in payload else None
        ),
        trace_steps=payload["trace"]["step"],
        trace_bound=payload["trace"]["bound"],
        trace_sigma2=payload["trace"]["sigma2"],
        v_hist=np.asarray(payload["v_histogram"]) if "v_histogram" in payload else None,
        final_bound=payload["final_bound"],
        aborted=payload["aborted"],
        wall_clock=0.0,
        train_x=np.asarray(train["x"], dtype=float),
        train_y=np.asarray(train["y"], dtype=float),
        x_means=np.asarray(payload["normalization"]["x_means"], dtype=float),
        y_mean=float(payload["normalization"]["y_mean"]),
        counts=bool(train["counts"]),
    )


# ---------------------------------------------------------------------------
# the runner


def _standard_error(values: list) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def run_experiment(config: ExperimentConfig) -> Path:
    """Run every configured method over repeated splits and write reports.

    Per repeat and method: one JSON file with traces, final parameters, and
    metrics.  Afterwards: an aggregate CSV (mean and standard error per
    method) and per-method trace CSVs with one bound/sigma2 column per
    repeat.  Failed repeats are recorded and excluded from aggregates.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    x_raw, y_raw, counts = load_experiment_dataset(config.dataset, config.seed)

    collected: dict[str, list] = {}
    failures: dict[str, int] = {}
    for repeat in range(config.repeats):
        split_seed = int(np.random.default_rng([config.seed, repeat]).integers(2**31))
        parts = split_dataset(
            x_raw,
            y_raw,
            train_frac=config.train_frac,
            val_frac=config.val_frac,
            seed=split_seed,
            name=config.name,
            counts=counts,
        )
        for method_cfg in config.methods:
            cfg = TrainConfig.from_dict(
                {**_strip_label(method_cfg), "seed": method_cfg.get("seed", split_seed)}
            )
            label = method_cfg.get("label", cfg.method)
            try:
                result = fit(cfg, parts.train)
                metrics = {}
                if parts.test is not None:
                    metrics["test"] = evaluate(result, parts.test).to_dict()
                if parts.val is not None:
                    metrics["val"] = evaluate(result, parts.val).to_dict()
            except SparseGpError as exc:
                failures[label] = failures.get(label, 0) + 1
                write_json(
                    out / f"{config.name}_repeat{repeat}_{label}_failed.json",
                    {"method": label, "repeat": repeat, "error": str(exc)},
                )
                continue
            payload = _fit_payload(result, metrics)
            payload["repeat"] = repeat
            payload["split_seed"] = split_seed
            write_json(out / f"{config.name}_repeat{repeat}_{label}.json", payload)
            collected.setdefault(label, []).append((repeat, result, metrics))

    _write_aggregate(out, config, collected, failures)
    _write_traces(out, config, collected)
    return out


def _write_aggregate(out: Path, config: ExperimentConfig, collected, failures) -> None:
    header = [
        "method",
        "repeats_ok",
        "repeats_failed",
        "final_bound_mean",
        "final_bound_se",
        "test_log_lik_mean",
        "test_log_lik_se",
        "test_rmse_mean",
        "test_rmse_se",
        "val_log_lik_mean",
        "val_log_lik_se",
        "val_rmse_mean",
        "val_rmse_se",
    ]
    lines = [",".join(header)]
    labels = sorted(set(collected) | set(failures))
    for label in labels:
        rows = collected.get(label, [])
        cells = [label, str(len(rows)), str(failures.get(label, 0))]
        bound_vals = [r.final_bound for _, r, _ in rows]
        cells += [_fmt(np.mean(bound_vals)) if rows else "", _fmt(_standard_error(bound_vals))]
        for part in ("test", "val"):
            for key in ("log_lik", "rmse"):
                vals = [m[part][key] for _, _, m in rows if part in m]
                cells.append(_fmt(np.mean(vals)) if vals else "")
                cells.append(_fmt(_standard_error(vals)) if vals else "")
        lines.append(",".join(cells))
    (out / f"{config.name}_aggregate.csv").write_text("\n".join(lines) + "\n")


def _fmt(x) -> str:
    return repr(float(x))


def _write_traces(out: Path, config: ExperimentConfig, collected) -> None:
    for label, rows in collected.items():
        if not rows:
            continue
        reps = [r for _, r, _ in rows]
        steps = reps[0].trace_steps
        cols = [f"bound_r{rep}" for rep, _, _ in rows]
        lines = [",".join(["step"] + cols)]
        for i, s in enumerate(steps):
            cells = [str(s)]
            for r in reps:
                cells.append(_fmt(r.trace_bound[i]) if i < len(r.trace_bound) else "")
            lines.append(",".join(cells))
        (out / f"{config.name}_trace_{label}.csv").write_text("\n".join(lines) + "\n")
        if any(r.trace_sigma2 for r in reps):
            lines = [",".join(["step"] + [f"sigma2_r{rep}" for rep, _, _ in rows])]
            for i, s in enumerate(steps):
                cells = [str(s)]
                for r in reps:
                    cells.append(_fmt(r.trace_sigma2[i]) if i < len(r.trace_sigma2) else "")
                lines.append(",".join(cells))
            (out / f"{config.name}_sigma2_{label}.csv").write_text("\n".join(lines) + "\n")
