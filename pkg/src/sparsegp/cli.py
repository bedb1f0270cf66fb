"""Command-line front end.

Subcommands: fit, predict, compare-bounds, experiment, gen-data.
Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .datasets import (
    from_raw,
    load_csv,
    make_poisson_toy,
    make_snelson_like,
    make_synthetic_regression,
    save_csv,
)
from .errors import (
    ConfigError,
    EmptyDataset,
    NonFiniteObjective,
    ParseError,
    SingularMatrix,
    SparseGpError,
)
from .exact import build_exact, exact_log_marginal
from .experiments import (
    ExperimentConfig,
    fit_result_from_json,
    fit_result_to_json,
    run_experiment,
    write_json,
)
from .kernels import KernelSpec
from .sgpr import SparseModel, build_cache, elbo_sgpr, elbo_sgpr_artemev, elbo_sgpr_new
from .training import TrainConfig, fit, kmeans_init, predict_from_fit


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); config errors are exit 1
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="sparsegp", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out", type=str, default=None, help="output directory or file")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="train one method on one dataset")
    p_fit.add_argument("--config", required=True, help="JSON: {dataset: {...}, train: {...}}")

    p_pred = sub.add_parser("predict", help="predict from a saved fit")
    p_pred.add_argument("--model", required=True, help="fit JSON written by `fit`")
    p_pred.add_argument("--data", required=True, help="CSV of inputs (target column ignored)")
    p_pred.add_argument("--target", default=None, help="target column to drop, if present")
    p_pred.add_argument("--no-header", action="store_true")

    p_cmp = sub.add_parser(
        "compare-bounds", help="evaluate all collapsed bounds and the exact value at fixed params"
    )
    p_cmp.add_argument("--config", required=True, help="JSON: {dataset: {...}, model: {...}}")

    p_exp = sub.add_parser("experiment", help="run a method grid over repeated splits")
    p_exp.add_argument("--config", required=True, help="experiment JSON config")

    p_gen = sub.add_parser("gen-data", help="write one of the bundled/synthetic datasets")
    p_gen.add_argument("--kind", required=True, choices=["snelson_like", "poisson_toy", "synthetic"])
    p_gen.add_argument("--n", type=int, default=None)
    p_gen.add_argument("--d", type=int, default=2)
    return parser


def _load_json(path) -> dict:
    try:
        with open(path) as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _dataset_from_config(spec: dict, seed: int):
    from .experiments import load_experiment_dataset

    x, y, counts = load_experiment_dataset(spec, seed)
    return from_raw(x, y, counts=counts, name=spec.get("kind", "data"))


def _cmd_fit(args) -> int:
    raw = _load_json(args.config)
    if "dataset" not in raw or "train" not in raw:
        raise ConfigError("fit config needs 'dataset' and 'train' sections")
    seed = args.seed if args.seed is not None else raw["train"].get("seed", 0)
    data = _dataset_from_config(raw["dataset"], seed)
    cfg = TrainConfig.from_dict({**raw["train"], "seed": seed})
    result = fit(cfg, data)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"fit_{cfg.method}.json"
    write_json(out_path, fit_result_to_json(result))
    print(f"wrote {out_path} (final bound {result.final_bound:.6f}, aborted={result.aborted})")
    return 0


def _cmd_predict(args) -> int:
    payload = _load_json(args.model)
    result = fit_result_from_json(payload)
    target = args.target
    if target is not None:
        ds = load_csv(args.data, target, header=not args.no_header)
        x_raw = ds.x + ds.x_means
    else:
        rows = np.loadtxt(args.data, delimiter=",", skiprows=0 if args.no_header else 1, ndmin=2)
        x_raw = rows
    mean, var = predict_from_fit(result, x_raw)
    out_path = Path(args.out or "predictions.csv")
    save_rows = np.column_stack([x_raw, mean, var])
    header = ",".join([f"x{i}" for i in range(x_raw.shape[1])] + ["mean", "variance"])
    np.savetxt(out_path, save_rows, delimiter=",", header=header, comments="")
    print(f"wrote {out_path}")
    return 0


def _cmd_compare_bounds(args) -> int:
    raw = _load_json(args.config)
    if "dataset" not in raw or "model" not in raw:
        raise ConfigError("compare-bounds config needs 'dataset' and 'model' sections")
    seed = args.seed if args.seed is not None else raw.get("seed", 0)
    data = _dataset_from_config(raw["dataset"], seed)
    mspec = raw["model"]
    kernel = KernelSpec.from_config(mspec["kernel"])
    noise_var = float(mspec["noise_var"])
    if "inducing" in mspec:
        z = np.asarray(mspec["inducing"], dtype=float)
    else:
        z = kmeans_init(data.x, int(mspec.get("num_inducing", 8)), seed=seed)
    model = SparseModel(kernel, noise_var, z, data)
    cache = build_cache(model)
    reports = {
        "sgpr": elbo_sgpr(model, cache).to_json_dict(),
        "sgpr_artemev": elbo_sgpr_artemev(model, cache).to_json_dict(),
        "sgpr_new": elbo_sgpr_new(model, cache).to_json_dict(),
    }
    state = build_exact(kernel, noise_var, data.x, data.y)
    reports["exact_log_marginal"] = float(exact_log_marginal(state))
    text = json.dumps(reports, sort_keys=True, indent=1)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "bounds.json").write_text(text + "\n")
    print(text)
    return 0


def _cmd_experiment(args) -> int:
    raw = _load_json(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw["out_dir"] = args.out
    config = ExperimentConfig.from_dict(raw)
    out = run_experiment(config)
    print(f"experiment {config.name} finished; reports in {out}")
    return 0


def _cmd_gen_data(args) -> int:
    seed = args.seed if args.seed is not None else 0
    if args.kind == "snelson_like":
        ds = make_snelson_like(n=args.n or 40, seed=seed)
    elif args.kind == "poisson_toy":
        ds = make_poisson_toy(seed=seed, n=args.n or 50)
    else:
        ds = make_synthetic_regression(n=args.n or 2000, d=args.d, seed=seed)
    out_path = Path(args.out or f"{args.kind}.csv")
    save_csv(out_path, ds.x + ds.x_means, ds.denormalize_y(ds.y))
    print(f"wrote {out_path} ({ds.n} rows)")
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "compare-bounds": _cmd_compare_bounds,
    "experiment": _cmd_experiment,
    "gen-data": _cmd_gen_data,
}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (SingularMatrix, NonFiniteObjective, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ParseError, EmptyDataset, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except SparseGpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
