"""Dataset container, CSV ingestion, generators for the bundled toy problems,
and train/validation/test splitting.

Inputs and regression targets are centered (zero mean); the removed means are
kept on the dataset so predictions can be reported in the original scale.
Count targets are never centered.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, ParseError

_BUNDLED_1D = "toy1d.csv"


@dataclass(frozen=True)
class Dataset:
    """Centered inputs/targets plus the normalization record.

    ``x`` is (N, d), ``y`` is (N,).  ``x_means`` and ``y_mean`` are the
    training-set means that were subtracted; for count targets ``y_mean`` is
    0 and ``y`` holds the raw counts.
    """

    x: np.ndarray
    y: np.ndarray
    x_means: np.ndarray
    y_mean: float
    name: str = ""
    counts: bool = False

    def __post_init__(self):
        if self.x.shape[0] != self.y.shape[0]:
            raise DimensionMismatch(
                f"{self.x.shape[0]} inputs but {self.y.shape[0]} targets"
            )

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def denormalize_y(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values) + self.y_mean

    def normalize_x(self, x_raw: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(x_raw, dtype=float)) - self.x_means


def from_raw(x, y, name: str = "", counts: bool = False) -> Dataset:
    """Center raw arrays and record the removed means."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] == 1 and np.asarray(y).size != 1:
        x = x.T
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape[0] == 0:
        raise EmptyDataset("no rows")
    x_means = x.mean(axis=0)
    y_mean = 0.0 if counts else float(y.mean())
    return Dataset(
        x=x - x_means, y=y - y_mean, x_means=x_means, y_mean=y_mean, name=name, counts=counts
    )


def load_csv(path, target_column, header: bool = True, name: str = "") -> Dataset:
    """Read a numeric CSV into a centered dataset.

    ``target_column`` selects the target by header name or by integer index.
    Rows containing NaN/Inf or non-numeric fields are dropped; the number of
    rejected rows is reported via a warning on stderr.
    """
    import sys

    try:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            rows = [r for r in reader if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise EmptyDataset(f"{path} holds no rows")

    columns = None
    if header:
        columns = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise EmptyDataset(f"{path} holds a header but no data rows")

    if isinstance(target_column, str):
        if columns is None:
            raise ParseError("target column given by name but the file has no header")
        try:
            target_idx = columns.index(target_column)
        except ValueError:
            raise ParseError(f"no column named {target_column!r} in {columns}") from None
    else:
        target_idx = int(target_column)

    width = len(rows[0])
    if not (-width <= target_idx < width):
        raise ParseError(f"target column {target_idx} out of range for {width} columns")
    target_idx %= width

    parsed = []
    rejected = 0
    for raw in rows:
        if len(raw) != width:
            rejected += 1
            continue
        try:
            vals = [float(c) for c in raw]
        except ValueError:
            rejected += 1
            continue
        if not all(np.isfinite(vals)):
            rejected += 1
            continue
        parsed.append(vals)
    if rejected:
        print(f"load_csv: dropped {rejected} non-numeric/non-finite rows", file=sys.stderr)
    if not parsed:
        raise EmptyDataset(f"{path}: every row was rejected")

    data = np.asarray(parsed, dtype=float)
    y = data[:, target_idx]
    x = np.delete(data, target_idx, axis=1)
    if x.shape[1] == 0:
        raise ParseError("no feature columns left after removing the target")
    return from_raw(x, y, name=name or str(path))


def save_csv(path, x: np.ndarray, y: np.ndarray, target_name: str = "y") -> None:
    """Write features plus target with a header; inverse of :func:`load_csv`."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([f"x{i}" for i in range(x.shape[1])] + [target_name])
        for xi, yi in zip(x, y):
            writer.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


def _load_bundled_1d() -> tuple[np.ndarray, np.ndarray]:
    ref = resources.files("sparsegp").joinpath("data", _BUNDLED_1D)
    with resources.as_file(ref) as path:
        data = np.loadtxt(path, delimiter=",", skiprows=1)
    return data[:, :1], data[:, 1]


def make_snelson_like(n: int = 40, seed: int = 0) -> Dataset:
    """Seeded subsample of the bundled 200-point wiggly 1-D regression set."""
    x, y = _load_bundled_1d()
    total = x.shape[0]
    n = min(int(n), total)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(total, size=n, replace=False))
    return from_raw(x[idx], y[idx], name=f"snelson_like_{n}")


def make_poisson_toy(seed: int = 0, n: int = 50) -> Dataset:
    """Counts on an equispaced 1-D grid over [-10, 10] with intensity
    3.5 + 3 sin(x)."""
    rng = np.random.default_rng(seed)
    x = np.linspace(-10.0, 10.0, n)[:, None]
    lam = 3.5 + 3.0 * np.sin(x[:, 0])
    y = rng.poisson(lam).astype(float)
    return from_raw(x, y, name="poisson_toy", counts=True)


def make_synthetic_regression(n: int = 2000, d: int = 2, seed: int = 0) -> Dataset:
    """Smooth nonlinear regression surface plus Gaussian noise; used by the
    desk-scale stochastic-training checks."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-3.0, 3.0, size=(n, d))
    f = np.sin(x[:, 0]) + 0.5 * np.cos(2.0 * x[:, d - 1]) + 0.25 * x.sum(axis=1)
    y = f + 0.3 * rng.standard_normal(n)
    return from_raw(x, y, name=f"synthetic_{n}x{d}")


@dataclass(frozen=True)
class SplitDatasets:
    train: Dataset
    val: Dataset | None
    test: Dataset | None
    train_idx: np.ndarray = field(repr=False, default=None)
    val_idx: np.ndarray = field(repr=False, default=None)
    test_idx: np.ndarray = field(repr=False, default=None)


def split_dataset(
    x_raw,
    y_raw,
    train_frac: float = 0.8,
    val_frac: float = 0.2,
    seed: int = 0,
    name: str = "",
    counts: bool = False,
) -> SplitDatasets:
    """Shuffle rows into train/test, carve a validation subset out of train,
    and center everything with the training-set means.

    ``train_frac`` is the fraction of all rows used for training plus
    validation; ``val_frac`` is the fraction of that part held out for
    validation.  The same seed always produces the same index partition.
    """
    x_raw = np.atleast_2d(np.asarray(x_raw, dtype=float))
    y_raw = np.asarray(y_raw, dtype=float).reshape(-1)
    n = x_raw.shape[0]
    if not (0.0 < train_frac <= 1.0):
        raise ValueError("train_frac must lie in (0, 1]")
    if not (0.0 <= val_frac < 1.0):
        raise ValueError("val_frac must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_trainval = int(round(train_frac * n))
    trainval, test_idx = perm[:n_trainval], perm[n_trainval:]
    n_val = int(round(val_frac * n_trainval))
    val_idx, train_idx = trainval[:n_val], trainval[n_val:]
    if train_idx.size == 0:
        raise EmptyDataset("split left no training rows")

    x_means = x_raw[train_idx].mean(axis=0)
    y_mean = 0.0 if counts else float(y_raw[train_idx].mean())

    def _subset(idx, tag):
        if idx.size == 0:
            return None
        return Dataset(
            x=x_raw[idx] - x_means,
            y=y_raw[idx] - y_mean,
            x_means=x_means,
            y_mean=y_mean,
            name=f"{name}_{tag}" if name else tag,
            counts=counts,
        )

    return SplitDatasets(
        train=_subset(train_idx, "train"),
        val=_subset(val_idx, "val"),
        test=_subset(test_idx, "test"),
        train_idx=np.sort(train_idx),
        val_idx=np.sort(val_idx),
        test_idx=np.sort(test_idx),
    )
