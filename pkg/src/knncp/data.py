"""Dataset ingestion, normalization, splitting and synthetic generation.

All randomness goes through numpy's ``PCG64`` bit generator seeded with a
``SeedSequence`` built from integer entropy words, e.g. ``(seed, run)``.
This keeps every split reproducible from the top-level seed alone.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DataError

RNG_ALGORITHM = "numpy.PCG64+SeedSequence"


def make_rng(*words: int) -> np.random.Generator:
    """Return a PCG64 generator seeded from the given entropy words."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(w) for w in words])))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Attribute matrix plus one real label per row.

    Arrays are copied and frozen (read-only) at construction.
    """

    attributes: np.ndarray
    labels: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.array(self.attributes, dtype=float)
        y = np.array(self.labels, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DataError(f"attributes must be 2-D, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"{X.shape[0]} attribute rows but {y.shape[0]} labels")
        if X.shape[0] < 1:
            raise DataError("dataset must contain at least one row")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise DataError("dataset contains NaN or infinite values")
        names = self.names
        if names is not None:
            names = tuple(str(n) for n in names)
            if len(names) != X.shape[1]:
                raise DataError(f"{len(names)} names for {X.shape[1]} attributes")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "attributes", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "names", names)

    def __len__(self) -> int:
        return self.attributes.shape[0]

    @property
    def n_features(self) -> int:
        return self.attributes.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.attributes[idx], self.labels[idx], self.names)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, label_column: int | str = -1) -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    A header row is assumed when any cell of the first row is not numeric.
    ``label_column`` is a column name (requires a header) or an integer
    index; negative indices count from the end.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise DataError(f"{path}: file is empty")

    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: header but no data rows")

    width = len(header) if header is not None else len(rows[0])
    first_line = 2 if header is not None else 1
    for offset, row in enumerate(rows):
        if len(row) != width:
            raise DataError(
                f"{path}: row {first_line + offset} has {len(row)} columns, expected {width}"
            )

    if isinstance(label_column, str):
        if header is None or label_column not in header:
            if label_column.lstrip("-").isdigit():
                label_column = int(label_column)
            else:
                raise DataError(f"{path}: no column named {label_column!r}")
        else:
            label_column = header.index(label_column)
    if not -width <= label_column < width:
        raise DataError(f"{path}: label column {label_column} out of range for {width} columns")
    label_column %= width

    values = np.empty((len(rows), width))
    for r, row in enumerate(rows):
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                name = header[c] if header is not None else str(c)
                raise DataError(
                    f"{path}: non-numeric value {cell!r} at row {first_line + r}, column {c} ({name})"
                ) from None

    keep = [c for c in range(width) if c != label_column]
    names = tuple(header[c] for c in keep) if header is not None else None
    return Dataset(values[:, keep], values[:, label_column], names)


def save_csv(dataset: Dataset, path, label_name: str = "y") -> None:
    names = dataset.names or tuple(f"x{j + 1}" for j in range(dataset.n_features))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*names, label_name])
        for x, y in zip(dataset.attributes, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])


@dataclass(frozen=True)
class MinMaxRecord:
    """Per-column minimum and maximum used to rescale attributes."""

    minimum: np.ndarray
    maximum: np.ndarray

    def apply(self, attributes) -> np.ndarray:
        span = self.maximum - self.minimum
        span = np.where(span > 0, span, 1.0)
        # constant columns map to zero
        return (np.asarray(attributes, dtype=float) - self.minimum) / span


def normalize_minmax(dataset: Dataset) -> tuple[Dataset, MinMaxRecord]:
    """Rescale every attribute column to [0, 1]; labels are untouched."""
    X = dataset.attributes
    record = MinMaxRecord(X.min(axis=0), X.max(axis=0))
    return Dataset(record.apply(X), dataset.labels, dataset.names), record


@dataclass(frozen=True)
class SplitPlan:
    folds: int = 10
    runs: int = 10
    seed: int = 0
    calibration_size: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise DataError(f"folds must be >= 2, got {self.folds}")
        if self.runs < 1:
            raise DataError(f"runs must be >= 1, got {self.runs}")
        if self.calibration_size < 0:
            raise DataError("calibration_size must be >= 0")

    def check(self, n: int) -> None:
        """Raise if this plan does not fit a dataset of ``n`` rows."""
        if self.folds > n:
            raise DataError(f"{self.folds} folds requested for {n} rows")
        smallest_train = n - math.ceil(n / self.folds)
        if self.calibration_size and self.calibration_size >= smallest_train:
            raise DataError(
                f"calibration size {self.calibration_size} does not fit a training fold of {smallest_train}"
            )


def default_calibration_size(n_train: int) -> int:
    """Calibration size ``100n - 1`` with ``n`` chosen so q is about a tenth of training.

    Training sets too small for that (q would reach half of them) get
    ``max(1, n_train // 10)`` instead.
    """
    q = 100 * max(1, round(n_train / 1000)) - 1
    return q if q < n_train // 2 else max(1, n_train // 10)


def kfold_split(dataset: Dataset | int, plan: SplitPlan, run_index: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded k-fold partition for one run.

    Returns ``(train_indices, test_indices)`` per fold. Fold sizes differ by
    at most one, the earliest folds taking the remainder.
    """
    n = dataset if isinstance(dataset, int) else len(dataset)
    if plan.folds > n:
        raise DataError(f"{plan.folds} folds requested for {n} rows")
    perm = make_rng(plan.seed, run_index).permutation(n)
    blocks = np.array_split(perm, plan.folds)
    splits = []
    for f, test in enumerate(blocks):
        train = np.concatenate([b for g, b in enumerate(blocks) if g != f])
        splits.append((np.sort(train), np.sort(test)))
    return splits


def holdout_for_k_selection(train_indices, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Hold out a third of ``train_indices`` (rounded down) for validation."""
    train_indices = np.asarray(train_indices)
    n_val = len(train_indices) // 3
    perm = make_rng(seed, 0x6B53454C).permutation(len(train_indices))
    val = np.sort(train_indices[perm[:n_val]])
    fit = np.sort(train_indices[perm[n_val:]])
    return fit, val


# -- synthetic data ---------------------------------------------------------

def _mean_constant(X, value=0.0):
    return np.full(X.shape[0], float(value))


def _mean_linear(X, slope=1.0, intercept=0.0):
    return intercept + slope * X.sum(axis=1)


def _mean_sine(X, amplitude=1.0, frequency=1.0):
    return amplitude * np.sin(frequency * X).sum(axis=1)


def _std_constant(X, value=1.0):
    return np.full(X.shape[0], float(value))


def _std_linear_abs(X, base=0.5, slope=0.1):
    """``base + slope * mean(|x_j|)``: noise grows away from the origin."""
    return base + slope * np.abs(X).mean(axis=1)


def _std_exp(X, base=0.1, rate=0.1):
    return base * np.exp(rate * X.sum(axis=1) / np.sqrt(X.shape[1]))


MEAN_FUNCTIONS: Mapping[str, Callable] = {
    "constant": _mean_constant,
    "linear": _mean_linear,
    "sine": _mean_sine,
}
STD_FUNCTIONS: Mapping[str, Callable] = {
    "constant": _std_constant,
    "linear_abs": _std_linear_abs,
    "exp": _std_exp,
}


@dataclass(frozen=True)
class SyntheticSpec:
    """Normal-model generator: ``y ~ N(mean_fn(x), std_fn(x)**2)``, x uniform in a box."""

    n_examples: int
    d: int
    mean_fn: str = "sine"
    std_fn: str = "linear_abs"
    mean_params: Mapping[str, float] = field(default_factory=dict)
    std_params: Mapping[str, float] = field(default_factory=dict)
    input_low: float = -10.0
    input_high: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.n_examples < 1 or self.d < 1:
            raise DataError("n_examples and d must be positive")
        if self.mean_fn not in MEAN_FUNCTIONS:
            raise DataError(f"unknown mean_fn {self.mean_fn!r}; choose from {sorted(MEAN_FUNCTIONS)}")
        if self.std_fn not in STD_FUNCTIONS:
            raise DataError(f"unknown std_fn {self.std_fn!r}; choose from {sorted(STD_FUNCTIONS)}")
        if not self.input_low < self.input_high:
            raise DataError("input_low must be below input_high")

    def mean(self, X) -> np.ndarray:
        return MEAN_FUNCTIONS[self.mean_fn](np.atleast_2d(X), **self.mean_params)

    def std(self, X) -> np.ndarray:
        return STD_FUNCTIONS[self.std_fn](np.atleast_2d(X), **self.std_params)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    rng = make_rng(spec.seed, 0x53594E54)
    X = rng.uniform(spec.input_low, spec.input_high, size=(spec.n_examples, spec.d))
    sigma = spec.std(X)
    if np.any(sigma <= 0):
        raise DataError(f"std_fn {spec.std_fn!r} is not positive over the sampled inputs")
    y = spec.mean(X) + sigma * rng.standard_normal(spec.n_examples)
    names: Sequence[str] = tuple(f"x{j + 1}" for j in range(spec.d))
    return Dataset(X, y, tuple(names))
