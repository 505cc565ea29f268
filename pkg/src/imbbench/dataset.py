"""Labeled binary datasets: CSV ingestion, imbalance statistics, splitting and scaling.

Labels are always encoded as 0 (majority) and 1 (minority).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CSVParseError, InvalidDatasetError, InvalidSplitError

MAJORITY = 0
MINORITY = 1

# Relative std below which a column is treated as constant.
_CONSTANT_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, copy=True)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise InvalidDatasetError(f"features must be 2-D, got shape {X.shape}")
        y = np.asarray(self.labels)
        if y.ndim != 1:
            raise InvalidDatasetError("labels must be 1-D")
        if len(y) != X.shape[0]:
            raise InvalidDatasetError(
                f"features have {X.shape[0]} rows but labels have {len(y)} entries"
            )
        if len(y) and not np.isin(y, (MAJORITY, MINORITY)).all():
            raise InvalidDatasetError("labels must be 0 (majority) or 1 (minority)")
        if not np.isfinite(X).all():
            raise InvalidDatasetError("features contain NaN or infinite values")
        y = y.astype(np.int64)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        if self.feature_names is not None:
            names = tuple(str(n) for n in self.feature_names)
            if len(names) != X.shape[1]:
                raise InvalidDatasetError("feature_names length does not match feature count")
            object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_minority(self) -> int:
        return int(np.count_nonzero(self.labels == MINORITY))

    @property
    def n_majority(self) -> int:
        return int(np.count_nonzero(self.labels == MAJORITY))

    @property
    def minority(self) -> np.ndarray:
        return self.features[self.labels == MINORITY]

    @property
    def majority(self) -> np.ndarray:
        return self.features[self.labels == MAJORITY]

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows)
        return LabeledDataset(self.features[rows], self.labels[rows], self.feature_names)

    def with_rows(self, features, labels) -> "LabeledDataset":
        """New dataset sharing this one's feature names."""
        return LabeledDataset(features, labels, self.feature_names)

    def require_both_classes(self):
        if self.n_minority == 0 or self.n_majority == 0:
            raise InvalidDatasetError(
                f"both classes must be present (majority={self.n_majority}, "
                f"minority={self.n_minority})"
            )


@dataclass(frozen=True, eq=False)
class SplitPair:
    train: LabeledDataset
    test: LabeledDataset
    train_index: np.ndarray = field(repr=False)
    test_index: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class StandardizationParams:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, d: LabeledDataset) -> LabeledDataset:
        scale = np.where(self.std > 0, self.std, 1.0)
        shift = np.where(self.std > 0, self.mean, 0.0)
        return d.with_rows((d.features - shift) / scale, d.labels)


def load_csv(path, label_column, positive_label) -> tuple[LabeledDataset, int]:
    """Read a numeric CSV with a header row.

    Returns the dataset and the number of empty numeric cells that were
    imputed with their column mean.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidDatasetError(f"{path}: empty file") from None
        rows = [r for r in reader if r]

    header = [h.strip() for h in header]
    if isinstance(label_column, int):
        if not -len(header) <= label_column < len(header):
            raise InvalidDatasetError(f"label column index {label_column} out of range")
        label_idx = label_column % len(header)
    else:
        try:
            label_idx = header.index(str(label_column))
        except ValueError:
            raise InvalidDatasetError(f"label column {label_column!r} not in header") from None
    if len(rows) < 2:
        raise InvalidDatasetError(f"{path}: need at least 2 data rows, got {len(rows)}")

    feature_cols = [j for j in range(len(header)) if j != label_idx]
    X = np.empty((len(rows), len(feature_cols)))
    y = np.empty(len(rows), dtype=np.int64)
    positive = str(positive_label).strip()
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise CSVParseError(
                f"expected {len(header)} fields, got {len(row)}", row=i + 1
            )
        y[i] = MINORITY if row[label_idx].strip() == positive else MAJORITY
        for out_j, j in enumerate(feature_cols):
            cell = row[j].strip()
            if cell == "":
                X[i, out_j] = np.nan
                continue
            try:
                X[i, out_j] = float(cell)
            except ValueError:
                raise CSVParseError(
                    f"non-numeric value {cell!r}", row=i + 1, column=header[j]
                ) from None
            if not math.isfinite(X[i, out_j]):
                raise CSVParseError(f"non-finite value {cell!r}", row=i + 1, column=header[j])

    missing = np.isnan(X)
    n_imputed = int(missing.sum())
    if n_imputed:
        for j in np.flatnonzero(missing.any(axis=0)):
            present = X[~missing[:, j], j]
            if present.size == 0:
                raise CSVParseError(
                    "column has no values to impute from", column=header[feature_cols[j]]
                )
            X[missing[:, j], j] = present.mean()

    d = LabeledDataset(X, y, tuple(header[j] for j in feature_cols))
    if d.n_minority == 0 or d.n_majority == 0:
        raise InvalidDatasetError(
            f"{path}: labels contain a single class (positive_label={positive!r})"
        )
    return d, n_imputed


def write_csv(d: LabeledDataset, path, label_column="label"):
    names = d.feature_names or tuple(f"x{j}" for j in range(d.n_features))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*names, label_column])
        for x, lab in zip(d.features, d.labels):
            w.writerow([*(repr(float(v)) for v in x), int(lab)])


def imbalance_stats(d: LabeledDataset) -> tuple[float, float]:
    """Return ``(n_majority / n_minority, n_minority / n_total)``."""
    return imbalance_from_counts(d.n_majority, d.n_minority)


def imbalance_from_counts(n_majority: int, n_minority: int) -> tuple[float, float]:
    if n_majority <= 0 or n_minority <= 0:
        raise InvalidDatasetError(
            f"both classes must be non-empty (majority={n_majority}, minority={n_minority})"
        )
    return n_majority / n_minority, n_minority / (n_minority + n_majority)


def stratified_split(d: LabeledDataset, train_fraction: float, seed: int) -> SplitPair:
    """Split each class separately so both sides keep the source imbalance.

    The majority train count is rounded; the minority *test* count is rounded
    up so the test side always receives minority samples.
    """
    if not 0.0 < train_fraction < 1.0:
        raise InvalidSplitError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_parts, test_parts = [], []
    for cls in (MAJORITY, MINORITY):
        idx = np.flatnonzero(d.labels == cls)
        n = len(idx)
        if n < 2:
            raise InvalidSplitError(
                f"class {cls} has {n} sample(s); need at least 2 to populate both sides"
            )
        if cls == MINORITY:
            n_test = math.ceil((1.0 - train_fraction) * n - 1e-9)
            n_train = n - n_test
        else:
            n_train = int(np.floor(train_fraction * n + 0.5))
        n_train = min(max(n_train, 1), n - 1)
        perm = rng.permutation(idx)
        train_parts.append(perm[:n_train])
        test_parts.append(perm[n_train:])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    return SplitPair(d.subset(train_idx), d.subset(test_idx), train_idx, test_idx)


def fit_standardization(train: LabeledDataset) -> StandardizationParams:
    if train.n_samples == 0:
        raise InvalidDatasetError("cannot standardize an empty training set")
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    constant = std <= _CONSTANT_RTOL * np.maximum(1.0, np.abs(mean))
    std = np.where(constant, 0.0, std)
    return StandardizationParams(mean, std)


def standardize(train: LabeledDataset, others: Sequence[LabeledDataset] = ()):
    """Fit per-feature scaling on ``train`` and apply it to ``train`` and ``others``.

    Returns ``(params, train_transformed, [others_transformed...])``.
    """
    params = fit_standardization(train)
    return params, params.transform(train), [params.transform(o) for o in others]


def make_two_gaussians(
    n_majority: int,
    n_minority: int,
    separation: float = 3.0,
    n_features: int = 2,
    seed: int = 0,
) -> LabeledDataset:
    """Two unit-variance Gaussian blobs whose centres are ``separation`` apart along the first axis."""
    rng = np.random.default_rng(seed)
    maj = rng.standard_normal((n_majority, n_features))
    mino = rng.standard_normal((n_minority, n_features))
    mino[:, 0] += separation
    X = np.vstack([maj, mino])
    y = np.concatenate([np.zeros(n_majority, np.int64), np.ones(n_minority, np.int64)])
    return LabeledDataset(X, y, tuple(f"x{j}" for j in range(n_features)))
