"""Loading, validating, writing and splitting labeled multi-class datasets.

Labels are always stored as contiguous integers ``1..k``; the original label
values are kept in :attr:`Dataset.classes` so that they can be mapped back.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataFormatError(ValueError):
    """Raised for malformed input files or invalid datasets."""


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix with labels in ``1..k``.

    The arrays are made read-only on construction so a dataset can be shared
    freely between threads.
    """

    features: np.ndarray
    labels: np.ndarray
    k: int
    feature_names: list[str] | None = None
    classes: tuple = field(default=())

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, copy=True)
        y = np.array(self.labels, dtype=np.int64, copy=True)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataFormatError(f"features must be a non-empty 2-D matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataFormatError(f"labels must have length {X.shape[0]}, got shape {y.shape}")
        if self.k < 2:
            raise DataFormatError("training requires k ≥ 2 classes")
        if y.min() < 1 or y.max() > self.k:
            raise DataFormatError(f"labels must lie in 1..{self.k}")
        if not np.all(np.isfinite(X)):
            raise DataFormatError("features contain non-finite values")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise DataFormatError("feature_names length does not match the number of columns")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        if not self.classes:
            object.__setattr__(self, "classes", tuple(range(1, self.k + 1)))
        elif len(self.classes) != self.k:
            raise DataFormatError("classes must list one original label per class")

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k + 1)[1:]

    def require_all_classes(self) -> None:
        """Raise unless every class ``1..k`` has at least one sample."""
        missing = [r + 1 for r, c in enumerate(self.class_counts()) if c == 0]
        if missing:
            raise DataFormatError(f"classes {missing} have no samples")

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(self.features[index], self.labels[index], self.k,
                       self.feature_names, self.classes)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.75
    per_class_cap: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        if self.per_class_cap is not None and self.per_class_cap < 1:
            raise ValueError("per_class_cap must be >= 1")


def _remap_labels(raw: list[float]) -> tuple[np.ndarray, tuple]:
    classes = sorted(set(raw))
    if len(classes) < 2:
        raise DataFormatError("training requires k ≥ 2 classes, found a single label")
    lookup = {c: r + 1 for r, c in enumerate(classes)}
    labels = np.array([lookup[v] for v in raw], dtype=np.int64)
    classes = tuple(int(c) if float(c).is_integer() else c for c in classes)
    return labels, classes


def load_libsvm(path) -> Dataset:
    """Read a LIBSVM/SVMlight text file into a dense :class:`Dataset`.

    Each non-blank line is ``<label> <idx>:<val> ...`` with 1-based, strictly
    ascending indices. Absent entries are zero. Lines starting with ``#`` and
    trailing ``# comments`` are ignored.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    raw_labels: list[float] = []
    rows: list[dict[int, float]] = []
    d = 0
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric label {tokens[0]!r}") from None
            if not math.isfinite(label):
                raise DataFormatError(f"{path}:{lineno}: non-finite label {tokens[0]!r}")
            row: dict[int, float] = {}
            last = 0
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                try:
                    if not sep:
                        raise ValueError
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: malformed token {tok!r}") from None
                if idx < 1:
                    raise DataFormatError(f"{path}:{lineno}: feature index must be >= 1, got {idx}")
                if idx in row:
                    raise DataFormatError(f"{path}:{lineno}: duplicate feature index {idx}")
                if idx < last:
                    raise DataFormatError(f"{path}:{lineno}: feature indices not ascending at {idx}")
                row[idx] = val
                last = idx
            d = max(d, last)
            raw_labels.append(label)
            rows.append(row)
    if not rows:
        raise DataFormatError(f"{path}: no samples")
    X = np.zeros((len(rows), max(d, 1)))
    for i, row in enumerate(rows):
        for idx, val in row.items():
            X[i, idx - 1] = val
    labels, classes = _remap_labels(raw_labels)
    return Dataset(X, labels, len(classes), classes=classes)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, label_column: int = -1) -> Dataset:
    """Read a numeric comma-separated file; a non-numeric first row is a header."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    if not rows:
        raise DataFormatError(f"{path}: no data rows after header")
    width = len(rows[0])
    if width < 2:
        raise DataFormatError(f"{path}: need at least one feature column and a label column")
    col = label_column if label_column >= 0 else width + label_column
    if not 0 <= col < width:
        raise DataFormatError(f"{path}: label column {label_column} out of range for {width} columns")
    values = np.empty((len(rows), width))
    for n, row in enumerate(rows):
        lineno = n + (2 if header else 1)
        if len(row) != width:
            raise DataFormatError(f"{path}:{lineno}: expected {width} cells, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                values[n, j] = float(cell)
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric cell {cell!r} in column {j}") from None
    labels, classes = _remap_labels(values[:, col].tolist())
    X = np.delete(values, col, axis=1)
    names = None if header is None else [h for j, h in enumerate(header) if j != col]
    return Dataset(X, labels, len(classes), feature_names=names, classes=classes)


def load_dataset(path, fmt: str = "libsvm", label_column: int = -1) -> Dataset:
    if fmt == "libsvm":
        return load_libsvm(path)
    if fmt == "csv":
        return load_csv(path, label_column)
    raise ValueError(f"unknown data format {fmt!r}")


def write_libsvm(data: Dataset, path) -> None:
    """Write features with 17 significant digits so that reloading is exact.

    Zero entries are omitted, as usual for the format, except the last column,
    which is always written so the feature count survives a reload. Original
    class labels are written back.
    """
    last = data.d - 1
    with Path(path).open("w") as fh:
        for x, y in zip(data.features, data.labels):
            tokens = [str(data.classes[y - 1])]
            tokens += [f"{j + 1}:{v:.17g}" for j, v in enumerate(x) if v != 0.0 or j == last]
            fh.write(" ".join(tokens) + "\n")


def stratified_split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Per-class random split into (train, test).

    Within each class, ``per_class_cap`` samples are first drawn uniformly
    without replacement, then ``floor((1 - train_fraction) * n)`` of them (but
    at least one) go to the test side and the remainder to the training side.
    """
    rng = np.random.default_rng(spec.seed)
    train_idx, test_idx = [], []
    for r in range(1, data.k + 1):
        members = np.flatnonzero(data.labels == r)
        if len(members) < 2:
            raise DataFormatError(f"class {data.classes[r - 1]!r} has fewer than 2 samples")
        if spec.per_class_cap is not None and len(members) > spec.per_class_cap:
            members = rng.choice(members, size=spec.per_class_cap, replace=False)
        members = rng.permutation(members)
        n_test = max(1, int(math.floor((1.0 - spec.train_fraction) * len(members) + 1e-9)))
        test_idx.append(members[:n_test])
        train_idx.append(members[n_test:])
    train = np.sort(np.concatenate(train_idx))
    test = np.sort(np.concatenate(test_idx))
    return data.subset(train), data.subset(test)


def cap_per_class(data: Dataset, cap: int | None, seed: int = 0) -> Dataset:
    """Keep at most ``cap`` uniformly drawn samples of each class, in original order."""
    if cap is None:
        return data
    if cap < 1:
        raise ValueError("per-class cap must be >= 1")
    rng = np.random.default_rng(seed)
    keep = []
    for r in range(1, data.k + 1):
        members = np.flatnonzero(data.labels == r)
        if len(members) > cap:
            members = rng.choice(members, size=cap, replace=False)
        keep.append(members)
    return data.subset(np.sort(np.concatenate(keep)))
