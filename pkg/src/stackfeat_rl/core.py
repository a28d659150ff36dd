"""Shared data model: datasets, fold plans, seeding and fit records."""

from __future__ import annotations

import csv
import threading
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


# ---------------------------------------------------------------------------
# Seeding
# ---------------------------------------------------------------------------

def _tag(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    return int(key)


def derive_seed(seed: int, *path) -> int:
    """Derive a 64-bit sub-seed from a root seed and a purpose path.

    ``path`` elements may be strings (hashed with CRC32) or integers, e.g.
    ``derive_seed(seed, "episode", e, "iteration", t)``.  The derivation goes
    through :class:`numpy.random.SeedSequence` so that sibling streams are
    statistically independent.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(_tag(k) for k in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *path) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *path))


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExpressionDataset:
    """Samples-by-features matrix with binary labels.

    Parameters
    ----------
    matrix : ndarray, shape (n_samples, n_features)
    labels : ndarray of {0, 1}, shape (n_samples,)
    feature_names, sample_ids : sequences of unique strings
    """

    matrix: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    sample_ids: tuple[str, ...]

    def __post_init__(self):
        X = np.ascontiguousarray(self.matrix, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise DataError("matrix must be two-dimensional")
        if y.ndim != 1:
            raise DataError("labels must be one-dimensional")
        n, p = X.shape
        fnames = tuple(str(f) for f in self.feature_names)
        sids = tuple(str(s) for s in self.sample_ids)
        if len(y) != n or len(sids) != n:
            raise DataError(
                f"row count mismatch: matrix has {n} rows, labels {len(y)}, "
                f"sample_ids {len(sids)}")
        if len(fnames) != p:
            raise DataError(
                f"matrix has {p} columns but {len(fnames)} feature names")
        if len(set(fnames)) != p:
            raise DataError("feature names are not unique")
        if len(set(sids)) != n:
            raise DataError("sample ids are not unique")
        if not np.all(np.isfinite(X)):
            raise DataError("matrix contains non-finite values")
        if y.size and not np.all(np.isin(y, (0, 1))):
            raise DataError("labels must be exactly 0 or 1")
        X.setflags(write=False)
        y = y.astype(np.int64)
        y.setflags(write=False)
        object.__setattr__(self, "matrix", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", fnames)
        object.__setattr__(self, "sample_ids", sids)

    @property
    def n_samples(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_features(self) -> int:
        return self.matrix.shape[1]

    def rows(self, index) -> "ExpressionDataset":
        index = np.asarray(index)
        return ExpressionDataset(
            self.matrix[index], self.labels[index], self.feature_names,
            tuple(self.sample_ids[i] for i in index))

    def columns(self, index) -> "ExpressionDataset":
        index = np.asarray(index, dtype=np.int64)
        return ExpressionDataset(
            self.matrix[:, index], self.labels,
            tuple(self.feature_names[i] for i in index), self.sample_ids)

    def with_labels(self, labels) -> "ExpressionDataset":
        return ExpressionDataset(self.matrix, labels, self.feature_names,
                                 self.sample_ids)

    def require_both_classes(self):
        counts = np.bincount(self.labels, minlength=2)
        if counts.min() == 0:
            raise DataError("labels must contain both classes")


# ---------------------------------------------------------------------------
# Folds
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FoldPlan:
    assignments: np.ndarray
    k: int
    seed: int
    stratified: bool

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test

    def __iter__(self):
        for f in range(self.k):
            yield self.train_test(f)

    def __eq__(self, other):
        if not isinstance(other, FoldPlan):
            return NotImplemented
        return (self.k == other.k and self.seed == other.seed
                and self.stratified == other.stratified
                and np.array_equal(self.assignments, other.assignments))

    __hash__ = None


def make_folds(labels, k: int, seed: int, stratified: bool = True,
               allow_small_classes: bool = False) -> FoldPlan:
    """Assign samples to ``k`` folds.

    Stratified plans shuffle each class separately and deal its members
    round-robin, continuing the dealing position from one class to the next
    (classes in ascending order).  Per-fold class counts therefore differ
    from ``n_class / k`` by less than one sample, and fold sizes differ by at
    most one.

    A class with fewer than ``k`` members is an error unless
    ``allow_small_classes`` is set, in which case its members land in
    distinct folds and some folds lack that class.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    if n < k:
        raise DataError(f"cannot split {n} samples into {k} folds")
    rng = make_rng(seed, "folds")
    assignments = np.empty(n, dtype=np.int64)
    if stratified:
        offset = 0
        for cls in np.unique(labels):
            members = np.flatnonzero(labels == cls)
            if members.size < k and not allow_small_classes:
                raise DataError(
                    f"class {cls.item()!r} has {members.size} samples, fewer than "
                    f"k={k} folds required for stratification")
            members = rng.permutation(members)
            assignments[members] = (offset + np.arange(members.size)) % k
            offset = (offset + members.size) % k
    else:
        order = rng.permutation(n)
        assignments[order] = np.arange(n) % k
    assignments.setflags(write=False)
    return FoldPlan(assignments, int(k), int(seed), bool(stratified))


# ---------------------------------------------------------------------------
# Standardisation
# ---------------------------------------------------------------------------

def standardize_train_apply(train, apply=None):
    """Centre and scale columns with training statistics (population std).

    Zero-variance training columns are centred only (scale 1).

    Returns
    -------
    train_std, apply_std, means, scales
        ``apply_std`` is None when ``apply`` is None.
    """
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] < 2:
        raise DataError("standardisation needs a 2-D training matrix with >= 2 rows")
    if not np.all(np.isfinite(train)):
        raise DataError("non-finite values in training matrix")
    means = train.mean(axis=0)
    scales = train.std(axis=0)
    scales = np.where(scales > 1e-12 * np.maximum(1.0, np.abs(means)), scales, 1.0)
    train_std = (train - means) / scales
    apply_std = None
    if apply is not None:
        apply = np.asarray(apply, dtype=np.float64)
        if not np.all(np.isfinite(apply)):
            raise DataError("non-finite values in matrix to transform")
        apply_std = (apply - means) / scales
    return train_std, apply_std, means, scales


# ---------------------------------------------------------------------------
# Fit records
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FitResult:
    coefficients: np.ndarray
    intercept: float
    n_iterations: int
    converged: bool
    selected: np.ndarray = field(default=None)
    max_update: float = 0.0

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=np.float64)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "selected", np.flatnonzero(coef != 0.0))


class FitCounter:
    """Thread-safe tally of elastic-net fits.

    ``single_fits`` counts fits at one penalty, ``cv_fits`` counts the fits
    performed inside a regularisation search.
    """

    def __init__(self, single_fits: int = 0, cv_fits: int = 0):
        self.single_fits = single_fits
        self.cv_fits = cv_fits
        self._lock = threading.Lock()

    def add_single(self, n: int = 1):
        with self._lock:
            self.single_fits += n

    def add_cv(self, n: int):
        with self._lock:
            self.cv_fits += n

    def merge(self, other: "FitCounter"):
        with self._lock:
            self.single_fits += other.single_fits
            self.cv_fits += other.cv_fits

    @property
    def total(self) -> int:
        return self.single_fits + self.cv_fits

    def as_dict(self) -> dict:
        return {"single_fits": self.single_fits, "cv_fits": self.cv_fits,
                "total": self.total}

    def __repr__(self):
        return f"FitCounter(single_fits={self.single_fits}, cv_fits={self.cv_fits})"

    def __getstate__(self):
        return {"single_fits": self.single_fits, "cv_fits": self.cv_fits}

    def __setstate__(self, state):
        self.__init__(state["single_fits"], state["cv_fits"])


# ---------------------------------------------------------------------------
# File ingestion
# ---------------------------------------------------------------------------

def _sniff_delimiter(path: Path) -> str:
    if path.suffix.lower() in (".tsv", ".tab", ".txt"):
        return "\t"
    with open(path, newline="") as fh:
        head = fh.readline()
    return "\t" if head.count("\t") > head.count(",") else ","


def read_expression(path, transposed: bool = False):
    """Read a numeric matrix file.

    Default layout: first row holds feature names, first column sample ids.
    With ``transposed=True`` rows are features and columns are samples.

    Returns ``(matrix, feature_names, sample_ids)``.
    """
    path = Path(path)
    delim = _sniff_delimiter(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delim)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        col_names = [h.strip() for h in header[1:]]
        row_names, body = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                values = [float(c) for c in row[1:]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric value ({exc})") from None
            if not all(np.isfinite(values)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            row_names.append(row[0].strip())
            body.append(values)
    matrix = np.array(body, dtype=np.float64).reshape(len(body), len(col_names))
    if transposed:
        return matrix.T.copy(), row_names, col_names
    return matrix, col_names, row_names


def read_labels(path) -> dict[str, int]:
    """Read a two-column ``sample_id,label`` file; an optional header is skipped."""
    path = Path(path)
    delim = _sniff_delimiter(path)
    out: dict[str, int] = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter=delim), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            sid, raw = row[0].strip(), row[1].strip()
            if raw not in ("0", "1"):
                if lineno == 1:
                    continue  # header
                raise DataError(f"{path}:{lineno}: label must be 0 or 1, got {raw!r}")
            if sid in out:
                raise DataError(f"{path}:{lineno}: duplicate sample id {sid!r}")
            out[sid] = int(raw)
    return out


def load_dataset(matrix_path, labels_path, transposed: bool = False) -> ExpressionDataset:
    matrix, features, samples = read_expression(matrix_path, transposed)
    if len(set(samples)) != len(samples):
        raise DataError(f"{matrix_path}: duplicate sample ids")
    labels = read_labels(labels_path)
    missing = [s for s in samples if s not in labels]
    if missing:
        raise DataError(f"{labels_path}: no label for sample(s) {missing[:5]}")
    y = np.array([labels[s] for s in samples], dtype=np.int64)
    return ExpressionDataset(matrix, y, features, samples)


def write_dataset(ds: ExpressionDataset, matrix_path, labels_path):
    with open(matrix_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", *ds.feature_names])
        for sid, row in zip(ds.sample_ids, ds.matrix):
            w.writerow([sid, *(repr(float(v)) for v in row)])
    with open(labels_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "label"])
        for sid, lab in zip(ds.sample_ids, ds.labels):
            w.writerow([sid, int(lab)])


def as_index_array(index: Sequence[int] | np.ndarray) -> np.ndarray:
    return np.asarray(sorted(int(i) for i in index), dtype=np.int64)
