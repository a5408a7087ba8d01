"""Sparse datasets: LibSVM text I/O, label normalization, feature scaling.

Rows are stored CSR-style (indptr/indices/values) with 0-based feature
indices; the LibSVM 1-based convention is converted at the parse boundary.
Datasets are treated as immutable: the transformations below return new
Dataset objects sharing whatever arrays they did not change.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import LabelCardinalityError, ParseError
from .rng import RandomSource, Stream, permutation


@dataclass(frozen=True)
class SparseRow:
    """One sample: strictly increasing 0-based indices with float64 values."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.ndim != 1 or val.ndim != 1 or idx.shape != val.shape:
            raise ValueError("indices and values must be 1-d and equally long")
        if idx.size:
            if idx[0] < 0:
                raise ValueError("feature indices must be nonnegative")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("feature indices must be strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("row values must be finite")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @property
    def nnz(self):
        return int(self.indices.size)


class Dataset:
    """n sparse samples with float64 labels over d features (CSR layout)."""

    def __init__(self, indptr, indices, values, labels, d):
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.labels = np.ascontiguousarray(labels, dtype=np.float64)
        self.d = int(d)
        if self.n < 1:
            raise ValueError("dataset must contain at least one sample")
        if self.d < 1:
            raise ValueError("dataset must have d >= 1")
        if self.labels.shape[0] != self.n:
            raise ValueError("labels length must match sample count")
        if self.indices.size and int(self.indices.max()) >= self.d:
            raise ValueError("feature index exceeds dimension d")
        self._full_batch = None
        self._labels_checked = set()

    @property
    def n(self):
        return self.indptr.shape[0] - 1

    @property
    def nnz(self):
        return int(self.indices.size)

    @property
    def full_batch(self):
        if self._full_batch is None:
            self._full_batch = np.arange(self.n, dtype=np.int64)
        return self._full_batch

    def row(self, i):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return SparseRow(self.indices[lo:hi].copy(), self.values[lo:hi].copy())

    def with_labels(self, labels):
        return Dataset(self.indptr, self.indices, self.values, labels, self.d)

    def with_values(self, values):
        return Dataset(self.indptr, self.indices, values, self.labels, self.d)

    @classmethod
    def from_rows(cls, rows, labels, d=None):
        rows = list(rows)
        if not rows:
            raise ValueError("dataset must contain at least one sample")
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        for i, r in enumerate(rows):
            indptr[i + 1] = indptr[i] + r.indices.size
        indices = (
            np.concatenate([r.indices for r in rows])
            if indptr[-1]
            else np.zeros(0, dtype=np.int64)
        )
        values = (
            np.concatenate([r.values for r in rows])
            if indptr[-1]
            else np.zeros(0, dtype=np.float64)
        )
        needed = int(indices.max()) + 1 if indices.size else 1
        if d is None:
            d = needed
        elif d < needed:
            raise ValueError(f"d={d} is smaller than 1 + max feature index = {needed}")
        return cls(indptr, indices, values, labels, d)


@dataclass(frozen=True)
class ScalingSpec:
    """Feature-scale corruption: exponents spread evenly over [kmin, kmax]."""

    kmin: int
    kmax: int
    seed: int = 0

    def __post_init__(self):
        if self.kmin > self.kmax:
            raise ValueError(f"kmin={self.kmin} must not exceed kmax={self.kmax}")


def parse_libsvm(lines, d=None, path=None):
    """Parse LibSVM text ("label idx:val idx:val ...", 1-based indices).

    ``lines`` is any iterable of text lines (an open file qualifies). Fully
    blank lines are skipped. Raises ParseError with 1-based line/column on
    malformed input; ``d`` may widen (never shrink) the inferred dimension.
    """
    rows = []
    labels = []
    for ln, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        tokens = []
        col = 0
        for tok in line.split():
            col = line.index(tok, col)
            tokens.append((tok, col + 1))
            col += len(tok)
        label_tok, label_col = tokens[0]
        try:
            label = float(label_tok)
        except ValueError:
            raise ParseError(
                f"label {label_tok!r} is not a number", line=ln, column=label_col, path=path
            ) from None
        idxs = []
        vals = []
        prev = 0
        for tok, c in tokens[1:]:
            head, sep, tail = tok.partition(":")
            if not sep:
                raise ParseError(
                    f"expected index:value, got {tok!r}", line=ln, column=c, path=path
                )
            try:
                j = int(head)
            except ValueError:
                raise ParseError(
                    f"feature index {head!r} is not an integer", line=ln, column=c, path=path
                ) from None
            try:
                x = float(tail)
            except ValueError:
                raise ParseError(
                    f"feature value {tail!r} is not a number", line=ln, column=c, path=path
                ) from None
            if j < 1:
                raise ParseError(
                    f"feature index {j} is not positive (indices are 1-based)",
                    line=ln,
                    column=c,
                    path=path,
                )
            if j <= prev:
                raise ParseError(
                    f"feature index {j} not strictly increasing after {prev}",
                    line=ln,
                    column=c,
                    path=path,
                )
            prev = j
            idxs.append(j - 1)
            vals.append(x)
        rows.append(SparseRow(np.asarray(idxs, dtype=np.int64), np.asarray(vals)))
        labels.append(label)
    if not rows:
        raise ParseError("no samples found", path=path)
    return Dataset.from_rows(rows, labels, d=d)


def load_libsvm(path, d=None):
    with open(path, "r", encoding="ascii") as fh:
        return parse_libsvm(fh, d=d, path=str(path))


def write_libsvm(data, fh):
    """Serialize back to LibSVM text with 17 significant digits."""
    for i in range(data.n):
        lo, hi = int(data.indptr[i]), int(data.indptr[i + 1])
        parts = [format(data.labels[i], ".17g")]
        for k in range(lo, hi):
            parts.append(f"{int(data.indices[k]) + 1}:{format(data.values[k], '.17g')}")
        fh.write(" ".join(parts) + "\n")


def dump_libsvm(data, path):
    with open(path, "w", encoding="ascii") as fh:
        write_libsvm(data, fh)


def normalize_labels(data, kind):
    """Map the two raw label values order-preservingly onto the loss domain.

    Already-in-domain labels pass through unchanged (idempotent). Anything
    other than two distinct raw values (or a subset of the target domain)
    is a LabelCardinalityError.
    """
    from .losses import label_domain  # local import: losses depends on this module

    lo, hi = label_domain(kind)
    distinct = np.unique(data.labels)
    if set(distinct.tolist()) <= {lo, hi}:
        return data
    if distinct.size != 2:
        raise LabelCardinalityError(
            f"need exactly two distinct labels, found {distinct.size}"
        )
    out = np.where(data.labels == distinct[0], lo, hi)
    return data.with_labels(out)


def corrupt_features(data, spec):
    """Rescale feature j by 10**e[perm[j]], exponents evenly spaced.

    The d exponents are kmin + (kmax-kmin)*q/(d-1) for q = 0..d-1 (a single
    feature gets kmin), assigned in an order drawn from the permutation
    stream of spec.seed. (kmin, kmax) = (0, 0) leaves the data bitwise
    unchanged. Scaling stored nonzeros coincides with scaling the dense
    matrix, since absent entries are zero.
    """
    d = data.d
    if d == 1:
        exps = np.array([float(spec.kmin)])
    else:
        q = np.arange(d, dtype=np.float64)
        exps = spec.kmin + (spec.kmax - spec.kmin) * q / (d - 1)
    mult = np.power(10.0, exps)
    perm = permutation(RandomSource(spec.seed, Stream.PERMUTATION), d)
    feature_mult = mult[perm]
    new_values = data.values * feature_mult[data.indices]
    return data.with_values(new_values)
