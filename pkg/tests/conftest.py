import numpy as np
import pytest

from scaledvr.dataset import Dataset, SparseRow
from scaledvr.losses import LossKind, label_domain, loss_grad, loss_value


def dense_dataset(X, labels):
    d = X.shape[1]
    rows = [SparseRow(np.arange(d, dtype=np.int64), X[i]) for i in range(X.shape[0])]
    return Dataset.from_rows(rows, labels, d=d)


def random_sparse_instance(seed, kind, n_max=50, d_max=20):
    """Small random instance with well-scaled values, labels in the loss domain."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, n_max + 1))
    d = int(rng.integers(2, d_max + 1))
    rows = []
    for _ in range(n):
        nnz = int(rng.integers(1, d + 1))
        idx = np.sort(rng.choice(d, size=nnz, replace=False)).astype(np.int64)
        rows.append(SparseRow(idx, rng.uniform(-2.0, 2.0, size=nnz)))
    lo, hi = label_domain(kind)
    labels = rng.choice([lo, hi], size=n)
    return Dataset.from_rows(rows, labels, d=d)


def gaussian_logistic(n, d, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d)) * scale
    labels = rng.choice([-1.0, 1.0], size=n)
    return dense_dataset(X, labels)


def fd_gradient(kind, data, w, h=1e-5):
    d = data.d
    out = np.empty(d)
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        out[j] = (loss_value(kind, data, w + e) - loss_value(kind, data, w - e)) / (2 * h)
    return out


def fd_hvp(kind, data, w, v, h=1e-5):
    return (loss_grad(kind, data, w + h * v) - loss_grad(kind, data, w - h * v)) / (2 * h)


class QuadraticProblem:
    """n identical samples f_i(w) = ||w||^2 / 2; P(w) = ||w||^2 / 2."""

    def __init__(self, d=1, n=4):
        self.n = n
        self.d = d

    def value(self, w, batch=None):
        return 0.5 * float(np.dot(w, w))

    def grad(self, w, batch=None):
        return np.asarray(w, dtype=np.float64).copy()

    def hvp(self, w, v, batch=None):
        return np.asarray(v, dtype=np.float64).copy()

    def hessian_diag(self, w, batch=None):
        return np.ones(self.d)

    def error(self, w):
        return 0.0


def single_feature_dataset(n, d, seed, *, xscale=2.0, flip=0.20):
    """One nonzero per row (n/d samples per feature), labels sign-correlated
    with the feature after corruption, with guaranteed per-feature
    non-separability (the largest-margin sample is flipped)."""
    rng = np.random.default_rng(seed)
    per = n // d
    rows, labels = [], []
    signs = rng.choice([-1.0, 1.0], size=d)
    for j in range(d):
        x = rng.standard_normal(per) * xscale
        y = np.sign(x) * signs[j]
        y[y == 0] = 1.0
        y[np.argmax(np.abs(x))] *= -1
        fl = rng.random(per) < flip
        y[fl] *= -1
        for t in range(per):
            rows.append(SparseRow(np.array([j], dtype=np.int64), np.array([x[t]])))
            labels.append(y[t])
    perm = rng.permutation(len(rows))
    rows = [rows[i] for i in perm]
    labels = np.asarray(labels)[perm]
    return Dataset.from_rows(rows, labels, d=d)


@pytest.fixture
def tiny_svm_path():
    import pathlib

    return str(pathlib.Path(__file__).parent / "data" / "tiny.svm")
