"""Finite-sum loss oracles: logistic regression and non-linear least squares.

Both losses are generalized linear: sample i contributes a scalar profile
of the margin t = x_i . w, so gradients are c'(t) x_i and Hessians are
rank-one, c''(t) x_i x_i^T. Per-sample profiles:

    logistic (y in {-1,+1}):  log(1 + exp(-y t))
    nllsq    (y in {0, 1}):   (y - sigmoid(t))^2      (nonconvex)

All batch operations return the arithmetic mean over the batch; passing
batch=None means the full dataset. Numerics use the standard two-branch
stable forms of sigmoid and log(1+exp(.)); see the kernel backends for the
exact accumulation order.
"""

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels_py as _ref
from .backend import kernels as _k
from .errors import DegenerateSmoothnessError, InvalidBatchError, InvalidLabelError


class LossKind(enum.Enum):
    LOGISTIC = "logistic"
    NLLSQ = "nllsq"

    @classmethod
    def parse(cls, name):
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(
                f"unknown loss {name!r}; expected 'logistic' or 'nllsq'"
            ) from None


_DOMAIN = {LossKind.LOGISTIC: (-1.0, 1.0), LossKind.NLLSQ: (0.0, 1.0)}

_LOGISTIC_CURVATURE_BOUND = 0.25  # sup of s(1-s)


def label_domain(kind):
    return _DOMAIN[LossKind(kind)]


def positive_label(kind):
    return _DOMAIN[LossKind(kind)][1]


@dataclass
class TheoryParams:
    """Constants the step-size diagnostics consume.

    gamma = sqrt(d) * L_hat is the elementwise upper bound on the clipped
    diagonal preconditioner. mu (PL constant) and delta0 (initial optimality
    gap) are unknown for these losses and stay None unless supplied.
    """

    L_hat: float
    gamma: float
    mu: float | None = None
    delta0: float | None = None


# scalar profiles, re-exported for 1-d oracle tests and the curvature grid
scalar_loss = {
    LossKind.LOGISTIC: _ref.logistic_scalar_value,
    LossKind.NLLSQ: _ref.nllsq_scalar_value,
}
scalar_dloss = {
    LossKind.LOGISTIC: _ref.logistic_scalar_dloss,
    LossKind.NLLSQ: _ref.nllsq_scalar_dloss,
}
scalar_curvature = {
    LossKind.LOGISTIC: _ref.logistic_scalar_curvature,
    LossKind.NLLSQ: _ref.nllsq_scalar_curvature,
}


def _check_labels(data, kind):
    key = kind.value
    if key in data._labels_checked:
        return
    lo, hi = _DOMAIN[kind]
    ok = np.all((data.labels == lo) | (data.labels == hi))
    if not ok:
        raise InvalidLabelError(
            f"{kind.value} loss needs labels in {{{lo:g}, {hi:g}}}"
        )
    data._labels_checked.add(key)


def _check_batch(data, batch):
    if batch is None:
        return data.full_batch
    batch = np.ascontiguousarray(batch, dtype=np.int64)
    if batch.size == 0:
        raise InvalidBatchError("batch must be nonempty")
    if batch.min() < 0 or batch.max() >= data.n:
        raise InvalidBatchError("batch index out of range")
    return batch


def _check_w(data, w):
    w = np.ascontiguousarray(w, dtype=np.float64)
    if w.shape != (data.d,):
        raise ValueError(f"w has shape {w.shape}, expected ({data.d},)")
    return w


def loss_value(kind, data, w, batch=None):
    """Mean per-sample loss over the batch."""
    kind = LossKind(kind)
    _check_labels(data, kind)
    batch = _check_batch(data, batch)
    w = _check_w(data, w)
    fn = _k.logistic_value if kind is LossKind.LOGISTIC else _k.nllsq_value
    return fn(data.indptr, data.indices, data.values, data.labels, w, batch)


def loss_grad(kind, data, w, batch=None):
    """Mean gradient over the batch (analytic)."""
    kind = LossKind(kind)
    _check_labels(data, kind)
    batch = _check_batch(data, batch)
    w = _check_w(data, w)
    out = np.empty(data.d, dtype=np.float64)
    fn = _k.logistic_grad if kind is LossKind.LOGISTIC else _k.nllsq_grad
    fn(data.indptr, data.indices, data.values, data.labels, w, batch, out)
    return out


def loss_hvp(kind, data, w, v, batch=None):
    """Batch-Hessian product: mean of c''_i(t_i) (x_i . v) x_i."""
    kind = LossKind(kind)
    _check_labels(data, kind)
    batch = _check_batch(data, batch)
    w = _check_w(data, w)
    v = _check_w(data, v)
    out = np.empty(data.d, dtype=np.float64)
    fn = _k.logistic_hvp if kind is LossKind.LOGISTIC else _k.nllsq_hvp
    fn(data.indptr, data.indices, data.values, data.labels, w, batch, v, out)
    return out


def loss_hessian_diag(kind, data, w, batch=None):
    """Exact diagonal of the batch Hessian: mean of c''_i(t_i) x_i**2."""
    kind = LossKind(kind)
    _check_labels(data, kind)
    batch = _check_batch(data, batch)
    w = _check_w(data, w)
    out = np.empty(data.d, dtype=np.float64)
    fn = _k.logistic_diag if kind is LossKind.LOGISTIC else _k.nllsq_diag
    fn(data.indptr, data.indices, data.values, data.labels, w, batch, out)
    return out


def classification_error(kind, data, w):
    """Misclassified fraction. Both losses predict positive iff x.w >= 0
    (sigmoid(0) = 1/2); the tie x.w = 0 counts as the positive class."""
    kind = LossKind(kind)
    _check_labels(data, kind)
    w = _check_w(data, w)
    mis = _k.count_misclassified(
        data.indptr, data.indices, data.values, w, data.labels, positive_label(kind)
    )
    return mis / data.n


@functools.lru_cache(maxsize=None)
def nllsq_curvature_bound(lo=-50.0, hi=50.0, step=1e-3):
    """sup_t |d2/dt2 (y - sigmoid(t))^2| over both labels, by dense grid."""
    t = np.arange(round((hi - lo) / step) + 1, dtype=np.float64) * step + lo
    s = 1.0 / (1.0 + np.exp(-t))
    sp = s * (1.0 - s)
    spp = sp * (1.0 - 2.0 * s)
    best = 0.0
    for y in (0.0, 1.0):
        h = 2.0 * sp * sp - 2.0 * (y - s) * spp
        best = max(best, float(np.max(np.abs(h))))
    return best


def smoothness_bound(kind, data):
    """Upper bound L_hat = c_kind * max_i ||x_i||^2 on the batch-Hessian
    spectral norm, valid for every batch (rank-one structure)."""
    kind = LossKind(kind)
    mx = _k.max_row_norm_sq(data.indptr, data.values)
    if mx <= 0.0:
        raise DegenerateSmoothnessError("all-zero dataset has no positive smoothness bound")
    c = _LOGISTIC_CURVATURE_BOUND if kind is LossKind.LOGISTIC else nllsq_curvature_bound()
    L_hat = c * mx
    return TheoryParams(L_hat=L_hat, gamma=math.sqrt(data.d) * L_hat)
