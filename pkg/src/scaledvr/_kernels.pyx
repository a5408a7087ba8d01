# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled kernels.

Mirrors scaledvr._kernels_py statement for statement; that module documents
the operation-order contract both backends must satisfy (bitwise-identical
results). Keep the two files in lockstep.
"""

from libc.math cimport exp, log1p
from libc.stdlib cimport calloc, free

cimport numpy as cnp

BACKEND = "compiled"

ctypedef cnp.int64_t i64
ctypedef unsigned long long u64

cdef u64 GAMMA = 0x9E3779B97F4A7C15ULL


cdef inline u64 _mix64(u64 z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline u64 _next(u64* state) nogil:
    state[0] = state[0] + GAMMA
    return _mix64(state[0])


cdef inline u64 _bounded(u64* state, u64 k) nogil:
    # unbiased integer in [0, k): reject u64 draws below 2^64 mod k
    cdef u64 lim = (0 - k) % k
    cdef u64 u
    while True:
        u = _next(state)
        if u >= lim:
            return u % k


def fill_rademacher(state_obj, double[::1] out):
    cdef u64 state = <u64> state_obj
    cdef Py_ssize_t i, n = out.shape[0]
    cdef u64 u
    for i in range(n):
        u = _next(&state)
        out[i] = 1.0 if (u >> 63) == 0 else -1.0
    return state


def fill_sample(state_obj, Py_ssize_t n, i64[::1] out):
    cdef u64 state = <u64> state_obj
    cdef Py_ssize_t b = out.shape[0]
    cdef Py_ssize_t filled = 0
    cdef u64 i
    cdef unsigned char* seen = <unsigned char*> calloc(n, 1)
    if seen == NULL:
        raise MemoryError()
    try:
        while filled < b:
            i = _bounded(&state, <u64> n)
            if seen[i] == 0:
                seen[i] = 1
                out[filled] = <i64> i
                filled += 1
    finally:
        free(seen)
    return state


def fill_permutation(state_obj, i64[::1] out):
    cdef u64 state = <u64> state_obj
    cdef Py_ssize_t i, j, n = out.shape[0]
    cdef i64 tmp
    for i in range(n):
        out[i] = i
    for i in range(n - 1):
        j = i + <Py_ssize_t> _bounded(&state, <u64> (n - i))
        tmp = out[i]
        out[i] = out[j]
        out[j] = tmp
    return state


# ---------------------------------------------------------------------------
# scalar loss profiles
# ---------------------------------------------------------------------------

cdef inline double _sigmoid(double t) nogil:
    cdef double e
    if t >= 0.0:
        return 1.0 / (1.0 + exp(-t))
    e = exp(t)
    return e / (1.0 + e)


cdef inline double _logistic_value(double t, double y) nogil:
    cdef double m = y * t
    if m >= 0.0:
        return log1p(exp(-m))
    return -m + log1p(exp(m))


cdef inline double _logistic_dloss(double t, double y) nogil:
    cdef double m = y * t
    cdef double e, s
    if m >= 0.0:
        e = exp(-m)
        s = e / (1.0 + e)
    else:
        s = 1.0 / (1.0 + exp(m))
    return -y * s


cdef inline double _logistic_curv(double t, double y) nogil:
    cdef double s = _sigmoid(t)
    return s * (1.0 - s)


cdef inline double _nllsq_value(double t, double y) nogil:
    cdef double s = _sigmoid(t)
    cdef double r = y - s
    return r * r


cdef inline double _nllsq_dloss(double t, double y) nogil:
    cdef double s = _sigmoid(t)
    cdef double r = y - s
    return -2.0 * r * (s * (1.0 - s))


cdef inline double _nllsq_curv(double t, double y) nogil:
    cdef double s = _sigmoid(t)
    cdef double sp = s * (1.0 - s)
    cdef double r = y - s
    return 2.0 * sp * sp - 2.0 * r * (sp * (1.0 - 2.0 * s))


# ---------------------------------------------------------------------------
# CSR batch kernels
# ---------------------------------------------------------------------------

cdef inline double _row_dot(i64[::1] ip, i64[::1] idx, double[::1] val,
                            double[::1] w, Py_ssize_t i) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t k
    for k in range(ip[i], ip[i + 1]):
        acc += val[k] * w[idx[k]]
    return acc


cdef double _value_impl(int kind, i64[::1] ip, i64[::1] idx, double[::1] val,
                        double[::1] lab, double[::1] w, i64[::1] batch) nogil:
    cdef double acc = 0.0
    cdef double t
    cdef Py_ssize_t bi, i
    for bi in range(batch.shape[0]):
        i = <Py_ssize_t> batch[bi]
        t = _row_dot(ip, idx, val, w, i)
        if kind == 0:
            acc += _logistic_value(t, lab[i])
        else:
            acc += _nllsq_value(t, lab[i])
    return acc / (<double> batch.shape[0])


cdef void _grad_impl(int kind, i64[::1] ip, i64[::1] idx, double[::1] val,
                     double[::1] lab, double[::1] w, i64[::1] batch,
                     double[::1] out) nogil:
    cdef Py_ssize_t d = out.shape[0]
    cdef Py_ssize_t bi, i, k
    cdef double t, c, nb
    for k in range(d):
        out[k] = 0.0
    for bi in range(batch.shape[0]):
        i = <Py_ssize_t> batch[bi]
        t = _row_dot(ip, idx, val, w, i)
        if kind == 0:
            c = _logistic_dloss(t, lab[i])
        else:
            c = _nllsq_dloss(t, lab[i])
        for k in range(ip[i], ip[i + 1]):
            out[idx[k]] += c * val[k]
    nb = <double> batch.shape[0]
    for k in range(d):
        out[k] = out[k] / nb


cdef void _hvp_impl(int kind, i64[::1] ip, i64[::1] idx, double[::1] val,
                    double[::1] lab, double[::1] w, i64[::1] batch,
                    double[::1] v, double[::1] out) nogil:
    cdef Py_ssize_t d = out.shape[0]
    cdef Py_ssize_t bi, i, k
    cdef double t, u, c, nb
    for k in range(d):
        out[k] = 0.0
    for bi in range(batch.shape[0]):
        i = <Py_ssize_t> batch[bi]
        t = _row_dot(ip, idx, val, w, i)
        u = _row_dot(ip, idx, val, v, i)
        if kind == 0:
            c = _logistic_curv(t, lab[i]) * u
        else:
            c = _nllsq_curv(t, lab[i]) * u
        for k in range(ip[i], ip[i + 1]):
            out[idx[k]] += c * val[k]
    nb = <double> batch.shape[0]
    for k in range(d):
        out[k] = out[k] / nb


cdef void _diag_impl(int kind, i64[::1] ip, i64[::1] idx, double[::1] val,
                     double[::1] lab, double[::1] w, i64[::1] batch,
                     double[::1] out) nogil:
    cdef Py_ssize_t d = out.shape[0]
    cdef Py_ssize_t bi, i, k
    cdef double t, c, nb
    for k in range(d):
        out[k] = 0.0
    for bi in range(batch.shape[0]):
        i = <Py_ssize_t> batch[bi]
        t = _row_dot(ip, idx, val, w, i)
        if kind == 0:
            c = _logistic_curv(t, lab[i])
        else:
            c = _nllsq_curv(t, lab[i])
        for k in range(ip[i], ip[i + 1]):
            out[idx[k]] += c * val[k] * val[k]
    nb = <double> batch.shape[0]
    for k in range(d):
        out[k] = out[k] / nb


def logistic_value(i64[::1] indptr, i64[::1] indices, double[::1] values,
                   double[::1] labels, double[::1] w, i64[::1] batch):
    return _value_impl(0, indptr, indices, values, labels, w, batch)


def logistic_grad(i64[::1] indptr, i64[::1] indices, double[::1] values,
                  double[::1] labels, double[::1] w, i64[::1] batch,
                  double[::1] out):
    _grad_impl(0, indptr, indices, values, labels, w, batch, out)


def logistic_hvp(i64[::1] indptr, i64[::1] indices, double[::1] values,
                 double[::1] labels, double[::1] w, i64[::1] batch,
                 double[::1] v, double[::1] out):
    _hvp_impl(0, indptr, indices, values, labels, w, batch, v, out)


def logistic_diag(i64[::1] indptr, i64[::1] indices, double[::1] values,
                  double[::1] labels, double[::1] w, i64[::1] batch,
                  double[::1] out):
    _diag_impl(0, indptr, indices, values, labels, w, batch, out)


def nllsq_value(i64[::1] indptr, i64[::1] indices, double[::1] values,
                double[::1] labels, double[::1] w, i64[::1] batch):
    return _value_impl(1, indptr, indices, values, labels, w, batch)


def nllsq_grad(i64[::1] indptr, i64[::1] indices, double[::1] values,
               double[::1] labels, double[::1] w, i64[::1] batch,
               double[::1] out):
    _grad_impl(1, indptr, indices, values, labels, w, batch, out)


def nllsq_hvp(i64[::1] indptr, i64[::1] indices, double[::1] values,
              double[::1] labels, double[::1] w, i64[::1] batch,
              double[::1] v, double[::1] out):
    _hvp_impl(1, indptr, indices, values, labels, w, batch, v, out)


def nllsq_diag(i64[::1] indptr, i64[::1] indices, double[::1] values,
               double[::1] labels, double[::1] w, i64[::1] batch,
               double[::1] out):
    _diag_impl(1, indptr, indices, values, labels, w, batch, out)


def count_misclassified(i64[::1] indptr, i64[::1] indices, double[::1] values,
                        double[::1] w, double[::1] labels,
                        double positive_label):
    # tie rule: x.w = 0 predicts the positive class
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i
    cdef double t
    cdef long mis = 0
    cdef bint pred_pos, is_pos
    for i in range(n):
        t = _row_dot(indptr, indices, values, w, i)
        pred_pos = t >= 0.0
        is_pos = labels[i] == positive_label
        if pred_pos != is_pos:
            mis += 1
    return mis


def max_row_norm_sq(i64[::1] indptr, double[::1] values):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, k
    cdef double best = 0.0
    cdef double acc
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += values[k] * values[k]
        if acc > best:
            best = acc
    return best


def dot(double[::1] a, double[::1] b):
    cdef double acc = 0.0
    cdef Py_ssize_t k
    for k in range(a.shape[0]):
        acc += a[k] * b[k]
    return acc
