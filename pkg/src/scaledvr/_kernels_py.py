"""Pure-Python kernels: the numeric reference for the compiled backend.

This module fixes the exact sequence of floating-point operations for every
hot kernel. The compiled twin (``scaledvr._kernels``, Cython) mirrors these
loops statement for statement, and the two backends must produce
bitwise-identical results: reductions accumulate left to right in sample
order and, within a row, in stored index order; batch means accumulate the
raw sum first and divide once at the end; libm (exp, log1p) is shared with
CPython's math module. Keep any edit here in lockstep with the .pyx file.

The random kernels implement SplitMix64 (Steele, Lea & Flood; the mixer
behind Java's SplittableRandom):

    state := (state + 0x9E3779B97F4A7C15) mod 2^64
    z := state
    z := ((z xor (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z := ((z xor (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output := z xor (z >> 31)

Derived quantities (also documented in README):

* bounded integer in [0, k): draw u64, accept when u >= 2^64 mod k,
  return u mod k (classic rejection; unbiased).
* Rademacher component: +1.0 when the top bit of the u64 is 0, else -1.0.
* batch sample without replacement: repeat bounded(n) draws, keeping the
  first b distinct values in draw order.
* permutation: Fisher-Yates, j = i + bounded(n - i) for i = 0..n-2.
"""

import math

BACKEND = "pure"

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_TWO64 = 1 << 64


def mix64(z):
    """SplitMix64 output mixer (a bijection on 64-bit integers)."""
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def next_u64(state):
    """Advance SplitMix64; returns (new_state, output)."""
    state = (state + GAMMA) & MASK64
    return state, mix64(state)


def _bounded(state, k):
    # unbiased integer in [0, k): reject u64 draws below 2^64 mod k
    lim = _TWO64 % k
    while True:
        state, u = next_u64(state)
        if u >= lim:
            return state, u % k


def fill_rademacher(state, out):
    for i in range(len(out)):
        state, u = next_u64(state)
        out[i] = 1.0 if (u >> 63) == 0 else -1.0
    return state


def fill_sample(state, n, out):
    b = len(out)
    seen = set()
    filled = 0
    while filled < b:
        state, i = _bounded(state, n)
        if i not in seen:
            seen.add(i)
            out[filled] = i
            filled += 1
    return state


def fill_permutation(state, out):
    n = len(out)
    for i in range(n):
        out[i] = i
    for i in range(n - 1):
        state, off = _bounded(state, n - i)
        j = i + off
        out[i], out[j] = out[j], out[i]
    return state


# ---------------------------------------------------------------------------
# scalar loss profiles (per-sample, as functions of the margin t = x.w)
# ---------------------------------------------------------------------------

def sigmoid(t):
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def logistic_scalar_value(t, y):
    m = y * t
    if m >= 0.0:
        return math.log1p(math.exp(-m))
    return -m + math.log1p(math.exp(m))


def logistic_scalar_dloss(t, y):
    # d/dt log(1 + exp(-y t)) = -y * sigmoid(-y t)
    m = y * t
    if m >= 0.0:
        e = math.exp(-m)
        s = e / (1.0 + e)
    else:
        s = 1.0 / (1.0 + math.exp(m))
    return -y * s

def logistic_scalar_curvature(t, y):
    s = sigmoid(t)
    return s * (1.0 - s)


def nllsq_scalar_value(t, y):
    s = sigmoid(t)
    r = y - s
    return r * r


def nllsq_scalar_dloss(t, y):
    s = sigmoid(t)
    r = y - s
    return -2.0 * r * (s * (1.0 - s))


def nllsq_scalar_curvature(t, y):
    s = sigmoid(t)
    sp = s * (1.0 - s)
    r = y - s
    return 2.0 * sp * sp - 2.0 * r * (sp * (1.0 - 2.0 * s))


# ---------------------------------------------------------------------------
# CSR batch kernels
# ---------------------------------------------------------------------------

def _row_dot(ip, idx, val, wl, i):
    acc = 0.0
    for k in range(ip[i], ip[i + 1]):
        acc += val[k] * wl[idx[k]]
    return acc


def _value(indptr, indices, values, labels, w, batch, scalar_value):
    ip = indptr.tolist()
    idx = indices.tolist()
    val = values.tolist()
    lab = labels.tolist()
    wl = w.tolist()
    acc = 0.0
    for i in batch.tolist():
        t = _row_dot(ip, idx, val, wl, i)
        acc += scalar_value(t, lab[i])
    return acc / float(len(batch))


def _grad(indptr, indices, values, labels, w, batch, scalar_dloss, out):
    ip = indptr.tolist()
    idx = indices.tolist()
    val = values.tolist()
    lab = labels.tolist()
    wl = w.tolist()
    g = [0.0] * len(out)
    for i in batch.tolist():
        t = _row_dot(ip, idx, val, wl, i)
        c = scalar_dloss(t, lab[i])
        for k in range(ip[i], ip[i + 1]):
            g[idx[k]] += c * val[k]
    nb = float(len(batch))
    for j in range(len(out)):
        out[j] = g[j] / nb


def _hvp(indptr, indices, values, labels, w, batch, scalar_curvature, v, out):
    ip = indptr.tolist()
    idx = indices.tolist()
    val = values.tolist()
    lab = labels.tolist()
    wl = w.tolist()
    vl = v.tolist()
    g = [0.0] * len(out)
    for i in batch.tolist():
        t = _row_dot(ip, idx, val, wl, i)
        u = _row_dot(ip, idx, val, vl, i)
        c = scalar_curvature(t, lab[i]) * u
        for k in range(ip[i], ip[i + 1]):
            g[idx[k]] += c * val[k]
    nb = float(len(batch))
    for j in range(len(out)):
        out[j] = g[j] / nb


def _diag(indptr, indices, values, labels, w, batch, scalar_curvature, out):
    ip = indptr.tolist()
    idx = indices.tolist()
    val = values.tolist()
    lab = labels.tolist()
    wl = w.tolist()
    g = [0.0] * len(out)
    for i in batch.tolist():
        t = _row_dot(ip, idx, val, wl, i)
        c = scalar_curvature(t, lab[i])
        for k in range(ip[i], ip[i + 1]):
            g[idx[k]] += c * val[k] * val[k]
    nb = float(len(batch))
    for j in range(len(out)):
        out[j] = g[j] / nb


def logistic_value(indptr, indices, values, labels, w, batch):
    return _value(indptr, indices, values, labels, w, batch, logistic_scalar_value)


def logistic_grad(indptr, indices, values, labels, w, batch, out):
    _grad(indptr, indices, values, labels, w, batch, logistic_scalar_dloss, out)


def logistic_hvp(indptr, indices, values, labels, w, batch, v, out):
    _hvp(indptr, indices, values, labels, w, batch, logistic_scalar_curvature, v, out)


def logistic_diag(indptr, indices, values, labels, w, batch, out):
    _diag(indptr, indices, values, labels, w, batch, logistic_scalar_curvature, out)


def nllsq_value(indptr, indices, values, labels, w, batch):
    return _value(indptr, indices, values, labels, w, batch, nllsq_scalar_value)


def nllsq_grad(indptr, indices, values, labels, w, batch, out):
    _grad(indptr, indices, values, labels, w, batch, nllsq_scalar_dloss, out)


def nllsq_hvp(indptr, indices, values, labels, w, batch, v, out):
    _hvp(indptr, indices, values, labels, w, batch, nllsq_scalar_curvature, v, out)


def nllsq_diag(indptr, indices, values, labels, w, batch, out):
    _diag(indptr, indices, values, labels, w, batch, nllsq_scalar_curvature, out)


def count_misclassified(indptr, indices, values, w, labels, positive_label):
    """Tie rule: x.w = 0 predicts the positive class."""
    ip = indptr.tolist()
    idx = indices.tolist()
    val = values.tolist()
    lab = labels.tolist()
    wl = w.tolist()
    n = len(ip) - 1
    mis = 0
    for i in range(n):
        t = _row_dot(ip, idx, val, wl, i)
        pred_pos = t >= 0.0
        is_pos = lab[i] == positive_label
        if pred_pos != is_pos:
            mis += 1
    return mis


def max_row_norm_sq(indptr, values):
    ip = indptr.tolist()
    val = values.tolist()
    n = len(ip) - 1
    best = 0.0
    for i in range(n):
        acc = 0.0
        for k in range(ip[i], ip[i + 1]):
            acc += val[k] * val[k]
        if acc > best:
            best = acc
    return best


def dot(a, b):
    al = a.tolist()
    bl = b.tolist()
    acc = 0.0
    for k in range(len(al)):
        acc += al[k] * bl[k]
    return acc
