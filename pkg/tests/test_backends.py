"""Compiled and pure kernels must agree bitwise on everything."""

import numpy as np
import pytest

import scaledvr._kernels_py as pure
from conftest import random_sparse_instance
from scaledvr.losses import LossKind

compiled = pytest.importorskip("scaledvr._kernels")


def make_case(seed, kind):
    data = random_sparse_instance(seed, kind)
    rng = np.random.default_rng(seed + 1000)
    w = rng.normal(size=data.d)
    v = rng.normal(size=data.d)
    batch = np.sort(rng.choice(data.n, size=max(1, data.n // 2), replace=False)).astype(np.int64)
    return data, w, v, batch


@pytest.mark.parametrize("seed", range(8))
def test_value_kernels_bitwise(seed):
    for kind, vf in ((LossKind.LOGISTIC, "logistic_value"), (LossKind.NLLSQ, "nllsq_value")):
        data, w, v, batch = make_case(seed, kind)
        args = (data.indptr, data.indices, data.values, data.labels, w, batch)
        assert getattr(compiled, vf)(*args) == getattr(pure, vf)(*args)


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("fn", ["grad", "diag"])
def test_vector_kernels_bitwise(seed, fn):
    for kind, prefix in ((LossKind.LOGISTIC, "logistic"), (LossKind.NLLSQ, "nllsq")):
        data, w, v, batch = make_case(seed, kind)
        a = np.empty(data.d)
        b = np.empty(data.d)
        args = (data.indptr, data.indices, data.values, data.labels, w, batch)
        getattr(compiled, f"{prefix}_{fn}")(*args, a)
        getattr(pure, f"{prefix}_{fn}")(*args, b)
        assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("seed", range(8))
def test_hvp_kernels_bitwise(seed):
    for kind, prefix in ((LossKind.LOGISTIC, "logistic"), (LossKind.NLLSQ, "nllsq")):
        data, w, v, batch = make_case(seed, kind)
        a = np.empty(data.d)
        b = np.empty(data.d)
        args = (data.indptr, data.indices, data.values, data.labels, w, batch)
        getattr(compiled, f"{prefix}_hvp")(*args, v, a)
        getattr(pure, f"{prefix}_hvp")(*args, v, b)
        assert a.tobytes() == b.tobytes()


def test_misclassified_and_norms_agree():
    for seed in range(8):
        data, w, _, _ = make_case(seed, LossKind.LOGISTIC)
        args = (data.indptr, data.indices, data.values, w, data.labels, 1.0)
        assert compiled.count_misclassified(*args) == pure.count_misclassified(*args)
        assert compiled.max_row_norm_sq(data.indptr, data.values) == pure.max_row_norm_sq(
            data.indptr, data.values
        )


def test_dot_agrees():
    rng = np.random.default_rng(0)
    for size in (0, 1, 7, 129):
        a = rng.normal(size=size)
        b = rng.normal(size=size)
        assert compiled.dot(a, b) == pure.dot(a, b)


def test_rng_fills_agree():
    for state in (0, 1, 2**64 - 1, 0xDEADBEEF):
        a = np.empty(33)
        b = np.empty(33)
        sa = compiled.fill_rademacher(state, a)
        sb = pure.fill_rademacher(state, b)
        assert sa == sb and a.tobytes() == b.tobytes()

        for n, k in ((1, 1), (7, 7), (100, 13), (3, 2)):
            ia = np.empty(k, np.int64)
            ib = np.empty(k, np.int64)
            sa = compiled.fill_sample(state, n, ia)
            sb = pure.fill_sample(state, n, ib)
            assert sa == sb and np.array_equal(ia, ib)

        for n in (1, 2, 17):
            pa = np.empty(n, np.int64)
            pb = np.empty(n, np.int64)
            sa = compiled.fill_permutation(state, pa)
            sb = pure.fill_permutation(state, pb)
            assert sa == sb and np.array_equal(pa, pb)


def test_empty_rows_and_full_batch():
    from scaledvr.dataset import Dataset, SparseRow

    rows = [
        SparseRow(np.array([], dtype=np.int64), np.array([])),
        SparseRow(np.array([0, 2], dtype=np.int64), np.array([1.5, -2.0])),
        SparseRow(np.array([1], dtype=np.int64), np.array([0.25])),
    ]
    data = Dataset.from_rows(rows, [1.0, -1.0, 1.0], d=3)
    w = np.array([0.3, -1.0, 2.0])
    batch = np.arange(3, dtype=np.int64)
    args = (data.indptr, data.indices, data.values, data.labels, w, batch)
    assert compiled.logistic_value(*args) == pure.logistic_value(*args)
    a = np.empty(3)
    b = np.empty(3)
    compiled.logistic_grad(*args, a)
    pure.logistic_grad(*args, b)
    assert a.tobytes() == b.tobytes()


def test_pure_backend_runs_a_full_trajectory(monkeypatch):
    # a whole run through the pure kernels gives the identical trajectory
    import subprocess
    import sys

    code = """
import numpy as np
from scaledvr.backend import backend_name
from scaledvr.dataset import load_libsvm, normalize_labels
from scaledvr.losses import LossKind
from scaledvr.optim import OptimizerConfig, make_problem, run
assert backend_name() == "%s"
data = normalize_labels(load_libsvm("tests/data/tiny.svm"), LossKind.LOGISTIC)
cfg = OptimizerConfig(method="sarah", eta=0.5, scaled=True, batch_size=2,
                      alpha=1e-2, beta=0.999, warmup=2, seed=0)
res = run(cfg, make_problem(data, LossKind.LOGISTIC), 4)
print(repr([(p.passes, p.loss, p.grad_norm_sq, p.error) for p in res.points]))
"""
    outs = {}
    for backend in ("compiled", "pure"):
        proc = subprocess.run(
            [sys.executable, "-c", code % backend],
            capture_output=True,
            text=True,
            env={"SCALEDVR_KERNELS": backend, "PATH": "/usr/bin:/bin"},
            cwd=str(__import__("pathlib").Path(__file__).parent.parent),
        )
        assert proc.returncode == 0, proc.stderr
        outs[backend] = proc.stdout
    assert outs["compiled"] == outs["pure"]
