"""Variance-reduced stochastic optimizers with Hutchinson diagonal scaling.

Library layout:

* ``rng``      seeded SplitMix64 random sources with per-purpose streams
* ``dataset``  LibSVM parsing, label normalization, feature-scale corruption
* ``losses``   logistic / non-linear-least-squares oracles (value, gradient,
  HVP, exact Hessian diagonal, smoothness bound, classification error)
* ``precond``  Hutchinson diagonal-Hessian estimator with momentum + clipping
* ``optim``    SARAH, loopless SVRG, SGD and Adam step engines and run loop
* ``harness``  seeded experiments, grid search, CSV/JSONL records, audits
* ``cli``      the ``scaledvr`` command

Hot kernels live in a compiled Cython core with a bitwise-identical
pure-Python fallback; see ``scaledvr.backend``.
"""

from .backend import backend_name
from .dataset import Dataset, ScalingSpec, SparseRow, corrupt_features, load_libsvm, normalize_labels, parse_libsvm
from .harness import ExperimentConfig, emit_records, grid_search, run_experiment
from .losses import (
    LossKind,
    TheoryParams,
    classification_error,
    loss_grad,
    loss_hessian_diag,
    loss_hvp,
    loss_value,
    smoothness_bound,
)
from .optim import OptimizerConfig, make_problem, run, theoretical_stepsize
from .precond import PrecondState, apply_inverse, hutchinson_sample, precond_clip, precond_init, precond_update
from .rng import RandomSource, Stream, coin, rademacher, sample_batch

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "ExperimentConfig",
    "LossKind",
    "OptimizerConfig",
    "PrecondState",
    "RandomSource",
    "ScalingSpec",
    "SparseRow",
    "Stream",
    "TheoryParams",
    "apply_inverse",
    "backend_name",
    "classification_error",
    "coin",
    "corrupt_features",
    "emit_records",
    "grid_search",
    "hutchinson_sample",
    "load_libsvm",
    "loss_grad",
    "loss_hessian_diag",
    "loss_hvp",
    "loss_value",
    "make_problem",
    "normalize_labels",
    "parse_libsvm",
    "precond_clip",
    "precond_init",
    "precond_update",
    "rademacher",
    "run",
    "run_experiment",
    "sample_batch",
    "smoothness_bound",
    "theoretical_stepsize",
]
