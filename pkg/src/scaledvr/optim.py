"""Step engines: SARAH, loopless SVRG, SGD, Adam, with optional diagonal scaling.

Update sketches (eta = step size, Dhat = clipped diagonal, p = refresh or
anchor probability, gB = minibatch gradient on batch B):

  sarah   w+ = w - eta Dhat^-1 v;  v+ = full gradient        w.p. p
                                   v + gB(w+) - gB(w)        w.p. 1-p
  lsvrg   w+ = w - eta Dhat^-1 v;  z+ = z w.p. p, else the pre-step iterate w
          (recomputing the cached full gradient at the new anchor);
          v+ = gB(w+) - gB(z+) + grad(z+)        (unbiased)
  sgd     w+ = w - eta Dhat^-1 gB(w)
  adam    bias-corrected moment estimates, w+ = w - eta m^ / (sqrt(v^) + eps)
          (always unscaled)

Unscaled runs use the identity in place of Dhat. Scaled runs refresh the
preconditioner once per step with a Hutchinson probe at the new iterate on
an independent batch.

Cost accounting, in component-gradient equivalents: a full gradient costs
n, a minibatch gradient costs b, and one Hutchinson update costs 2|J| (an
HVP is two gradient-shaped passes). The run loop records full-dataset
metrics whenever the cumulative count crosses a multiple of n, including
crossings during warm-up and estimator initialization.

Stream discipline (fixed so that scaled and unscaled runs with one seed
see identical gradient batches and coins; all draws happen every step,
used or not):

  (seed, batch-sampling, 0)   gradient minibatches
  (seed, batch-sampling, 1)   preconditioner batches J
  (seed, rademacher,     0)   Hutchinson probe vectors
  (seed, coin-flip,      0)   sarah refresh / lsvrg anchor coins
  (seed, coin-flip,      1)   uniform choice of the returned iterate

Per step, sarah draws: gradient batch, then (scaled only) probe z and batch
J, then the coin. lsvrg draws the coin first (anchor update precedes batch
generation), then the gradient batch, then z and J.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .backend import kernels as _k
from .errors import (
    DivergenceError,
    InvalidBatchError,
    InvalidProbabilityError,
    InvalidWarmupError,
)
from .losses import (
    LossKind,
    classification_error,
    loss_grad,
    loss_hessian_diag,
    loss_hvp,
    loss_value,
)
from .precond import (
    BETA_AVERAGING,
    PrecondState,
    apply_inverse,
    precond_clip,
    precond_init,
    precond_update,
)
from .rng import RandomSource, Stream, coin, rademacher, sample_batch

METHODS = ("sarah", "lsvrg", "sgd", "adam")


@dataclass
class OptimizerConfig:
    method: str
    eta: float
    scaled: bool = False
    p: float | None = None  # default b/n, one expected refresh per epoch
    batch_size: int = 128
    alpha: float = 1e-3
    beta: float | str = 0.999
    warmup: int = 100
    precond_batch_size: int | None = None  # default: batch_size
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.eta > 0.0:
            raise ValueError(f"step size must be positive, got {self.eta}")
        if self.batch_size < 1:
            raise InvalidBatchError(f"batch size must be >= 1, got {self.batch_size}")
        if self.p is not None and not 0.0 < self.p <= 1.0:
            raise InvalidProbabilityError(f"p must lie in (0, 1], got {self.p}")
        if self.scaled:
            if self.method == "adam":
                raise ValueError("adam always runs unscaled")
            if self.alpha <= 0.0:
                raise ValueError(f"alpha must be positive, got {self.alpha}")
            if self.warmup < 1:
                raise InvalidWarmupError(f"warm-up needs m >= 1, got {self.warmup}")
            if isinstance(self.beta, str) and self.beta != BETA_AVERAGING:
                raise ValueError(f"beta must be a number or 'avg', got {self.beta!r}")


@dataclass
class RunStreams:
    batch: RandomSource
    precond_batch: RandomSource
    rademacher: RandomSource
    coin: RandomSource
    select: RandomSource

    @classmethod
    def from_seed(cls, seed):
        return cls(
            batch=RandomSource(seed, Stream.BATCH, 0),
            precond_batch=RandomSource(seed, Stream.BATCH, 1),
            rademacher=RandomSource(seed, Stream.RADEMACHER, 0),
            coin=RandomSource(seed, Stream.COIN, 0),
            select=RandomSource(seed, Stream.COIN, 1),
        )


@dataclass
class OptimizerState:
    w: np.ndarray
    v: np.ndarray | None = None
    z: np.ndarray | None = None
    anchor_grad: np.ndarray | None = None
    precond: PrecondState | None = None
    adam_m: np.ndarray | None = None
    adam_v: np.ndarray | None = None
    t: int = 0
    evals: int = 0


@dataclass
class DatasetProblem:
    """Finite-sum oracle bundle over a Dataset and a loss kind."""

    data: object
    kind: LossKind

    @property
    def n(self):
        return self.data.n

    @property
    def d(self):
        return self.data.d

    def value(self, w, batch=None):
        return loss_value(self.kind, self.data, w, batch)

    def grad(self, w, batch=None):
        return loss_grad(self.kind, self.data, w, batch)

    def hvp(self, w, v, batch=None):
        return loss_hvp(self.kind, self.data, w, v, batch)

    def hessian_diag(self, w, batch=None):
        return loss_hessian_diag(self.kind, self.data, w, batch)

    def error(self, w):
        return classification_error(self.kind, self.data, w)


def make_problem(data, kind):
    return DatasetProblem(data=data, kind=LossKind(kind))


def effective_probability(cfg, n):
    """Refresh/anchor probability actually used: cfg.p, or b/n when unset."""
    return cfg.p if cfg.p is not None else cfg.batch_size / n


def _charge(state, cost, on_cost):
    state.evals += cost
    if on_cost is not None:
        on_cost()


def _precond_batch_size(cfg):
    return cfg.precond_batch_size if cfg.precond_batch_size is not None else cfg.batch_size


def _precond_hvp(state, cfg, problem, streams, on_cost):
    # each call draws a fresh independent batch and evaluates curvature at
    # the current iterate
    jb = _precond_batch_size(cfg)

    def hvp(vec):
        batch = sample_batch(streams.precond_batch, problem.n, jb)
        out = problem.hvp(state.w, vec, batch)
        _charge(state, 2 * jb, on_cost)
        return out

    return hvp


def _apply_direction(state, cfg, vec, audit):
    if state.precond is None:
        return vec
    dhat = precond_clip(state.precond)
    if audit is not None:
        audit.observe(state.t, dhat)
    return apply_inverse(dhat, vec)


def _update_precond(state, cfg, problem, streams, on_cost):
    if state.precond is not None:
        hvp = _precond_hvp(state, cfg, problem, streams, on_cost)
        precond_update(state.precond, hvp, streams.rademacher)


def _check_finite(state):
    if not np.all(np.isfinite(state.w)):
        raise DivergenceError(f"non-finite iterate at step {state.t}")
    if state.v is not None and not np.all(np.isfinite(state.v)):
        raise DivergenceError(f"non-finite gradient estimator at step {state.t}")


def _init_phases(state, cfg, problem, streams, on_cost=None, audit=None):
    if cfg.batch_size > problem.n:
        raise InvalidBatchError(
            f"batch size {cfg.batch_size} exceeds sample count {problem.n}"
        )
    if cfg.scaled:
        jb = _precond_batch_size(cfg)
        if jb > problem.n:
            raise InvalidBatchError(
                f"preconditioner batch size {jb} exceeds sample count {problem.n}"
            )
        hvp = _precond_hvp(state, cfg, problem, streams, on_cost)
        state.precond = precond_init(
            hvp,
            streams.rademacher,
            cfg.warmup,
            problem.d,
            alpha=cfg.alpha,
            beta=cfg.beta,
            batch_size=jb,
        )
    if cfg.method in ("sarah", "lsvrg"):
        state.v = problem.grad(state.w)
        _charge(state, problem.n, on_cost)
    if cfg.method == "lsvrg":
        state.z = state.w
        state.anchor_grad = state.v
    if cfg.method == "adam":
        state.adam_m = np.zeros(problem.d, dtype=np.float64)
        state.adam_v = np.zeros(problem.d, dtype=np.float64)
    return state


def init_state(cfg, problem, streams=None):
    """Fresh state at w0 = 0: warm-up done, estimator v0 = full gradient."""
    if streams is None:
        streams = RunStreams.from_seed(cfg.seed)
    state = OptimizerState(w=np.zeros(problem.d, dtype=np.float64))
    return _init_phases(state, cfg, problem, streams)


def sarah_step(state, cfg, problem, streams, on_cost=None, audit=None):
    w_old = state.w
    state.w = w_old - cfg.eta * _apply_direction(state, cfg, state.v, audit)
    batch = sample_batch(streams.batch, problem.n, cfg.batch_size)
    _update_precond(state, cfg, problem, streams, on_cost)
    if coin(streams.coin, effective_probability(cfg, problem.n)):
        state.v = problem.grad(state.w)
        _charge(state, problem.n, on_cost)
    else:
        g_new = problem.grad(state.w, batch)
        g_old = problem.grad(w_old, batch)
        state.v = state.v + g_new - g_old
        _charge(state, 2 * cfg.batch_size, on_cost)
    state.t += 1
    _check_finite(state)
    return state


def lsvrg_estimate(problem, w, z, anchor_grad, batch):
    """Unbiased gradient estimate g_B(w) - g_B(z) + anchor_grad."""
    return problem.grad(w, batch) - problem.grad(z, batch) + anchor_grad


def lsvrg_step(state, cfg, problem, streams, on_cost=None, audit=None):
    w_old = state.w
    state.w = w_old - cfg.eta * _apply_direction(state, cfg, state.v, audit)
    if not coin(streams.coin, effective_probability(cfg, problem.n)):
        # anchor moves to the pre-step iterate; refresh the cached gradient
        state.z = w_old
        state.anchor_grad = problem.grad(state.z)
        _charge(state, problem.n, on_cost)
    batch = sample_batch(streams.batch, problem.n, cfg.batch_size)
    _update_precond(state, cfg, problem, streams, on_cost)
    state.v = lsvrg_estimate(problem, state.w, state.z, state.anchor_grad, batch)
    _charge(state, 2 * cfg.batch_size, on_cost)
    state.t += 1
    _check_finite(state)
    return state


def sgd_step(state, cfg, problem, streams, on_cost=None, audit=None):
    batch = sample_batch(streams.batch, problem.n, cfg.batch_size)
    g = problem.grad(state.w, batch)
    _charge(state, cfg.batch_size, on_cost)
    state.w = state.w - cfg.eta * _apply_direction(state, cfg, g, audit)
    _update_precond(state, cfg, problem, streams, on_cost)
    state.t += 1
    _check_finite(state)
    return state


def adam_step(state, cfg, problem, streams, on_cost=None, audit=None):
    batch = sample_batch(streams.batch, problem.n, cfg.batch_size)
    g = problem.grad(state.w, batch)
    _charge(state, cfg.batch_size, on_cost)
    t = state.t + 1
    state.adam_m = cfg.adam_beta1 * state.adam_m + (1.0 - cfg.adam_beta1) * g
    state.adam_v = cfg.adam_beta2 * state.adam_v + (1.0 - cfg.adam_beta2) * (g * g)
    m_hat = state.adam_m / (1.0 - cfg.adam_beta1**t)
    v_hat = state.adam_v / (1.0 - cfg.adam_beta2**t)
    state.w = state.w - cfg.eta * (m_hat / (np.sqrt(v_hat) + cfg.adam_eps))
    state.t = t
    _check_finite(state)
    return state


_STEP_FNS = {
    "sarah": sarah_step,
    "lsvrg": lsvrg_step,
    "sgd": sgd_step,
    "adam": adam_step,
}


def step_fn(method):
    return _STEP_FNS[method]


class Driver:
    """One optimizer run: owns the streams and state, steps on demand."""

    def __init__(self, cfg, problem, on_cost=None, audit=None):
        self.cfg = cfg
        self.problem = problem
        self.streams = RunStreams.from_seed(cfg.seed)
        self._on_cost = on_cost
        self._audit = audit
        self._step = _STEP_FNS[cfg.method]
        self.state = OptimizerState(w=np.zeros(problem.d, dtype=np.float64))

    def initialize(self):
        _init_phases(
            self.state, self.cfg, self.problem, self.streams,
            on_cost=self._on_cost, audit=self._audit,
        )
        return self.state

    def step(self):
        return self._step(
            self.state, self.cfg, self.problem, self.streams,
            on_cost=self._on_cost, audit=self._audit,
        )


@dataclass
class StepsizeDiagnostics:
    """Largest step sizes backed by the convergence analysis."""

    eta_bar_sarah: float
    eta_bar_lsvrg: float
    within_theory: bool


def theoretical_stepsize(params, alpha, p, eta=None, method=None):
    """Step-size bounds alpha/(L(1+sqrt((1-p)/p))) for sarah and
    min{alpha/4L, sqrt(p) alpha / (sqrt(24) L), (p^(2/3)/144^(2/3)) alpha/L}
    for lsvrg; within_theory says whether the supplied eta respects the
    bound for the supplied method (both methods when method is None)."""
    if not 0.0 < p <= 1.0:
        raise InvalidProbabilityError(f"p must lie in (0, 1], got {p}")
    if params.L_hat <= 0.0 or alpha <= 0.0:
        raise ValueError("theoretical step sizes need L_hat > 0 and alpha > 0")
    L = params.L_hat
    eta_sarah = alpha / (L * (1.0 + math.sqrt((1.0 - p) / p)))
    eta_lsvrg = min(
        alpha / (4.0 * L),
        math.sqrt(p) * alpha / (math.sqrt(24.0) * L),
        (p ** (2.0 / 3.0) / 144.0 ** (2.0 / 3.0)) * alpha / L,
    )
    if eta is None:
        within = False
    elif method == "sarah":
        within = eta <= eta_sarah
    elif method == "lsvrg":
        within = eta <= eta_lsvrg
    else:
        within = eta <= min(eta_sarah, eta_lsvrg)
    return StepsizeDiagnostics(
        eta_bar_sarah=eta_sarah, eta_bar_lsvrg=eta_lsvrg, within_theory=within
    )


@dataclass
class TrajectoryPoint:
    """Full-dataset metrics at one pass boundary."""

    passes: float
    loss: float
    grad_norm_sq: float
    error: float


@dataclass
class RunResult:
    points: list
    w_hat: np.ndarray
    evals: int


def run(cfg, problem, passes, *, metrics_hook=None, audit=None):
    """Run until the effective-pass budget is exhausted.

    Records one TrajectoryPoint whenever the evaluation counter crosses a
    multiple of n (plus the pass-0 row at w0), and returns the trajectory
    together with an iterate drawn uniformly from the recorded snapshots.
    Raises DivergenceError (carrying the rows recorded so far) on a
    non-finite iterate, estimator, or metric.
    """
    if passes < 1:
        raise ValueError(f"budget must be at least one pass, got {passes}")
    n = problem.n
    budget = passes * n
    points = []
    snapshots = []
    next_boundary = [n]

    driver = Driver(cfg, problem)

    def record():
        w = driver.state.w
        loss = problem.value(w)
        g = problem.grad(w)
        gnsq = _k.dot(g, g)
        err = problem.error(w)
        if not (math.isfinite(loss) and math.isfinite(gnsq) and math.isfinite(err)):
            raise DivergenceError(
                f"non-finite metrics at pass {driver.state.evals / n:g}", points
            )
        pt = TrajectoryPoint(driver.state.evals / n, loss, gnsq, err)
        points.append(pt)
        snapshots.append(w)
        if metrics_hook is not None:
            metrics_hook(pt, w)

    def on_cost():
        if driver.state.evals >= next_boundary[0]:
            record()
            next_boundary[0] = (driver.state.evals // n + 1) * n

    driver._on_cost = on_cost
    driver._audit = audit

    record()  # pass-0 row at w0
    try:
        driver.initialize()
        while driver.state.evals < budget:
            driver.step()
    except DivergenceError as exc:
        exc.trajectory = points
        raise
    pick = int(sample_batch(driver.streams.select, len(snapshots), 1)[0])
    return RunResult(points=points, w_hat=snapshots[pick].copy(), evals=driver.state.evals)
