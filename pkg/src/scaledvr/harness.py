"""Experiment harness: seeded runs, grid search, record emission, diagnostics.

A run is described by a flat ExperimentConfig that mirrors the CLI flags.
Each (config, seed) pair produces a TrajectoryRecord: one metrics row per
effective data pass plus the pass-0 row at w0, a status (completed or
diverged), and the exact configuration echo that ends up in the output
columns. Emission is deterministic: rows are sorted by the stringified
configuration, then seed, then pass, and floats are printed with repr
(shortest round-trip form).
"""

import csv
import itertools
import json
import math
import statistics
from dataclasses import dataclass, replace

import numpy as np

from .backend import kernels as _k
from .dataset import ScalingSpec, corrupt_features, load_libsvm, normalize_labels
from .errors import DegenerateDiagnosticError, DivergenceError, InvalidGridError
from .losses import (
    LossKind,
    loss_grad,
    loss_hessian_diag,
    loss_hvp,
    loss_value,
    smoothness_bound,
)
from .optim import (
    OptimizerConfig,
    effective_probability,
    make_problem,
    run,
)
from .precond import precond_init
from .rng import RandomSource, Stream, sample_batch

DEFAULT_SEEDS = tuple(range(10))

# hyperparameter search axes used when the grid subcommand gets no explicit lists
TABLE_GRID = {
    "eta": [2.0**k for k in range(-20, 5, 2)],
    "alpha": [1e-1, 1e-3, 1e-7],
    "beta": [0.95, 0.99, 0.995, 0.999, "avg"],
    "batch": [128, 512],
}

_GRID_AXIS_ORDER = ("eta", "alpha", "beta", "batch")

COLUMNS = [
    "method",
    "scaled",
    "dataset",
    "loss_kind",
    "kmin",
    "kmax",
    "eta",
    "alpha",
    "beta",
    "p",
    "batch",
    "seed",
    "pass",
    "loss",
    "grad_norm_sq",
    "error",
    "status",
]

OBJECTIVES = ("loss", "grad_norm_sq", "error")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    loss: str
    method: str
    eta: float
    scaled: bool = False
    p: float | None = None
    batch: int = 128
    alpha: float = 1e-3
    beta: float | str = 0.999
    warmup: int = 100
    kmin: int = 0
    kmax: int = 0
    scale_seed: int = 0
    passes: int = 10
    seeds: tuple = DEFAULT_SEEDS

    def __post_init__(self):
        if self.passes < 1:
            raise ValueError(f"budget must be at least one pass, got {self.passes}")
        if not self.seeds:
            raise ValueError("seed list must be nonempty")

    def optimizer_config(self, seed):
        return OptimizerConfig(
            method=self.method,
            eta=float(self.eta),
            scaled=self.scaled,
            p=self.p,
            batch_size=self.batch,
            alpha=self.alpha,
            beta=self.beta,
            warmup=self.warmup,
            seed=seed,
        )


@dataclass(frozen=True)
class RecordEcho:
    """Configuration columns echoed into every output row."""

    method: str
    scaled: bool
    dataset: str
    loss_kind: str
    kmin: int
    kmax: int
    eta: float
    alpha: float | None
    beta: float | str | None
    p: float | None
    batch: int

    def columns(self):
        return [_fmt(getattr(self, name)) for name in (
            "method", "scaled", "dataset", "loss_kind", "kmin", "kmax",
            "eta", "alpha", "beta", "p", "batch",
        )]


@dataclass
class TrajectoryRecord:
    echo: RecordEcho
    seed: int
    points: list
    status: str  # "completed" | "diverged"


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dataset_label(path):
    """Basename used in the dataset column (keeps records path-independent)."""
    import os

    return os.path.basename(str(path))


def prepare_dataset(cfg):
    """parse -> normalize labels -> corrupt features, as one deterministic step."""
    kind = LossKind.parse(cfg.loss)
    data = load_libsvm(cfg.dataset)
    data = normalize_labels(data, kind)
    data = corrupt_features(data, ScalingSpec(cfg.kmin, cfg.kmax, seed=cfg.scale_seed))
    return data, kind


def _make_echo(cfg, n):
    ocfg = cfg.optimizer_config(0)
    uses_p = cfg.method in ("sarah", "lsvrg")
    return RecordEcho(
        method=cfg.method,
        scaled=cfg.scaled,
        dataset=dataset_label(cfg.dataset),
        loss_kind=LossKind.parse(cfg.loss).value,
        kmin=cfg.kmin,
        kmax=cfg.kmax,
        eta=float(cfg.eta),
        alpha=cfg.alpha if cfg.scaled else None,
        beta=cfg.beta if cfg.scaled else None,
        p=float(effective_probability(ocfg, n)) if uses_p else None,
        batch=cfg.batch,
    )


def run_single(problem, cfg, seed, echo, audit=None):
    """One seeded run wrapped into a TrajectoryRecord (divergence included)."""
    ocfg = cfg.optimizer_config(seed)
    try:
        result = run(ocfg, problem, cfg.passes, audit=audit)
        return TrajectoryRecord(echo=echo, seed=seed, points=result.points, status="completed")
    except DivergenceError as exc:
        return TrajectoryRecord(echo=echo, seed=seed, points=exc.trajectory, status="diverged")


def run_experiment(cfg, audit=None):
    """Run every seed of the config; returns one TrajectoryRecord per seed."""
    data, kind = prepare_dataset(cfg)
    problem = make_problem(data, kind)
    echo = _make_echo(cfg, problem.n)
    return [run_single(problem, cfg, seed, echo, audit=audit) for seed in cfg.seeds]


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------

@dataclass
class GridCell:
    values: dict
    records: list
    per_seed_best: list
    score: float | None
    status: str  # "completed" | "diverged"


@dataclass
class GridResult:
    objective: str
    cells: list
    best_index: int | None

    @property
    def best(self):
        return None if self.best_index is None else self.cells[self.best_index]

    def all_records(self):
        out = []
        for cell in self.cells:
            out.extend(cell.records)
        return out


def grid_search(cfg, axes, objective="loss"):
    """Cartesian product over the given axis lists (eta, alpha, beta, batch).

    Per cell, the objective's best value is the minimum over recorded passes,
    averaged over seeds; cells where any seed diverged are marked and
    excluded from best selection. Axes not supplied stay at the template
    value, so an empty axes mapping is a single-cell grid.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    for key in axes:
        if key not in _GRID_AXIS_ORDER:
            raise InvalidGridError(f"unknown grid axis {key!r}")
    for key, vals in axes.items():
        if not list(vals):
            raise InvalidGridError(f"axis {key!r} is empty; Cartesian product is empty")

    data, kind = prepare_dataset(cfg)
    problem = make_problem(data, kind)

    lists = [list(axes.get(k, [getattr(cfg, k)])) for k in _GRID_AXIS_ORDER]
    cells = []
    for eta, alpha, beta, batch in itertools.product(*lists):
        cell_cfg = replace(cfg, eta=eta, alpha=alpha, beta=beta, batch=batch)
        echo = _make_echo(cell_cfg, problem.n)
        records = [run_single(problem, cell_cfg, seed, echo) for seed in cell_cfg.seeds]
        bests = []
        for rec in records:
            if rec.status == "completed":
                bests.append(min(getattr(pt, objective) for pt in rec.points))
            else:
                bests.append(None)
        diverged = any(rec.status == "diverged" for rec in records)
        score = None if diverged else statistics.fmean(bests)
        cells.append(
            GridCell(
                values={"eta": eta, "alpha": alpha, "beta": beta, "batch": batch},
                records=records,
                per_seed_best=bests,
                score=score,
                status="diverged" if diverged else "completed",
            )
        )
    best_index = None
    for i, cell in enumerate(cells):
        if cell.score is None:
            continue
        if best_index is None or cell.score < cells[best_index].score:
            best_index = i
    return GridResult(objective=objective, cells=cells, best_index=best_index)


# ---------------------------------------------------------------------------
# record emission / loading
# ---------------------------------------------------------------------------

def _sorted_records(records):
    return sorted(records, key=lambda r: (tuple(r.echo.columns()), r.seed))


def _record_rows(record):
    cfg_cols = record.echo.columns()
    for pt in record.points:
        yield cfg_cols + [
            str(record.seed),
            repr(pt.passes),
            repr(pt.loss),
            repr(pt.grad_norm_sq),
            repr(pt.error),
            record.status,
        ]


def emit_records(records, dest, fmt="csv"):
    """Write records deterministically (config lexicographic, seed, pass)."""
    records = list(records)
    if not records:
        raise ValueError("no records to emit")
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"format must be 'csv' or 'jsonl', got {fmt!r}")
    if hasattr(dest, "write"):
        _emit(records, dest, fmt)
    else:
        with open(dest, "w", encoding="ascii", newline="") as fh:
            _emit(records, fh, fmt)


def _emit(records, fh, fmt):
    ordered = _sorted_records(records)
    if fmt == "csv":
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for rec in ordered:
            for row in _record_rows(rec):
                writer.writerow(row)
    else:
        for rec in ordered:
            for row in _record_rows(rec):
                obj = {
                    "method": rec.echo.method,
                    "scaled": rec.echo.scaled,
                    "dataset": rec.echo.dataset,
                    "loss_kind": rec.echo.loss_kind,
                    "kmin": rec.echo.kmin,
                    "kmax": rec.echo.kmax,
                    "eta": rec.echo.eta,
                    "alpha": rec.echo.alpha,
                    "beta": rec.echo.beta,
                    "p": rec.echo.p,
                    "batch": rec.echo.batch,
                    "seed": rec.seed,
                }
                pt_vals = row[12:16]
                obj["pass"] = float(pt_vals[0])
                obj["loss"] = float(pt_vals[1])
                obj["grad_norm_sq"] = float(pt_vals[2])
                obj["error"] = float(pt_vals[3])
                obj["status"] = rec.status
                fh.write(json.dumps(obj) + "\n")


def _parse_opt(cell, kind=float):
    if cell == "none":
        return None
    if cell == "avg":
        return "avg"
    return kind(cell)


def load_records(source, fmt="csv"):
    """Re-parse emitted records (inverse of emit_records)."""
    from .optim import TrajectoryPoint

    if hasattr(source, "read"):
        return _load(source, fmt)
    with open(source, "r", encoding="ascii", newline="") as fh:
        return _load(fh, fmt)


def _load(fh, fmt):
    from .optim import TrajectoryPoint

    groups = {}
    order = []
    if fmt == "csv":
        reader = csv.reader(fh)
        header = next(reader)
        if header != COLUMNS:
            raise ValueError("unexpected CSV header")
        rows = ({c: v for c, v in zip(COLUMNS, row)} for row in reader)
    else:
        rows = (json.loads(line) for line in fh if line.strip())

    for row in rows:
        if fmt == "csv":
            echo = RecordEcho(
                method=row["method"],
                scaled=row["scaled"] == "true",
                dataset=row["dataset"],
                loss_kind=row["loss_kind"],
                kmin=int(row["kmin"]),
                kmax=int(row["kmax"]),
                eta=float(row["eta"]),
                alpha=_parse_opt(row["alpha"]),
                beta=_parse_opt(row["beta"]),
                p=_parse_opt(row["p"]),
                batch=int(row["batch"]),
            )
        else:
            echo = RecordEcho(
                method=row["method"],
                scaled=bool(row["scaled"]),
                dataset=row["dataset"],
                loss_kind=row["loss_kind"],
                kmin=int(row["kmin"]),
                kmax=int(row["kmax"]),
                eta=float(row["eta"]),
                alpha=row["alpha"],
                beta=row["beta"],
                p=row["p"],
                batch=int(row["batch"]),
            )
        key = (echo, int(row["seed"]), row["status"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(
            TrajectoryPoint(
                passes=float(row["pass"]),
                loss=float(row["loss"]),
                grad_norm_sq=float(row["grad_norm_sq"]),
                error=float(row["error"]),
            )
        )
    return [
        TrajectoryRecord(echo=key[0], seed=key[1], points=pts, status=key[2])
        for key, pts in ((k, groups[k]) for k in order)
    ]


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def relative_error(estimate, exact):
    """Euclidean relative error ||estimate - exact|| / ||exact||."""
    diff = np.ascontiguousarray(estimate - exact, dtype=np.float64)
    exact = np.ascontiguousarray(exact, dtype=np.float64)
    den = math.sqrt(_k.dot(exact, exact))
    if den == 0.0:
        raise DegenerateDiagnosticError("reference diagonal is zero; relative error undefined")
    return math.sqrt(_k.dot(diff, diff)) / den


def d0_relative_error(data, kind, *, warmup=100, batch_size=128, seed=0):
    """Relative error of the warm-up diagonal estimate at w0 = 0 against the
    exact full-dataset Hessian diagonal."""
    kind = LossKind(kind)
    w0 = np.zeros(data.d, dtype=np.float64)
    jstream = RandomSource(seed, Stream.BATCH, 1)
    zstream = RandomSource(seed, Stream.RADEMACHER, 0)

    def hvp(vec):
        batch = sample_batch(jstream, data.n, batch_size)
        return loss_hvp(kind, data, w0, vec, batch)

    state = precond_init(hvp, zstream, warmup, data.d, alpha=1.0, beta=0.999,
                         batch_size=batch_size)
    exact = loss_hessian_diag(kind, data, w0)
    return relative_error(state.diag, exact)


@dataclass
class AuditReport:
    steps_observed: int
    violations: list  # (seed, step, coordinate, value)

    @property
    def ok(self):
        return not self.violations


class BoundAudit:
    """Checks alpha <= Dhat_ii <= gamma + tol on every observed step."""

    def __init__(self, alpha, gamma, tol=1e-9, seed=None, max_stored=1000):
        self.alpha = alpha
        self.gamma = gamma
        self.tol = tol
        self.seed = seed
        self.max_stored = max_stored
        self.steps_observed = 0
        self.violations = []

    def observe(self, step, dhat):
        self.steps_observed += 1
        bad = np.flatnonzero((dhat < self.alpha) | (dhat > self.gamma + self.tol))
        for j in bad:
            if len(self.violations) < self.max_stored:
                self.violations.append((self.seed, int(step), int(j), float(dhat[j])))

    def report(self):
        return AuditReport(steps_observed=self.steps_observed, violations=list(self.violations))


def audit_run(cfg):
    """Run every seed with Lemma-style bound auditing; merged report."""
    data, kind = prepare_dataset(cfg)
    problem = make_problem(data, kind)
    echo = _make_echo(cfg, problem.n)
    gamma = smoothness_bound(kind, data).gamma
    steps = 0
    violations = []
    records = []
    for seed in cfg.seeds:
        audit = BoundAudit(cfg.alpha, gamma, seed=seed)
        records.append(run_single(problem, cfg, seed, echo, audit=audit))
        rep = audit.report()
        steps += rep.steps_observed
        violations.extend(rep.violations)
    return records, AuditReport(steps_observed=steps, violations=violations)


# ---------------------------------------------------------------------------
# gradient checking (finite-difference suite)
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    grad_rel: float
    hvp_rel: float
    diag_rel: float
    grad_tol: float = 1e-6
    hvp_tol: float = 1e-5
    diag_tol: float = 1e-12

    @property
    def ok(self):
        return (
            self.grad_rel <= self.grad_tol
            and self.hvp_rel <= self.hvp_tol
            and self.diag_rel <= self.diag_tol
        )


def gradient_check(data, kind, *, seed=0, points=3, directions=3, h=1e-5):
    """Directional finite-difference checks of the analytic oracles."""
    kind = LossKind(kind)
    rng = np.random.default_rng(seed)
    d = data.d
    grad_rel = 0.0
    hvp_rel = 0.0
    diag_rel = 0.0
    for _ in range(points):
        w = rng.standard_normal(d) * (0.5 / math.sqrt(d))
        g = loss_grad(kind, data, w)
        for _ in range(directions):
            u = rng.standard_normal(d)
            u /= math.sqrt(_k.dot(u, u))
            fd = (loss_value(kind, data, w + h * u) - loss_value(kind, data, w - h * u)) / (2 * h)
            du = _k.dot(g, u)
            grad_rel = max(grad_rel, abs(fd - du) / max(abs(du), 1e-10))
            hv = loss_hvp(kind, data, w, u)
            fg = (loss_grad(kind, data, w + h * u) - loss_grad(kind, data, w - h * u)) / (2 * h)
            diff = fg - hv
            hvp_rel = max(
                hvp_rel,
                math.sqrt(_k.dot(diff, diff)) / max(math.sqrt(_k.dot(hv, hv)), 1e-10),
            )
        diag = loss_hessian_diag(kind, data, w)
        for j in range(min(d, 10)):
            e = np.zeros(d)
            e[j] = 1.0
            hj = loss_hvp(kind, data, w, e)[j]
            diag_rel = max(diag_rel, abs(diag[j] - hj) / max(abs(hj), 1e-10))
    return GradCheckReport(grad_rel=grad_rel, hvp_rel=hvp_rel, diag_rel=diag_rel)
