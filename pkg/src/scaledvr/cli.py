"""Command-line interface.

Subcommands: run (single config), grid (hyperparameter search), corrupt
(feature-scale a dataset), diag-d0 (warm-up diagonal quality), check-grad
(finite-difference oracle checks), audit (preconditioner bound audit).

Any flag can also be supplied through a flat key=value config file via
--config; explicit flags override file values.
"""

import argparse
import sys

from .dataset import ScalingSpec, corrupt_features, dump_libsvm, load_libsvm, write_libsvm
from .errors import ParseError
from .harness import (
    DEFAULT_SEEDS,
    TABLE_GRID,
    ExperimentConfig,
    audit_run,
    d0_relative_error,
    emit_records,
    gradient_check,
    grid_search,
    prepare_dataset,
    run_experiment,
)


def _parse_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_beta(text):
    t = str(text).strip()
    return "avg" if t == "avg" else float(t)


def _parse_seeds(text):
    return tuple(int(tok) for tok in str(text).split(",") if tok.strip())


def _parse_float_list(text):
    return [float(tok) for tok in str(text).split(",") if tok.strip()]


def _parse_beta_list(text):
    return [_parse_beta(tok) for tok in str(text).split(",") if tok.strip()]


def _parse_int_list(text):
    return [int(tok) for tok in str(text).split(",") if tok.strip()]


def _read_config_file(path):
    out = {}
    with open(path, "r", encoding="ascii") as fh:
        for ln, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            key, sep, value = stripped.partition("=")
            if not sep:
                raise ValueError(f"{path}:{ln}: expected key = value, got {stripped!r}")
            out[key.strip()] = value.strip()
    return out


class _Resolver:
    """Merge precedence: explicit flag > config file > default."""

    def __init__(self, args):
        self.args = args
        self.file = _read_config_file(args.config) if getattr(args, "config", None) else {}

    def get(self, key, conv=str, default=None, required=False):
        val = getattr(self.args, key.replace("-", "_"), None)
        if val is None:
            val = self.file.get(key)
        if val is None:
            if required:
                raise SystemExit(f"error: missing required option --{key}")
            return default
        if isinstance(val, str):
            return conv(val)
        return val


def _add_common(sp, grid=False):
    sp.add_argument("--dataset", help="path to a LibSVM text file")
    sp.add_argument("--loss", choices=["logistic", "nllsq"])
    sp.add_argument("--method", choices=["sarah", "lsvrg", "sgd", "adam"])
    sp.add_argument("--scaled", action=argparse.BooleanOptionalAction, default=None,
                    help="apply the diagonal preconditioner")
    if grid:
        sp.add_argument("--eta", help="comma-separated step sizes")
        sp.add_argument("--alpha", help="comma-separated clipping floors")
        sp.add_argument("--beta", help="comma-separated momenta (numbers or 'avg')")
        sp.add_argument("--batch", help="comma-separated batch sizes")
    else:
        sp.add_argument("--eta", help="step size")
        sp.add_argument("--alpha", help="clipping floor")
        sp.add_argument("--beta", help="preconditioner momentum (number or 'avg')")
        sp.add_argument("--batch", help="minibatch size")
    sp.add_argument("--p", help="refresh/anchor probability (default batch/n)")
    sp.add_argument("--warmup", help="warm-up samples for the diagonal estimate")
    sp.add_argument("--kmin", help="minimum scaling exponent")
    sp.add_argument("--kmax", help="maximum scaling exponent")
    sp.add_argument("--passes", help="budget in effective data passes")
    sp.add_argument("--seeds", help="comma-separated seeds (default 0..9)")
    sp.add_argument("--out", help="output path (default: stdout)")
    sp.add_argument("--format", choices=["csv", "jsonl"])
    sp.add_argument("--config", help="flat key=value config file; flags override")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="scaledvr",
        description="Variance-reduced optimizers with Hutchinson diagonal scaling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("run", help="run one configuration over its seeds"))

    grid = sub.add_parser("grid", help="grid search over eta/alpha/beta/batch")
    _add_common(grid, grid=True)
    grid.add_argument("--objective", choices=["loss", "grad_norm_sq", "error"])

    cor = sub.add_parser("corrupt", help="rescale features on a log grid")
    cor.add_argument("--dataset", required=True)
    cor.add_argument("--kmin", type=int, required=True)
    cor.add_argument("--kmax", type=int, required=True)
    cor.add_argument("--out")

    d0 = sub.add_parser("diag-d0", help="relative error of the warm-up diagonal")
    d0.add_argument("--dataset", required=True)
    d0.add_argument("--loss", choices=["logistic", "nllsq"], required=True)
    d0.add_argument("--warmup")
    d0.add_argument("--batch")
    d0.add_argument("--kmin")
    d0.add_argument("--kmax")
    d0.add_argument("--seeds")
    d0.add_argument("--config")

    cg = sub.add_parser("check-grad", help="finite-difference oracle checks")
    cg.add_argument("--dataset", required=True)
    cg.add_argument("--loss", choices=["logistic", "nllsq"], required=True)
    cg.add_argument("--seeds")
    cg.add_argument("--config")

    _add_common(sub.add_parser("audit", help="run with preconditioner bound auditing"))

    return parser


def _experiment_config(res):
    scaled = res.get("scaled", _parse_bool, default=False)
    return ExperimentConfig(
        dataset=res.get("dataset", str, required=True),
        loss=res.get("loss", str, required=True),
        method=res.get("method", str, required=True),
        eta=res.get("eta", float, required=True),
        scaled=scaled,
        p=res.get("p", float),
        batch=res.get("batch", int, default=128),
        alpha=res.get("alpha", float, default=1e-3),
        beta=res.get("beta", _parse_beta, default=0.999),
        warmup=res.get("warmup", int, default=100),
        kmin=res.get("kmin", int, default=0),
        kmax=res.get("kmax", int, default=0),
        passes=res.get("passes", int, default=10),
        seeds=res.get("seeds", _parse_seeds, default=DEFAULT_SEEDS),
    )


def _emit(records, res):
    out = res.get("out", str)
    fmt = res.get("format", str, default="csv")
    if out is None:
        emit_records(records, sys.stdout, fmt=fmt)
    else:
        emit_records(records, out, fmt=fmt)
        rows = sum(len(r.points) for r in records)
        print(f"wrote {rows} rows ({len(records)} runs) to {out}")


def cmd_run(args):
    res = _Resolver(args)
    cfg = _experiment_config(res)
    records = run_experiment(cfg)
    _emit(records, res)
    return 0


def cmd_grid(args):
    res = _Resolver(args)
    scaled = res.get("scaled", _parse_bool, default=False)
    axes = {}
    eta = res.get("eta", _parse_float_list)
    axes["eta"] = eta if eta is not None else TABLE_GRID["eta"]
    batch = res.get("batch", _parse_int_list)
    axes["batch"] = batch if batch is not None else TABLE_GRID["batch"]
    if scaled:
        alpha = res.get("alpha", _parse_float_list)
        axes["alpha"] = alpha if alpha is not None else TABLE_GRID["alpha"]
        beta = res.get("beta", _parse_beta_list)
        axes["beta"] = beta if beta is not None else TABLE_GRID["beta"]
    template = ExperimentConfig(
        dataset=res.get("dataset", str, required=True),
        loss=res.get("loss", str, required=True),
        method=res.get("method", str, required=True),
        eta=axes["eta"][0],
        scaled=scaled,
        p=res.get("p", float),
        batch=axes["batch"][0],
        alpha=res.get("alpha", lambda s: _parse_float_list(s)[0], default=1e-3) if scaled else 1e-3,
        beta=res.get("beta", lambda s: _parse_beta_list(s)[0], default=0.999) if scaled else 0.999,
        warmup=res.get("warmup", int, default=100),
        kmin=res.get("kmin", int, default=0),
        kmax=res.get("kmax", int, default=0),
        passes=res.get("passes", int, default=10),
        seeds=res.get("seeds", _parse_seeds, default=DEFAULT_SEEDS),
    )
    objective = res.get("objective", str, default="loss")
    result = grid_search(template, axes, objective=objective)
    for cell in result.cells:
        vals = " ".join(f"{k}={v}" for k, v in cell.values.items())
        score = "diverged" if cell.score is None else repr(cell.score)
        print(f"cell {vals} {objective}={score}")
    if result.best is None:
        print("best: none (all cells diverged)")
    else:
        vals = " ".join(f"{k}={v}" for k, v in result.best.values.items())
        print(f"best {vals} {objective}={result.best.score!r}")
    out = res.get("out", str)
    if out is not None:
        fmt = res.get("format", str, default="csv")
        emit_records(result.all_records(), out, fmt=fmt)
        print(f"wrote trajectories to {out}")
    return 0


def cmd_corrupt(args):
    data = load_libsvm(args.dataset)
    data = corrupt_features(data, ScalingSpec(args.kmin, args.kmax))
    if args.out is None:
        write_libsvm(data, sys.stdout)
    else:
        dump_libsvm(data, args.out)
        print(f"wrote {data.n} samples to {args.out}")
    return 0


def cmd_diag_d0(args):
    res = _Resolver(args)
    from .dataset import normalize_labels
    from .losses import LossKind

    kind = LossKind.parse(res.get("loss", str, required=True))
    data = load_libsvm(res.get("dataset", str, required=True))
    data = normalize_labels(data, kind)
    kmin = res.get("kmin", int, default=0)
    kmax = res.get("kmax", int, default=0)
    data = corrupt_features(data, ScalingSpec(kmin, kmax))
    warmup = res.get("warmup", int, default=100)
    batch = res.get("batch", int, default=128)
    seeds = res.get("seeds", _parse_seeds, default=DEFAULT_SEEDS)
    below = 0
    for seed in seeds:
        err = d0_relative_error(data, kind, warmup=warmup, batch_size=min(batch, data.n), seed=seed)
        below += err < 0.1
        print(f"seed {seed}: relative error {err:.6f}")
    print(f"{below}/{len(seeds)} seeds below 0.1")
    return 0


def cmd_check_grad(args):
    res = _Resolver(args)
    from .dataset import normalize_labels
    from .losses import LossKind

    kind = LossKind.parse(res.get("loss", str, required=True))
    data = load_libsvm(res.get("dataset", str, required=True))
    data = normalize_labels(data, kind)
    seeds = res.get("seeds", _parse_seeds, default=(0,))
    report = gradient_check(data, kind, seed=seeds[0])
    print(f"gradient  max relative error {report.grad_rel:.3e} (tol {report.grad_tol:.0e})")
    print(f"hvp       max relative error {report.hvp_rel:.3e} (tol {report.hvp_tol:.0e})")
    print(f"diagonal  max relative error {report.diag_rel:.3e} (tol {report.diag_tol:.0e})")
    print("ok" if report.ok else "FAILED")
    return 0 if report.ok else 1


def cmd_audit(args):
    res = _Resolver(args)
    cfg = _experiment_config(res)
    records, report = audit_run(cfg)
    print(f"observed {report.steps_observed} scaled steps over {len(records)} runs")
    if report.violations:
        for seed, step, coord, value in report.violations[:20]:
            print(f"violation: seed {seed} step {step} coord {coord} value {value!r}")
        print(f"{len(report.violations)} violations")
    else:
        print("no bound violations")
    out = res.get("out", str)
    if out is not None:
        emit_records(records, out, fmt=res.get("format", str, default="csv"))
    return 0 if not report.violations else 1


_COMMANDS = {
    "run": cmd_run,
    "grid": cmd_grid,
    "corrupt": cmd_corrupt,
    "diag-d0": cmd_diag_d0,
    "check-grad": cmd_check_grad,
    "audit": cmd_audit,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
