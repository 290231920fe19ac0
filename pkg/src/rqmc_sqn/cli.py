"""``rqmc-sqn`` command line: sample, optimize, sweep, verify.

Exit codes: 0 success, 1 acceptance failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys

from .config import ConfigError, ExperimentConfig, load_config
from .optim import write_atomic

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

# flag dest -> ExperimentConfig field
_OVERRIDES = {
    "model": "model", "sampler": "sampler", "optimizer": "optimizer", "n_grad": "n_grad",
    "n_hess": "n_hess", "interval_B": "interval_B", "memory": "memory", "alpha": "alpha",
    "iters": "iterations", "reps": "reps", "seed": "seed", "sweep": "sweep", "out": "out",
}


def _sweep_list(text):
    try:
        return tuple(int(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_experiment_flags(p):
    p.add_argument("--config", help="INI experiment file; flags below override its values")
    p.add_argument("--model", help="linreg | logreg | crossed")
    p.add_argument("--sampler", help="mc | rqmc")
    p.add_argument("--optimizer", help="sgd | adagrad | adam | sqn")
    p.add_argument("--n-grad", dest="n_grad", type=int)
    p.add_argument("--n-hess", dest="n_hess", type=int)
    p.add_argument("--interval-B", dest="interval_B", type=int)
    p.add_argument("--memory", type=int)
    p.add_argument("--alpha", type=float, help="SQN base step or first-order learning rate")
    p.add_argument("--iters", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sweep", type=_sweep_list, help="e.g. 8,16,32,64")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rqmc-sqn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="write sampler points as CSV")
    p.add_argument("--sampler", default="rqmc", choices=("mc", "rqmc", "shift", "qmc"))
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("-n", "--n", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normal", action="store_true", help="map to standard normals")
    p.add_argument("--out", help="file path (default: stdout)")

    p = sub.add_parser("optimize", help="single run per replication; CSV traces plus manifest")
    _add_experiment_flags(p)

    p = sub.add_parser("sweep", help="error-versus-n study with a fitted log-log slope")
    _add_experiment_flags(p)

    p = sub.add_parser("verify", help="run acceptance criteria")
    p.add_argument("--select", default="all", help="all, a group (sobol, gauss, estimators, lbfgs, optim, theory) "
                                                    "or a single check name")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {field: getattr(args, dest) for dest, field in _OVERRIDES.items()}
    return cfg.replace(**changes)


def _cmd_sample(args) -> int:
    from .gauss import uniform_batch_to_normal
    from .sobol import make_sampler

    if args.dim < 1 or args.n < 1:
        raise ConfigError("--dim and --n must be positive")
    batch = make_sampler(args.sampler, args.dim, args.seed).draw_batch(args.n)
    pts = uniform_batch_to_normal(batch) if args.normal else batch.points
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{j + 1}" for j in range(args.dim)])
    w.writerows([[repr(float(v)) for v in row] for row in pts])
    if args.out:
        write_atomic(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _cmd_optimize(args) -> int:
    from .experiments import run_experiment

    cfg = resolve_config(args)
    manifest, records = run_experiment(cfg)
    for (rep, n), rec in records.items():
        last = f"elbo {rec.elbo[-1]:.6g}, param_err {rec.param_err[-1]:.3g}" if len(rec) else "no iterations"
        note = f" (aborted: {rec.aborted})" if rec.aborted else ""
        print(f"rep {rep} n {n}: {len(rec)} iterations, {last}{note}")
    print(f"manifest: {manifest}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .experiments import sweep

    cfg = resolve_config(args)
    try:
        res = sweep(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("n", "rep", "tail_log2_err"))
    for j, n in enumerate(res.ns):
        for rep in range(res.tail_log2.shape[0]):
            w.writerow((n, rep, repr(float(res.tail_log2[rep, j]))))
    path = os.path.join(cfg.out, "sweep.csv")
    write_atomic(path, buf.getvalue())
    for n, med in zip(res.ns, res.median_log2):
        print(f"n={n}: median log2 error {med:.3f}")
    print(f"slope {res.fit.slope:.3f} intercept {res.fit.intercept:.3f} residual {res.fit.residual:.3g}")
    print(f"written: {path}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .acceptance import run_suite

    try:
        results = run_suite(args.select)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    failed = [r.name for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_FAIL if failed else EXIT_OK


_COMMANDS = {"sample": _cmd_sample, "optimize": _cmd_optimize, "sweep": _cmd_sweep, "verify": _cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
