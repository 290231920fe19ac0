"""Run configured experiments, sweep sample sizes and fit log-log rates."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig, emit_config
from .estimators import gradient_replicates
from .models import generate_synthetic
from .optim import FIRST_ORDER, FirstOrderConfig, SqnConfig, run_sqn, write_atomic
from .sobol import make_sampler

TAIL = 50  # iterations averaged at the end of each sweep run


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float  # root mean squared residual in log2 units


def fit_rate(points) -> SlopeFit:
    """Least-squares line through ``(log2 n, log2 error)``."""
    pts = np.asarray(list(points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValueError("need at least three (n, error) points")
    n, err = pts[:, 0], pts[:, 1]
    if np.any(n <= 0) or np.any(err <= 0) or not np.all(np.isfinite(err)):
        raise ValueError("sample sizes and errors must be positive and finite")
    x, y = np.log2(n), np.log2(err)
    (slope, intercept), *_ = np.linalg.lstsq(np.column_stack([x, np.ones_like(x)]), y, rcond=None)
    res = y - (slope * x + intercept)
    return SlopeFit(float(slope), float(intercept), float(np.sqrt(np.mean(res**2))))


def build_model(config: ExperimentConfig):
    return generate_synthetic(config.model, config.data_seed, **config.sizes)


def run_single(model, config: ExperimentConfig, n: int, rep: int, callback=None):
    """One optimization run with gradient sample size ``n``; returns ``(theta, RunRecord)``."""
    seed = config.seed + rep
    grad_sampler = make_sampler(config.sampler, model.latent_dim, seed, 0)
    if config.optimizer == "sqn":
        cfg = SqnConfig(n_g=n, n_h=config.n_hess, B=config.interval_B, m=config.memory, alpha=config.alpha,
                        iterations=config.iterations, seed=seed, line_search=config.line_search)
        hess_sampler = make_sampler(config.sampler, model.latent_dim, seed, 1)
        return run_sqn(model, cfg, grad_sampler, hess_sampler, callback=callback)
    cfg = FirstOrderConfig(n=n, lr=config.alpha, iterations=config.iterations, seed=seed)
    return FIRST_ORDER[config.optimizer](model, cfg, grad_sampler, callback=callback)


def output_name(rep: int, n: int) -> str:
    return f"run_r{rep:03d}_n{n}.csv"


def run_experiment(config: ExperimentConfig, out: str | None = None):
    """Write one CSV per ``(replication, n)`` and a ``manifest.ini``.

    Returns ``(manifest path, {(rep, n): RunRecord})``.
    """
    out = out or config.out
    os.makedirs(out, exist_ok=True)
    model = build_model(config)
    records, files = {}, []
    for rep in range(config.reps):
        for n in config.sample_sizes:
            _, rec = run_single(model, config, n, rep)
            name = output_name(rep, n)
            rec.to_csv(os.path.join(out, name))
            records[rep, n] = rec
            files.append(name)
    manifest = os.path.join(out, "manifest.ini")
    write_atomic(manifest, emit_config(config, files))
    return manifest, records


@dataclass
class SweepResult:
    ns: tuple
    tail_log2: np.ndarray  # (reps, len(ns)): mean of log2 error over the last TAIL iterations
    median_log2: np.ndarray
    fit: SlopeFit


def tail_log2_error(rec, tail: int = TAIL) -> float:
    err = rec.array("param_err")[-tail:]
    if err.size == 0 or np.any(~np.isfinite(err)) or np.any(err <= 0):
        return float("nan")
    return float(np.mean(np.log2(err)))


def sweep(config: ExperimentConfig, tail: int = TAIL) -> SweepResult:
    """Parameter-error study over ``config.sweep`` with ``config.reps`` seeds.

    For each run the log2 errors of the last ``tail`` iterates are averaged;
    the slope is fitted to the per-``n`` medians across seeds.
    """
    if len(config.sample_sizes) < 3:
        raise ValueError("a sweep needs at least three sample sizes")
    model = build_model(config)
    if not hasattr(model, "param_error"):
        raise ValueError(f"model {config.model!r} has no known optimum to measure error against")
    ns = config.sample_sizes
    table = np.empty((config.reps, len(ns)))
    for rep in range(config.reps):
        for j, n in enumerate(ns):
            _, rec = run_single(model, config, n, rep)
            table[rep, j] = tail_log2_error(rec, tail)
    med = np.median(table, axis=0)
    fit = fit_rate(zip(ns, 2.0**med))
    return SweepResult(tuple(ns), table, med, fit)


def gradient_rmse(model, kind, theta, ns, R=100, seed=0) -> np.ndarray:
    """RMSE of the mean gradient against ``model.grad_F(theta)`` for each ``n``."""
    truth = model.grad_F(theta)
    out = []
    for n in ns:
        G = gradient_replicates(model, lambda r: make_sampler(kind, model.latent_dim, seed, r), theta, n, R)
        out.append(np.sqrt(np.mean(np.sum((G - truth) ** 2, axis=1))))
    return np.array(out)
