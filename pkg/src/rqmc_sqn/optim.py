"""Stochastic quasi-Newton (RQMC-SQN) and first-order baselines.

All loops draw a fresh batch from their sampler every iteration, so the same
code runs plain MC or RQMC depending on the sampler passed in.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .estimators import NonFiniteGradientError, batch_objective, hessian_vector_product, mean_gradient
from .lbfgs import LbfgsBuffer, WolfeConfig, wolfe_line_search

CSV_HEADER = ("k", "wall_ms", "elbo", "grad_norm", "step", "param_err")


@dataclass
class SqnConfig:
    n_g: int = 128
    n_h: int = 1024
    B: int = 20
    m: int = 50
    alpha: float = 0.01
    wolfe: WolfeConfig = field(default_factory=WolfeConfig)
    iterations: int = 1000
    seed: int = 0
    line_search: bool = True
    track_spectrum: bool = False

    def __post_init__(self):
        if min(self.n_g, self.n_h, self.B, self.m) < 1:
            raise ValueError("n_g, n_h, B and m must all be at least 1")
        if self.iterations < 0 or self.alpha <= 0:
            raise ValueError("iterations must be >= 0 and alpha > 0")


@dataclass
class FirstOrderConfig:
    n: int = 128
    lr: float = 0.01
    iterations: int = 1000
    seed: int = 0
    eps: float = 1e-10
    beta1: float = 0.9
    beta2: float = 0.999

    def __post_init__(self):
        if self.n < 1 or self.lr <= 0 or self.iterations < 0:
            raise ValueError("need n >= 1, lr > 0, iterations >= 0")


@dataclass
class RunRecord:
    """Per-iteration trace. Row ``k`` describes iterate ``theta_k`` and the step taken from it."""

    k: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)
    elbo: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    step: list = field(default_factory=list)
    param_err: list = field(default_factory=list)
    grad_evals: list = field(default_factory=list)
    aborted: str | None = None
    pairs_offered: int = 0
    pairs_accepted: int = 0
    h_bounds: tuple[float, float] | None = None
    thetas: list | None = None

    def append(self, k, wall_ms, elbo, grad_norm, step, param_err, grad_evals):
        if self.k and k <= self.k[-1]:
            raise ValueError("iteration index must strictly increase")
        self.k.append(k)
        self.wall_ms.append(wall_ms)
        self.elbo.append(elbo)
        self.grad_norm.append(grad_norm)
        self.step.append(step)
        self.param_err.append(param_err)
        self.grad_evals.append(grad_evals)

    def __len__(self) -> int:
        return len(self.k)

    def array(self, name) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=np.float64)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in zip(self.k, self.wall_ms, self.elbo, self.grad_norm, self.step, self.param_err):
            w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])
        return buf.getvalue()

    def to_csv(self, path) -> None:
        write_atomic(path, self.to_csv_text())

    @classmethod
    def from_csv(cls, path) -> "RunRecord":
        rec = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != CSV_HEADER:
                raise ValueError(f"unexpected CSV header {header}")
            for row in reader:
                rec.append(int(row[0]), *(float(x) for x in row[1:]), grad_evals=float("nan"))
        return rec


def write_atomic(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _error_fn(model):
    """Parameter-error oracle, or NaN when the model has no known optimum."""
    fn = getattr(model, "param_error", None)
    return fn if fn is not None else (lambda theta: float("nan"))


def run_sqn(model, config: SqnConfig, grad_sampler, hess_sampler, theta0=None, callback=None, keep_thetas=False):
    """Run RQMC-SQN for ``config.iterations`` steps.

    Plain gradient steps of size ``alpha`` are taken until two averaged
    iterates exist; from then on the direction is ``-H g`` from the two-loop
    recursion with a Wolfe step on the current batch. Every ``B`` iterations
    the window average is formed and, from the second window on, a pair
    ``(s_t, y_t)`` with ``y_t`` an ``n_h``-sample Hessian-vector product is
    offered to the buffer.

    Returns ``(theta, RunRecord)``.
    """
    theta = np.array(model.initial_theta() if theta0 is None else theta0, dtype=np.float64)
    err = _error_fn(model)
    wolfe = replace(config.wolfe, fallback_step=config.alpha)
    buf = LbfgsBuffer(config.m)
    rec = RunRecord(thetas=[] if keep_thetas else None)
    h_lo, h_hi = 1.0, 1.0  # warm-up steps use H = I
    t = -1
    window = np.zeros_like(theta)
    prev_bar = None
    evals = 0
    start = time.perf_counter()

    for k in range(1, config.iterations + 1):
        batch = grad_sampler.draw_batch(config.n_g)
        try:
            gs = mean_gradient(model, batch, theta)
        except NonFiniteGradientError as exc:
            rec.aborted = f"iteration {k}: {exc}"
            break
        if not np.isfinite(gs.objective):
            rec.aborted = f"iteration {k}: non-finite objective"
            break
        evals += config.n_g
        g = gs.gradient
        if keep_thetas:
            rec.thetas.append(theta.copy())

        if t < 1:
            alpha = config.alpha
            theta_next = theta - alpha * g
        else:
            p = -buf.apply(g)
            if config.line_search:
                ls = wolfe_line_search(batch_objective(model, batch), theta, p, wolfe, gs.objective, g)
                evals += (ls.evaluations) * config.n_g
                alpha = ls.alpha
            else:
                alpha = config.alpha
            theta_next = theta + alpha * p

        window += theta
        if k % config.B == 0:
            t += 1
            bar = window / config.B
            window = np.zeros_like(theta)
            if t > 0:
                hbatch = hess_sampler.draw_batch(config.n_h)
                s = bar - prev_bar
                y = hessian_vector_product(model, hbatch, bar, s)
                evals += 2 * config.n_h
                rec.pairs_offered += 1
                if buf.insert(s, y):
                    rec.pairs_accepted += 1
                    if config.track_spectrum:
                        lo, hi = buf.spectral_bounds(model.dim)
                        h_lo, h_hi = min(h_lo, lo), max(h_hi, hi)
            prev_bar = bar

        rec.append(k, 1e3 * (time.perf_counter() - start), gs.elbo_estimate, float(np.linalg.norm(g)),
                   alpha, err(theta), evals)
        if callback is not None:
            callback(k, theta)
        theta = theta_next
        if not np.all(np.isfinite(theta)):
            rec.aborted = f"iteration {k}: non-finite parameter"
            break

    if config.track_spectrum:
        rec.h_bounds = (h_lo, h_hi)
    return theta, rec


def _run_first_order(model, config: FirstOrderConfig, sampler, update, theta0, callback, keep_thetas):
    theta = np.array(model.initial_theta() if theta0 is None else theta0, dtype=np.float64)
    err = _error_fn(model)
    rec = RunRecord(thetas=[] if keep_thetas else None)
    state = {}
    start = time.perf_counter()
    for k in range(1, config.iterations + 1):
        batch = sampler.draw_batch(config.n)
        try:
            gs = mean_gradient(model, batch, theta)
        except NonFiniteGradientError as exc:
            rec.aborted = f"iteration {k}: {exc}"
            break
        if keep_thetas:
            rec.thetas.append(theta.copy())
        delta = update(gs.gradient, k, state)
        rec.append(k, 1e3 * (time.perf_counter() - start), gs.elbo_estimate,
                   float(np.linalg.norm(gs.gradient)), config.lr, err(theta), k * config.n)
        if callback is not None:
            callback(k, theta)
        theta = theta - delta
    return theta, rec


def run_sgd(model, config: FirstOrderConfig, sampler, theta0=None, callback=None, keep_thetas=False):
    """Constant-step SGD: ``theta <- theta - lr * g``."""
    return _run_first_order(model, config, sampler, lambda g, k, st: config.lr * g, theta0, callback, keep_thetas)


def run_adagrad(model, config: FirstOrderConfig, sampler, theta0=None, callback=None, keep_thetas=False):
    """AdaGrad with per-coordinate accumulator ``G += g^2`` and step ``lr g / (sqrt(G) + eps)``."""

    def update(g, k, st):
        st["G"] = st.get("G", 0.0) + g * g
        return config.lr * g / (np.sqrt(st["G"]) + config.eps)

    return _run_first_order(model, config, sampler, update, theta0, callback, keep_thetas)


def run_adam(model, config: FirstOrderConfig, sampler, theta0=None, callback=None, keep_thetas=False):
    """Adam with bias-corrected first and second moments."""
    b1, b2 = config.beta1, config.beta2

    def update(g, k, st):
        st["m"] = b1 * st.get("m", 0.0) + (1 - b1) * g
        st["v"] = b2 * st.get("v", 0.0) + (1 - b2) * g * g
        mhat = st["m"] / (1 - b1**k)
        vhat = st["v"] / (1 - b2**k)
        return config.lr * mhat / (np.sqrt(vhat) + config.eps)

    return _run_first_order(model, config, sampler, update, theta0, callback, keep_thetas)


FIRST_ORDER = {"sgd": run_sgd, "adagrad": run_adagrad, "adam": run_adam}
