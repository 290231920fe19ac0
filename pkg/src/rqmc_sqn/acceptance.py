"""Acceptance criteria with measured-versus-threshold reporting.

Each check returns a :class:`CheckResult`. ``run_suite(selector)`` runs a
group (``sobol``, ``gauss``, ``estimators``, ``lbfgs``, ``optim``,
``theory``) or ``all``, and ``format_result`` renders one line per check.
Runtime budgets are part of each criterion.
"""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass

import mpmath
import numpy as np

from . import lbfgs
from .config import ExperimentConfig
from .estimators import batch_objective, gradient_replicates, variance_trace
from .experiments import fit_rate, sweep
from .gauss import inv_normal_cdf
from .lbfgs import LbfgsBuffer, WolfeConfig
from .models import generate_synthetic, make_quadratic
from .optim import FirstOrderConfig, SqnConfig, run_adagrad, run_sqn
from .sobol import MCSampler, SobolSampler, make_sampler
from .theory import measure_noise_trace, simulate_replicates, gap_bound_check, error_bound_check


@dataclass
class CheckResult:
    name: str
    measured: str
    threshold: str
    passed: bool
    seconds: float = 0.0
    budget: float | None = None

    @property
    def within_budget(self) -> bool:
        return self.budget is None or self.seconds <= self.budget

    @property
    def ok(self) -> bool:
        return self.passed and self.within_budget


def format_result(r: CheckResult) -> str:
    status = "PASS" if r.ok else "FAIL"
    budget = f" (budget {r.budget:g}s)" if r.budget is not None else ""
    slow = "" if r.within_budget else " [over budget]"
    return f"[{status}] {r.name}: measured {r.measured} | threshold {r.threshold} | {r.seconds:.2f}s{budget}{slow}"


def _timed(name, budget):
    def wrap(fn):
        @functools.wraps(fn)
        def run():
            t0 = time.perf_counter()
            measured, threshold, passed = fn()
            return CheckResult(name, measured, threshold, bool(passed), time.perf_counter() - t0, budget)

        run.check_name = name
        return run

    return wrap


# ---------------------------------------------------------------- samplers


@_timed("sobol_correctness", 1.0)
def check_sobol_correctness():
    n = 65536
    x = SobolSampler(1, "none").draw_batch(n).points[:, 0]
    radical = np.array([int(format(i, "032b")[::-1], 2) for i in range(n)], dtype=np.float64) * 2.0**-32
    mismatches = int(np.count_nonzero(x != radical))
    bad_strata = 0
    scrambled = SobolSampler(8, "scramble", seed=7).draw_batch(2**13).points
    for m in range(14):
        k = 2**m
        for col in [x[:k]] + [scrambled[:k, j] for j in range(8)]:
            cells = np.floor(col * k).astype(np.int64)
            bad_strata += int(not np.array_equal(np.sort(cells), np.arange(k)))
    return (f"{mismatches} radical-inverse mismatches, {bad_strata} non-equidistributed prefixes",
            "0 and 0", mismatches == 0 and bad_strata == 0)


@_timed("rqmc_rate", 30.0)
def check_rqmc_rate():
    s, R = 8, 50
    ns = [2**k for k in range(3, 14)]
    rmse = {"mc": [], "rqmc": []}
    for n in ns:
        for kind in rmse:
            est = np.empty(R)
            for r in range(R):
                sampler = MCSampler(s, seed=r) if kind == "mc" else SobolSampler(s, "scramble", seed=r)
                est[r] = sampler.draw_batch(n).points.sum(axis=1).mean()
            rmse[kind].append(np.sqrt(np.mean((est - s / 2) ** 2)))
    mc = fit_rate(zip(ns, rmse["mc"])).slope
    rq = fit_rate(zip(ns, rmse["rqmc"])).slope
    return (f"MC slope {mc:.3f}, RQMC slope {rq:.3f}", "MC in [-0.6, -0.4], RQMC <= -1.0",
            -0.6 <= mc <= -0.4 and rq <= -1.0)


# ---------------------------------------------------------------- gauss


@_timed("inverse_normal_cdf", 1.0)
def check_inverse_cdf():
    mpmath.mp.dps = 40
    u = (np.arange(10_000) + 0.5) / 10_000
    x = inv_normal_cdf(u)
    root_half = mpmath.sqrt(mpmath.mpf(2)) / 2
    err = max(abs(float(mpmath.erfc(-mpmath.mpf(float(xi)) * root_half) / 2 - mpmath.mpf(float(ui))))
              for xi, ui in zip(x, u))
    return f"max |Phi(x(u)) - u| = {err:.3g}", "<= 1e-12", err <= 1e-12


# ---------------------------------------------------------------- estimators


@_timed("gradient_unbiasedness", 60.0)
def check_unbiasedness():
    model = generate_synthetic("linreg", seed=0)
    rng = np.random.default_rng(11)
    d = model.latent_dim
    worst = 0.0
    for i in range(5):
        theta = np.concatenate([rng.standard_normal(d), rng.uniform(-2.0, 0.0, d)])
        G = gradient_replicates(model, lambda r: make_sampler("rqmc", d, 100 + i, r), theta, 64, 500)
        se = G.std(axis=0, ddof=1) / np.sqrt(G.shape[0])
        truth = model.grad_F(theta)
        floor = 1e-12 * (1.0 + np.abs(truth))  # rounding when the RQMC error vanishes
        worst = max(worst, float(np.max(np.abs(G.mean(axis=0) - truth) / np.maximum(se, floor))))
    return f"max |mean - grad F| / SE = {worst:.2f}", "<= 4", worst <= 4.0


@_timed("variance_ordering", 60.0)
def check_variance_ordering():
    model = generate_synthetic("linreg", seed=0)
    d = model.latent_dim
    parts, ok = [], True
    for label, theta in (("theta0", model.initial_theta()), ("theta*", model.theta_star())):
        for n in (64, 1024):
            v = {kind: variance_trace(model, lambda r, k=kind: make_sampler(k, d, 5, r), theta, n, 200)
                 for kind in ("mc", "rqmc")}
            ok &= v["rqmc"] < v["mc"]
            parts.append(f"{label} n={n}: {v['rqmc']:.3g} vs {v['mc']:.3g}")
    return "; ".join(parts), "RQMC trace < MC trace in every case", ok


# ---------------------------------------------------------------- lbfgs


def _dense_bfgs_inverse(pairs, dim):
    """Reference: explicit BFGS inverse updates starting from ``gamma I``."""
    s, y = pairs[-1]
    H = (s @ y) / (y @ y) * np.eye(dim)
    eye = np.eye(dim)
    for s, y in pairs:
        rho = 1.0 / (s @ y)
        V = eye - rho * np.outer(y, s)
        H = V.T @ H @ V + rho * np.outer(s, s)
    return H


@_timed("two_loop_oracle", 1.0)
def check_two_loop():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        dim = int(rng.integers(1, 6))
        m = int(rng.integers(1, 8))
        Q = rng.standard_normal((dim, dim))
        A = Q @ Q.T + 0.1 * np.eye(dim)
        buf = LbfgsBuffer(m)
        pairs = []
        for _ in range(int(rng.integers(1, 10))):
            s = rng.standard_normal(dim)
            y = A @ s
            if buf.insert(s, y):
                pairs.append((s, y))
        g = rng.standard_normal(dim)
        ref = _dense_bfgs_inverse(pairs[-m:], dim) @ g
        worst = max(worst, float(np.linalg.norm(buf.apply(g) - ref) / np.linalg.norm(ref)))
    return f"max relative error {worst:.3g}", "<= 1e-10", worst <= 1e-10


@_timed("wolfe_line_search", 1.0)
def check_line_search():
    rng = np.random.default_rng(5)
    violations = 0
    trials = 0
    for _ in range(40):
        dim = int(rng.integers(2, 8))
        W = rng.standard_normal((3 * dim, dim)) * rng.uniform(0.5, 4.0)
        lam = rng.uniform(0.01, 1.0)

        def evaluate(x, W=W, lam=lam):
            t = W @ x
            f = np.sum(np.logaddexp(0.0, t)) + 0.5 * lam * x @ x
            return float(f), W.T @ (0.5 * (1.0 + np.tanh(0.5 * t))) + lam * x

        x0 = rng.standard_normal(dim) * 3.0
        f0, g0 = evaluate(x0)
        for cfg in (WolfeConfig(), WolfeConfig(c1=1e-4, c2=0.9)):
            p = -g0
            res = lbfgs.wolfe_line_search(evaluate, x0, p, cfg, f0, g0)
            f1, g1 = evaluate(x0 + res.alpha * p)
            slope0 = g0 @ p
            sufficient = f1 <= f0 + cfg.c1 * res.alpha * slope0
            curvature = g1 @ p >= cfg.c2 * slope0
            trials += 1
            violations += int(not (res.success and sufficient and curvature))
    return f"{violations} of {trials} searches failed or violated a Wolfe condition", "0", violations == 0


# ---------------------------------------------------------------- optim


@_timed("adagrad_rate_sweep", 600.0)
def check_adagrad_sweep():
    base = ExperimentConfig(model="linreg", sizes={"N": 60, "d": 20}, optimizer="adagrad", alpha=1.0,
                            iterations=1000, reps=5, sweep=tuple(2**k for k in range(3, 11)))
    mc = sweep(base.replace(sampler="mc"))
    rq = sweep(base.replace(sampler="rqmc"))
    below = all(r < m for n, r, m in zip(rq.ns, rq.median_log2, mc.median_log2) if n >= 64)
    return (f"slopes RQMC {rq.fit.slope:.3f} vs MC {mc.fit.slope:.3f}; RQMC below MC for n>=64: {below}",
            "RQMC slope < MC slope and RQMC error < MC error for every n >= 64",
            rq.fit.slope < mc.fit.slope and below)


def _precise_elbo(model):
    evaluate = batch_objective(model, SobolSampler(model.latent_dim, "scramble", seed=2024).draw_batch(2**10))
    return lambda theta: -evaluate(theta)[0]


def _evals_before(rec, k):
    """Gradient evaluations spent before iterate ``k`` (1-based) was formed."""
    return 0 if k == 1 else rec.grad_evals[k - 2]


def sqn_vs_adagrad(kind, sizes, sqn_kwargs, seed):
    model = generate_synthetic(kind, seed=0, **sizes)
    elbo = _precise_elbo(model)
    d = model.latent_dim
    trace = []
    theta, rec = run_sqn(model, SqnConfig(n_g=128, alpha=0.01, iterations=1000, seed=seed, **sqn_kwargs),
                         make_sampler("rqmc", d, seed, 0), make_sampler("rqmc", d, seed, 1),
                         callback=lambda k, th: trace.append(elbo(th)))
    final = elbo(theta)
    tol = 0.01 * abs(final)
    hit = next(k for k, e in enumerate(trace + [final], 1) if abs(e - final) <= tol)
    sqn_evals = _evals_before(rec, hit) if hit <= len(rec) else rec.grad_evals[-1]

    ada_trace = []
    _, ada = run_adagrad(model, FirstOrderConfig(n=128, lr=0.01, iterations=2000, seed=seed),
                         make_sampler("rqmc", d, seed, 0), callback=lambda k, th: ada_trace.append(elbo(th)))
    reach = next((k for k, e in enumerate(ada_trace, 1) if e >= final - tol), None)
    ada_evals = float("inf") if reach is None else _evals_before(ada, reach)
    return sqn_evals, ada_evals


@_timed("sqn_vs_adagrad", 600.0)
def check_sqn_vs_adagrad():
    setups = {
        "logreg": ({"N": 30, "d": 20}, {"B": 20, "m": 50, "n_h": 1024}),
        "crossed": ({"I": 10, "J": 5}, {"B": 20, "m": 30, "n_h": 512}),
    }
    parts, ok = [], True
    for kind, (sizes, kw) in setups.items():
        res = np.array([sqn_vs_adagrad(kind, sizes, kw, seed) for seed in range(5)], dtype=np.float64)
        sq, ad = np.median(res[:, 0]), np.median(res[:, 1])
        ok &= sq < ad
        parts.append(f"{kind}: SQN {sq:.0f} vs AdaGrad {ad:.0f} evals")
    return "; ".join(parts), "SQN median < AdaGrad median (inf = not reached in 2000 iterations)", ok


@_timed("analytic_optimum", 120.0)
def check_analytic_optimum():
    model = generate_synthetic("linreg", seed=0, N=60, d=20)
    d = model.latent_dim
    cfg = SqnConfig(n_g=256, n_h=1024, B=20, m=50, alpha=0.001, iterations=2000, seed=0)
    theta, rec = run_sqn(model, cfg, make_sampler("rqmc", d, 0, 0), make_sampler("rqmc", d, 0, 1))
    errs = np.append(rec.array("param_err"), model.param_error(theta))
    hits = np.flatnonzero(errs <= 1e-3)
    first = f"first at k={hits[0] + 1}" if hits.size else "never"
    return (f"min error {errs.min():.3g} ({first}), final {errs[-1]:.3g}", "some iterate with error <= 1e-3 within K=2000",
            hits.size > 0)


# ---------------------------------------------------------------- theory


@functools.lru_cache(maxsize=None)
def _bound_setup():
    problem = make_quadratic(dim=10, c=1.0, L=1.5, seed=0)
    M = measure_noise_trace(problem, "rqmc", 16, R=500)
    runs = simulate_replicates(problem, "rqmc", 16, alpha=0.1, horizons=(10, 100, 1000), R=100)
    return problem, runs, M


def _bound_result(report):
    rows = "; ".join(f"K={k}: {obs:.3g}" for k, obs, _ in report.rows) or report.note
    bounds = "; ".join(f"K={k}: {b:.3g}" for k, _, b in report.rows) or "hypotheses must hold"
    h = report.constants
    return f"{rows} (h1={h['h1']:.3f}, h2={h['h2']:.3f}, M={h['M']:.3g})", f"<= {bounds}", report.passed


@_timed("gap_bound", 120.0)
def check_gap_bound():
    problem, runs, M = _bound_setup()
    return _bound_result(gap_bound_check(problem, runs, M))


@_timed("error_bound", 120.0)
def check_error_bound():
    problem, runs, M = _bound_setup()
    return _bound_result(error_bound_check(problem, runs, M))


GROUPS = {
    "sobol": (check_sobol_correctness, check_rqmc_rate),
    "gauss": (check_inverse_cdf,),
    "estimators": (check_unbiasedness, check_variance_ordering),
    "lbfgs": (check_two_loop, check_line_search),
    "optim": (check_adagrad_sweep, check_sqn_vs_adagrad, check_analytic_optimum),
    "theory": (check_gap_bound, check_error_bound),
}


def checks_for(selector: str = "all"):
    if selector == "all":
        return [c for group in GROUPS.values() for c in group]
    if selector in GROUPS:
        return list(GROUPS[selector])
    by_name = {c.check_name: c for group in GROUPS.values() for c in group}
    if selector in by_name:
        return [by_name[selector]]
    raise KeyError(f"unknown selector {selector!r}; choose from all, {', '.join(GROUPS)} or a check name")


def run_suite(selector: str = "all", echo=print):
    results = []
    for check in checks_for(selector):
        r = check()
        results.append(r)
        if echo is not None:
            echo(format_result(r))
    return results
