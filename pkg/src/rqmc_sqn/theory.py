"""Empirical checks of the optimality-gap and parameter-error bounds.

Both bounds concern the constant-step iteration
``theta <- theta - alpha * H_k * mean_gradient`` on a strongly convex
problem with curvature in ``[c, L]``, inverse-Hessian approximations with
spectrum in ``[h1, h2]`` and gradient-noise trace at most ``M``. The
checks here run replicate SQN trajectories (line search off) on a
:class:`~rqmc_sqn.models.QuadraticProblem`, where ``c``, ``L`` and ``F*``
are exact, and compare replicate averages with the bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimators import variance_trace
from .optim import SqnConfig, run_sqn
from .sobol import make_sampler


class BoundConfigurationError(ValueError):
    """Step size or problem violates a precondition that must hold by construction."""


@dataclass
class ReplicateRuns:
    """Gaps and squared errors of ``R`` replicate runs at several horizons ``K``."""

    horizons: tuple
    gaps: dict  # K -> array (R,)
    sq_errors: dict  # K -> array (R,)
    gap0: float
    sq_error0: float
    h1: float
    h2: float
    alpha: float
    max_distance: float = 0.0


@dataclass
class BoundReport:
    name: str
    applicable: bool
    rows: list = field(default_factory=list)  # (K, observed, bound)
    note: str = ""
    constants: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.applicable and all(obs <= bnd for _, obs, bnd in self.rows)

    def summary(self) -> str:
        if not self.applicable:
            return f"{self.name}: not applicable ({self.note})"
        parts = [f"K={k}: {obs:.4g} <= {bnd:.4g}" for k, obs, bnd in self.rows]
        return f"{self.name}: " + "; ".join(parts)


def measure_noise_trace(problem, kind, n, R=500, seed=0, theta=None) -> float:
    """``M``: trace of the mean-gradient covariance for sampler ``kind`` at ``n`` points."""
    theta = problem.theta_star() if theta is None else theta
    return variance_trace(problem, lambda r: make_sampler(kind, problem.latent_dim, seed, 1000 + r), theta, n, R)


def simulate_replicates(problem, kind, n, alpha, horizons=(10, 100, 1000), R=100, B=5, m=10,
                        n_h=64, seed=0, theta0=None) -> ReplicateRuns:
    """Run ``R`` constant-step SQN replicates and record gaps at each horizon.

    ``h1`` and ``h2`` are the extreme eigenvalues over every inverse-Hessian
    approximation used in any replicate, including the identity used before
    the first correction pair.
    """
    horizons = tuple(sorted(horizons))
    K = horizons[-1]
    theta0 = problem.initial_theta() if theta0 is None else np.asarray(theta0, dtype=np.float64)
    theta_star = problem.theta_star()
    gaps = {k: np.empty(R) for k in horizons}
    sq = {k: np.empty(R) for k in horizons}
    h1, h2 = np.inf, -np.inf
    dist = 0.0
    for r in range(R):
        cfg = SqnConfig(n_g=n, n_h=n_h, B=B, m=m, alpha=alpha, iterations=K, seed=seed + r,
                        line_search=False, track_spectrum=True)
        theta, rec = run_sqn(problem, cfg, make_sampler(kind, problem.latent_dim, seed + r, 0),
                             make_sampler(kind, problem.latent_dim, seed + r, 1), theta0=theta0, keep_thetas=True)
        path = rec.thetas + [theta]  # path[i] is the iterate after i updates
        dist = max(dist, max(float(np.linalg.norm(t - theta_star)) for t in path))
        for k in horizons:
            gaps[k][r] = problem.gap(path[k])
            sq[k][r] = float(np.sum((path[k] - theta_star) ** 2))
        h1, h2 = min(h1, rec.h_bounds[0]), max(h2, rec.h_bounds[1])
    return ReplicateRuns(horizons, gaps, sq, problem.gap(theta0), float(np.sum((theta0 - theta_star) ** 2)),
                         h1, h2, alpha, dist)


def gap_bound_value(K, alpha, c, L, h1, h2, M, gap0) -> float:
    """Expected optimality-gap bound after ``K`` steps.

    The transient uses the larger of ``(1 - alpha c h1)^K`` and
    ``(1 - alpha c)^K`` so the check holds under either reading of the rate.
    """
    rate = max(1.0 - alpha * c * h1, 1.0 - alpha * c)
    return rate**K * gap0 + alpha * L * h2**2 / (2.0 * c * h1) * M


def gap_tail_term(alpha, c, L, h1, h2, C, eps) -> float:
    """Extra term of the high-probability bound, exceeded with probability at most ``exp(-eps^2)``."""
    return C**2 * np.sqrt(2.0 * alpha / (c * h1)) * (h2 - L * alpha * h1**2 + h1) * eps


def gap_bound_check(problem, runs: ReplicateRuns, M: float) -> BoundReport:
    c, L, h1, h2, alpha = problem.c, problem.L, runs.h1, runs.h2, runs.alpha
    if not (0 < h1 <= h2):
        raise BoundConfigurationError(f"spectral bounds h1={h1}, h2={h2} not positive and ordered")
    if not 0 < alpha <= h1 / (L * h2**2):
        raise BoundConfigurationError(f"alpha={alpha} exceeds h1/(L h2^2)={h1 / (L * h2**2):.4g}")
    rep = BoundReport("optimality gap", True, constants=dict(c=c, L=L, h1=h1, h2=h2, M=M, alpha=alpha))
    for k in runs.horizons:
        rep.rows.append((k, float(np.mean(runs.gaps[k])), gap_bound_value(k, alpha, c, L, h1, h2, M, runs.gap0)))
    return rep


def error_bound_value(K, alpha, L, h2, M, sq_error0) -> float:
    return (1.0 - alpha**2 * h2**2 * L**2) ** K * sq_error0 + M / L**2


def error_bound_applicable(c, L, h1, h2, alpha):
    """Whether the curvature-ratio and step-size hypotheses hold; returns ``(ok, reason)``."""
    if not c / L > (h2 - h1) / (h2 + h1):
        return False, f"c/L={c / L:.4g} <= (h2-h1)/(h2+h1)={(h2 - h1) / (h2 + h1):.4g}"
    ceiling = ((h1 + h2) * c - (h2 - h1) * L) / (2.0 * L**2 * h2**2)
    if not 0 < alpha < ceiling:
        return False, f"alpha={alpha} not below {ceiling:.4g}"
    return True, ""


def error_bound_check(problem, runs: ReplicateRuns, M: float) -> BoundReport:
    c, L, h1, h2, alpha = problem.c, problem.L, runs.h1, runs.h2, runs.alpha
    ok, why = error_bound_applicable(c, L, h1, h2, alpha)
    rep = BoundReport("parameter error", ok, note=why, constants=dict(c=c, L=L, h1=h1, h2=h2, M=M, alpha=alpha))
    if not ok:
        return rep
    for k in runs.horizons:
        rep.rows.append((k, float(np.mean(runs.sq_errors[k])), error_bound_value(k, alpha, L, h2, M, runs.sq_error0)))
    return rep


def gradient_bound(problem, max_distance) -> float:
    """A bound ``C`` on per-sample and expected gradient norms along observed paths.

    Only valid for uniform (bounded) noise; Gaussian noise has no finite ``C``.
    """
    if problem.noise != "uniform":
        raise BoundConfigurationError("bounded gradients need uniform noise")
    zmax = np.sqrt(3.0 * problem.latent_dim)
    return problem.L * (max_distance + np.linalg.norm(problem.S, 2) * zmax)
