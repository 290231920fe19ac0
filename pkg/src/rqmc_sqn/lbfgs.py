"""L-BFGS correction-pair buffer, two-loop recursion and Wolfe line search."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

CURVATURE_EPS = 1e-8


@dataclass(frozen=True)
class CorrectionPair:
    s: np.ndarray
    y: np.ndarray

    @cached_property
    def sy(self) -> float:
        return float(self.s @ self.y)

    @cached_property
    def rho(self) -> float:
        return 1.0 / self.sy


@dataclass
class LbfgsBuffer:
    """The ``m`` most recent accepted pairs, oldest first."""

    m: int
    pairs: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("memory m must be at least 1")
        self.pairs = deque(self.pairs, maxlen=self.m)

    def __len__(self) -> int:
        return len(self.pairs)

    def insert(self, s, y, eps: float = CURVATURE_EPS) -> bool:
        return insert_pair(self, s, y, eps)

    def apply(self, g) -> np.ndarray:
        return two_loop(self, g)

    @property
    def gamma(self) -> float:
        if not self.pairs:
            return 1.0
        last = self.pairs[-1]
        return last.sy / float(last.y @ last.y)

    def inverse_hessian(self, dim: int) -> np.ndarray:
        """Dense ``H`` assembled column by column from two-loop products."""
        H = two_loop(self, np.eye(dim))
        return 0.5 * (H + H.T)

    def spectral_bounds(self, dim: int) -> tuple[float, float]:
        ev = np.linalg.eigvalsh(self.inverse_hessian(dim))
        return float(ev[0]), float(ev[-1])


def insert_pair(buffer: LbfgsBuffer, s, y, eps: float = CURVATURE_EPS) -> bool:
    """Store ``(s, y)`` iff ``s^T y > eps ||s|| ||y||``; evicts the oldest when full."""
    s = np.array(s, dtype=np.float64)
    y = np.array(y, dtype=np.float64)
    if s.shape != y.shape:
        raise ValueError("s and y must have the same shape")
    sy = float(s @ y)
    if not np.isfinite(sy) or sy <= eps * np.linalg.norm(s) * np.linalg.norm(y):
        return False
    buffer.pairs.append(CorrectionPair(s, y))
    return True


def two_loop(buffer: LbfgsBuffer, g) -> np.ndarray:
    """``H g`` for the implicit L-BFGS inverse Hessian with ``H0 = gamma I``.

    ``g`` may also be a ``(dim, k)`` matrix, in which case ``H g`` is
    computed column-wise.
    """
    q = np.array(g, dtype=np.float64)
    pairs = buffer.pairs
    alphas = []
    for p in reversed(pairs):
        a = p.rho * (p.s @ q)
        q -= np.multiply.outer(p.y, a) if q.ndim == 2 else a * p.y
        alphas.append(a)
    r = buffer.gamma * q
    for p, a in zip(pairs, reversed(alphas)):
        b = p.rho * (p.y @ r)
        r += np.multiply.outer(p.s, a - b) if r.ndim == 2 else (a - b) * p.s
    return r


@dataclass(frozen=True)
class WolfeConfig:
    c1: float = 1e-3
    c2: float = 0.01
    max_iter: int = 20
    initial_step: float = 1.0
    fallback_step: float = 0.01

    def __post_init__(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("Wolfe constants need 0 < c1 < c2 < 1")


@dataclass
class LineSearchResult:
    alpha: float
    success: bool
    evaluations: int
    descent: bool = True
    f: float | None = None
    g: np.ndarray | None = None


def armijo_ok(f0, slope0, f_new, alpha, c1) -> bool:
    return f_new <= f0 + c1 * alpha * slope0


def curvature_ok(slope_new, slope0, c2) -> bool:
    return slope_new >= c2 * slope0


def wolfe_line_search(evaluate, theta, p, config: WolfeConfig = WolfeConfig(), f0=None, g0=None) -> LineSearchResult:
    """Bracketing search for a step meeting the weak Wolfe conditions.

    ``evaluate(theta) -> (f, grad)`` must be a deterministic function for the
    duration of the search, e.g. a fixed-batch sample average. If ``p`` is
    not a descent direction or no step is found within ``max_iter`` trials,
    ``config.fallback_step`` is returned with ``success=False``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    evals = 0
    if f0 is None or g0 is None:
        f0, g0 = evaluate(theta)
        evals += 1
    slope0 = float(g0 @ p)
    if not slope0 < 0:
        return LineSearchResult(config.fallback_step, False, evals, descent=False)

    lo, hi = 0.0, np.inf
    alpha = config.initial_step
    for _ in range(config.max_iter):
        f_new, g_new = evaluate(theta + alpha * p)
        evals += 1
        if not np.isfinite(f_new) or not armijo_ok(f0, slope0, f_new, alpha, config.c1):
            hi = alpha
        elif not curvature_ok(float(g_new @ p), slope0, config.c2):
            lo = alpha
        else:
            return LineSearchResult(alpha, True, evals, f=f_new, g=g_new)
        alpha = 0.5 * (lo + hi) if np.isfinite(hi) else 2.0 * lo
    return LineSearchResult(config.fallback_step, False, evals)
