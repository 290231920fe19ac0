"""Sample-average gradient, Hessian-vector product and variance diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass
class GradientSample:
    gradient: np.ndarray
    elbo_estimate: float
    k: int = 0
    objective: float = 0.0


def _base_draws(model, batch):
    pts = getattr(batch, "points", batch)
    if pts.shape[1] != model.latent_dim:
        raise ValueError(f"batch dimension {pts.shape[1]} does not match model latent dimension {model.latent_dim}")
    return model.to_base(pts)


def mean_gradient(model, batch, theta) -> GradientSample:
    """Average per-sample gradient over ``batch``.

    The mean per-sample objective is returned alongside, negated as an ELBO
    estimate, at no extra model cost.
    """
    Z = _base_draws(model, batch)
    vals, grads = model.values_and_grads(Z, theta)
    g = grads.mean(axis=0)
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradientError("non-finite gradient component")
    obj = float(vals.mean())
    return GradientSample(g, -obj, getattr(batch, "k", 0), obj)


def hessian_vector_product(model, batch, theta, direction) -> np.ndarray:
    """Average exact Hessian of the per-sample objective applied to ``direction``."""
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape != (model.dim,):
        raise ValueError(f"direction has shape {direction.shape}, expected ({model.dim},)")
    Z = _base_draws(model, batch)
    return model.hvps(Z, theta, direction).mean(axis=0)


def batch_objective(model, batch):
    """Closure ``theta -> (mean f, mean g)`` on a fixed batch, for line searches."""
    Z = _base_draws(model, batch)

    def evaluate(theta):
        vals, grads = model.values_and_grads(Z, theta)
        return float(vals.mean()), grads.mean(axis=0)

    return evaluate


def gradient_replicates(model, sampler_factory, theta, n, R) -> np.ndarray:
    """``R`` independent realizations of the mean gradient, one per row."""
    out = np.empty((R, model.dim))
    for r in range(R):
        out[r] = mean_gradient(model, sampler_factory(r).draw_batch(n), theta).gradient
    return out


def variance_trace(model, sampler_factory, theta, n, R) -> float:
    """Empirical ``tr Var(mean gradient)`` over ``R`` independent randomizations.

    ``sampler_factory(r)`` must return a sampler whose first batch is
    independent across ``r``.
    """
    if R < 2:
        raise ValueError("need at least two replications")
    G = gradient_replicates(model, sampler_factory, theta, n, R)
    return float(np.sum(np.var(G, axis=0, ddof=1)))
