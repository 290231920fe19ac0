"""Uniform-to-Gaussian maps and the diagonal-Gaussian reparameterization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import inv_normal_cdf as _ppf

# exact 0 comes out of the unscrambled sequence at index 0
U_MIN = 2.0**-32
U_MAX = 1.0 - 2.0**-32
# below this the refinement step overflows; the quantile there is about -37
U_TINY = 1e-300


def inv_normal_cdf(u):
    """Standard normal quantile.

    Inputs at or beyond 0 and 1 are clamped to ``2^-32`` and ``1 - 2^-32``;
    interior values are inverted as given (positive values under ``1e-300``
    are raised to it). Accepts scalars or arrays and returns the same shape.
    """
    arr = np.asarray(u, dtype=np.float64)
    arr = np.where(arr <= 0.0, U_MIN, np.where(arr >= 1.0, U_MAX, np.maximum(arr, U_TINY)))
    out = np.asarray(_ppf(np.atleast_1d(arr))).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def uniform_batch_to_normal(batch) -> np.ndarray:
    """Elementwise inverse CDF of a SampleBatch (or a raw ``(n, s)`` array)."""
    pts = getattr(batch, "points", batch)
    return np.asarray(inv_normal_cdf(np.asarray(pts, dtype=np.float64)))


@dataclass(frozen=True)
class DiagGaussianParams:
    mu: np.ndarray
    log_sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        ls = np.asarray(self.log_sigma, dtype=np.float64)
        if mu.shape != ls.shape or mu.ndim != 1:
            raise ValueError(f"mu {mu.shape} and log_sigma {ls.shape} must be equal-length vectors")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "log_sigma", ls)

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @classmethod
    def from_theta(cls, theta) -> "DiagGaussianParams":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.ndim != 1 or theta.shape[0] % 2:
            raise ValueError("theta must be a vector of even length (mu, log_sigma)")
        d = theta.shape[0] // 2
        return cls(theta[:d], theta[d:])

    def to_theta(self) -> np.ndarray:
        return np.concatenate([self.mu, self.log_sigma])


def reparameterize(z_std, params: DiagGaussianParams) -> np.ndarray:
    """``mu + sigma * z``; ``z_std`` may be one draw or a ``(n, d)`` batch."""
    z = np.asarray(z_std, dtype=np.float64)
    if z.shape[-1] != params.dim:
        raise ValueError(f"draw dimension {z.shape[-1]} does not match parameter dimension {params.dim}")
    return params.mu + params.sigma * z
