"""Variational-Bayes benchmark problems under a mean-field Gaussian family.

Every model is a per-sample *negative* ELBO integrand ``f(z; theta)`` so that
minimizing ``F(theta) = E f(z; theta)`` maximizes the ELBO. The variational
parameter is ``theta = (mu, log_sigma)`` and draws enter through
``beta = mu + exp(log_sigma) * z`` with ``z`` standard normal.

Batch methods take ``Z`` of shape ``(n, d)`` and return one row per draw, so
averaging rows gives the sample-mean estimators.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .gauss import uniform_batch_to_normal

LOG_2PI = float(np.log(2.0 * np.pi))


def log_sigmoid(x):
    """``log(1 / (1 + exp(-x)))`` without overflow for large ``|x|``."""
    return -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def kl_diag_gaussian(mu, log_sigma):
    """KL(N(mu, diag sigma^2) || N(0, I)) and its gradient w.r.t. (mu, log_sigma)."""
    mu = np.asarray(mu, dtype=np.float64)
    ls = np.asarray(log_sigma, dtype=np.float64)
    s2 = np.exp(2.0 * ls)
    kl = float(np.sum(0.5 * (s2 + mu**2 - 1.0) - ls))
    return kl, np.concatenate([mu, s2 - 1.0])


def _as_batch(z):
    z = np.asarray(z, dtype=np.float64)
    return (z[None, :], True) if z.ndim == 1 else (z, False)


class VBProblem:
    """Contract shared by all models.

    Subclasses set ``latent_dim`` and implement the data term ``phi(beta)``
    through ``_phi``, ``_phi_grad`` and ``_phi_hvp``. Latent coordinates in
    ``kl_mask`` carry a N(0, 1) prior that is folded into a closed-form KL;
    the others contribute only the variational negative entropy, their prior
    living inside ``phi``.
    """

    latent_dim: int
    kl_mask: np.ndarray

    @property
    def dim(self) -> int:
        return 2 * self.latent_dim

    def to_base(self, points) -> np.ndarray:
        """Map uniform sample points to the base draws ``z``."""
        return uniform_batch_to_normal(points)

    def _split(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.dim,):
            raise ValueError(f"theta has shape {theta.shape}, expected ({self.dim},)")
        d = self.latent_dim
        return theta[:d], theta[d:]

    def _check_z(self, Z):
        if Z.shape[1] != self.latent_dim:
            raise ValueError(f"draws have dimension {Z.shape[1]}, model expects {self.latent_dim}")

    # regularizer: KL on masked coordinates, negative entropy elsewhere
    def regularizer(self, theta) -> float:
        mu, ls = self._split(theta)
        k = self.kl_mask
        kl = np.sum(0.5 * (np.exp(2 * ls[k]) + mu[k] ** 2 - 1.0) - ls[k])
        neg_ent = np.sum(-ls[~k] - 0.5 * (1.0 + LOG_2PI))
        return float(kl + neg_ent)

    def regularizer_grad(self, theta) -> np.ndarray:
        mu, ls = self._split(theta)
        k = self.kl_mask
        return np.concatenate([np.where(k, mu, 0.0), np.where(k, np.exp(2 * ls) - 1.0, -1.0)])

    def regularizer_hvp(self, theta, v) -> np.ndarray:
        _, ls = self._split(theta)
        d = self.latent_dim
        k = self.kl_mask
        return np.concatenate([np.where(k, v[:d], 0.0), np.where(k, 2.0 * np.exp(2 * ls) * v[d:], 0.0)])

    def values(self, Z, theta) -> np.ndarray:
        mu, ls = self._split(theta)
        Z = np.asarray(Z, dtype=np.float64)
        self._check_z(Z)
        return self._phi(mu + np.exp(ls) * Z) + self.regularizer(theta)

    def grads(self, Z, theta) -> np.ndarray:
        mu, ls = self._split(theta)
        Z = np.asarray(Z, dtype=np.float64)
        self._check_z(Z)
        sz = np.exp(ls) * Z
        gb = self._phi_grad(mu + sz)
        return np.hstack([gb, sz * gb]) + self.regularizer_grad(theta)

    def hvps(self, Z, theta, v) -> np.ndarray:
        mu, ls = self._split(theta)
        Z = np.asarray(Z, dtype=np.float64)
        self._check_z(Z)
        v = np.asarray(v, dtype=np.float64)
        d = self.latent_dim
        vm, vl = v[:d], v[d:]
        sz = np.exp(ls) * Z
        beta = mu + sz
        w = vm + sz * vl
        hw = self._phi_hvp(beta, w)
        gb = self._phi_grad(beta)
        return np.hstack([hw, sz * hw + sz * gb * vl]) + self.regularizer_hvp(theta, v)

    def values_and_grads(self, Z, theta):
        return self.values(Z, theta), self.grads(Z, theta)

    # single-draw conveniences
    def f(self, z, theta) -> float:
        Z, _ = _as_batch(z)
        return float(self.values(Z, theta)[0])

    def g(self, z, theta) -> np.ndarray:
        Z, _ = _as_batch(z)
        return self.grads(Z, theta)[0]

    def hvp(self, z, theta, v) -> np.ndarray:
        Z, _ = _as_batch(z)
        return self.hvps(Z, theta, v)[0]

    def initial_theta(self) -> np.ndarray:
        return np.zeros(self.dim)

    def _phi(self, B):
        raise NotImplementedError

    def _phi_grad(self, B):
        raise NotImplementedError

    def _phi_hvp(self, B, W):
        raise NotImplementedError


@dataclass(eq=False)
class LinRegModel(VBProblem):
    """``y | beta ~ N(X beta, gamma^2 I)``, ``beta ~ N(0, I)``.

    The ELBO is available in closed form, which gives the exact optimum and
    exact gradient used as ground truth.
    """

    X: np.ndarray
    y: np.ndarray
    gamma: float = 0.5
    _G: np.ndarray = field(init=False, repr=False)
    _b: np.ndarray = field(init=False, repr=False)
    _opt: tuple | None = field(init=False, repr=False, default=None)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ValueError("X must be N x d and y of length N")
        self.latent_dim = self.X.shape[1]
        self.kl_mask = np.ones(self.latent_dim, dtype=bool)
        g2 = self.gamma**2
        self._G = self.X.T @ self.X / g2
        self._b = self.X.T @ self.y / g2
        self._const = 0.5 * self.X.shape[0] * np.log(2 * np.pi * g2)

    @property
    def N(self) -> int:
        return self.X.shape[0]

    def _phi(self, B):
        R = self.y - B @ self.X.T
        return self._const + np.sum(R * R, axis=1) / (2 * self.gamma**2)

    def _phi_grad(self, B):
        return B @ self._G - self._b

    def _phi_hvp(self, B, W):
        return W @ self._G

    def expected_loglik(self, theta) -> float:
        """``E_q log p(y | beta)`` in closed form."""
        mu, ls = self._split(theta)
        r = self.y - self.X @ mu
        col2 = np.sum(self.X**2, axis=0)
        return float(-self._const - (r @ r + np.sum(np.exp(2 * ls) * col2)) / (2 * self.gamma**2))

    def elbo(self, theta) -> float:
        return self.expected_loglik(theta) - self.regularizer(theta)

    def objective(self, theta) -> float:
        """``F(theta) = -ELBO``."""
        return -self.elbo(theta)

    def grad_F(self, theta) -> np.ndarray:
        mu, ls = self._split(theta)
        s2 = np.exp(2 * ls)
        col2 = np.sum(self.X**2, axis=0) / self.gamma**2
        return np.concatenate([self._G @ mu - self._b + mu, s2 * col2 + s2 - 1.0])

    def optimum(self):
        if self._opt is None:
            self._opt = linreg_analytic_optimum(self)
        return self._opt

    def theta_star(self) -> np.ndarray:
        mu, sigma = self.optimum()
        return np.concatenate([mu, np.log(sigma)])

    def param_error(self, theta) -> float:
        """Distance to the optimum in ``(mu, sigma)`` coordinates."""
        mu, ls = self._split(theta)
        mu_s, sig_s = self.optimum()
        return float(np.sqrt(np.sum((mu - mu_s) ** 2) + np.sum((np.exp(ls) - sig_s) ** 2)))

    def mu_curvature(self):
        """Extreme eigenvalues ``(c, L)`` of ``X^T X / gamma^2 + I``, the Hessian in ``mu``."""
        ev = np.linalg.eigvalsh(self._G + np.eye(self.latent_dim))
        return float(ev[0]), float(ev[-1])


def linreg_analytic_optimum(model: LinRegModel):
    """Closed-form ``(mu*, sigma*)`` of the linear-regression ELBO."""
    A = model._G + np.eye(model.latent_dim)
    try:
        cho = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("X^T X / gamma^2 + I is not positive definite") from exc
    mu = np.linalg.solve(cho.T, np.linalg.solve(cho, model._b))
    sigma = 1.0 / np.sqrt(1.0 + np.sum(model.X**2, axis=0) / model.gamma**2)
    return mu, sigma


@dataclass(eq=False)
class LogRegModel(VBProblem):
    """``P(y_i = +-1 | x_i, beta) = S(+-x_i^T beta)``, ``beta ~ N(0, I)``."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ValueError("X must be N x d and y of length N")
        self.latent_dim = self.X.shape[1]
        self.kl_mask = np.ones(self.latent_dim, dtype=bool)
        self._Xy = self.X * self.y[:, None]

    def _phi(self, B):
        return -np.sum(log_sigmoid(B @ self._Xy.T), axis=1)

    def _phi_grad(self, B):
        return -expit(-(B @ self._Xy.T)) @ self._Xy

    def _phi_hvp(self, B, W):
        t = B @ self._Xy.T
        wts = expit(t) * expit(-t)
        return (wts * (W @ self.X.T)) @ self.X


@dataclass(eq=False)
class CrossedEffectsModel(VBProblem):
    """Intercept-only crossed random effects, ``Y_ij ~ N(mu + a_i + b_j, 1)``.

    Latent layout is ``(mu, log sigma_a, log sigma_b, a_1..a_I, b_1..b_J)``.
    ``mu`` and the two log scales have N(0, 1) priors handled by the KL term;
    the hierarchical priors ``a_i ~ N(0, sigma_a^2)``, ``b_j ~ N(0, sigma_b^2)``
    depend on latent scales and so sit in the sampled data term.
    """

    Y: np.ndarray

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=np.float64)
        if self.Y.ndim != 2:
            raise ValueError("Y must be an I x J matrix")
        self.I, self.J = self.Y.shape
        self.latent_dim = self.I + self.J + 3
        self.kl_mask = np.zeros(self.latent_dim, dtype=bool)
        self.kl_mask[:3] = True
        self._const = 0.5 * (self.I * self.J + self.I + self.J) * LOG_2PI

    def _unpack(self, B):
        I = self.I
        return B[:, 0], B[:, 1], B[:, 2], B[:, 3 : 3 + I], B[:, 3 + I :]

    def _phi(self, B):
        mu, la, lb, a, b = self._unpack(B)
        R = self.Y[None] - mu[:, None, None] - a[:, :, None] - b[:, None, :]
        lik = 0.5 * np.sum(R * R, axis=(1, 2))
        pa = 0.5 * np.sum(a * a, axis=1) * np.exp(-2 * la) + self.I * la
        pb = 0.5 * np.sum(b * b, axis=1) * np.exp(-2 * lb) + self.J * lb
        return lik + pa + pb + self._const

    def _phi_grad(self, B):
        mu, la, lb, a, b = self._unpack(B)
        R = self.Y[None] - mu[:, None, None] - a[:, :, None] - b[:, None, :]
        ea = np.exp(-2 * la)[:, None]
        eb = np.exp(-2 * lb)[:, None]
        out = np.empty_like(B)
        out[:, 0] = -np.sum(R, axis=(1, 2))
        out[:, 1] = self.I - np.sum(a * a, axis=1) * ea[:, 0]
        out[:, 2] = self.J - np.sum(b * b, axis=1) * eb[:, 0]
        out[:, 3 : 3 + self.I] = -np.sum(R, axis=2) + a * ea
        out[:, 3 + self.I :] = -np.sum(R, axis=1) + b * eb
        return out

    def _phi_hvp(self, B, W):
        _, la, lb, a, b = self._unpack(B)
        wm, wla, wlb, wa, wb = self._unpack(W)
        I, J = self.I, self.J
        ea = np.exp(-2 * la)
        eb = np.exp(-2 * lb)
        swa = np.sum(wa, axis=1)
        swb = np.sum(wb, axis=1)
        out = np.empty_like(W)
        out[:, 0] = I * J * wm + J * swa + I * swb
        out[:, 1] = 2 * ea * (np.sum(a * a, axis=1) * wla - np.sum(a * wa, axis=1))
        out[:, 2] = 2 * eb * (np.sum(b * b, axis=1) * wlb - np.sum(b * wb, axis=1))
        out[:, 3 : 3 + I] = (J * (wm[:, None] + wa) + swb[:, None]) + ea[:, None] * wa - 2 * ea[:, None] * a * wla[:, None]
        out[:, 3 + I :] = (I * (wm[:, None] + wb) + swa[:, None]) + eb[:, None] * wb - 2 * eb[:, None] * b * wlb[:, None]
        return out


@dataclass(eq=False)
class QuadraticProblem:
    """Strongly convex test problem with exactly known ``c``, ``L`` and ``F*``.

    ``f(z; theta) = 1/2 (theta - theta* - S z)^T A (theta - theta* - S z)``
    with ``z`` standard normal (``noise="gaussian"``) or uniform on
    ``[-sqrt3, sqrt3]`` (``noise="uniform"``, bounded gradients on bounded
    sets). Both have unit variance. ``theta`` is optimized directly.
    """

    A: np.ndarray
    theta_opt: np.ndarray
    S: np.ndarray
    noise: str = "gaussian"

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        self.theta_opt = np.asarray(self.theta_opt, dtype=np.float64)
        self.S = np.asarray(self.S, dtype=np.float64)
        if self.noise not in ("gaussian", "uniform"):
            raise ValueError("noise must be 'gaussian' or 'uniform'")
        ev = np.linalg.eigvalsh(self.A)
        if ev[0] <= 0:
            raise ValueError("A must be positive definite")
        self.c, self.L = float(ev[0]), float(ev[-1])
        self.latent_dim = self.S.shape[1]

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def to_base(self, points):
        if self.noise == "uniform":
            return np.sqrt(12.0) * (np.asarray(getattr(points, "points", points)) - 0.5)
        return uniform_batch_to_normal(points)

    def _offset(self, Z, theta):
        return np.asarray(theta, dtype=np.float64) - self.theta_opt - np.asarray(Z) @ self.S.T

    def values(self, Z, theta):
        D = self._offset(Z, theta)
        return 0.5 * np.sum((D @ self.A) * D, axis=1)

    def grads(self, Z, theta):
        return self._offset(Z, theta) @ self.A

    def hvps(self, Z, theta, v):
        return np.tile(self.A @ np.asarray(v, dtype=np.float64), (np.asarray(Z).shape[0], 1))

    def values_and_grads(self, Z, theta):
        D = self._offset(Z, theta)
        G = D @ self.A
        return 0.5 * np.sum(G * D, axis=1), G

    def f(self, z, theta):
        return float(self.values(np.atleast_2d(z), theta)[0])

    def g(self, z, theta):
        return self.grads(np.atleast_2d(z), theta)[0]

    def hvp(self, z, theta, v):
        return self.A @ np.asarray(v, dtype=np.float64)

    def objective(self, theta) -> float:
        e = np.asarray(theta) - self.theta_opt
        return 0.5 * float(e @ self.A @ e) + self.f_star

    @property
    def f_star(self) -> float:
        return 0.5 * float(np.trace(self.S.T @ self.A @ self.S))

    def gap(self, theta) -> float:
        e = np.asarray(theta) - self.theta_opt
        return 0.5 * float(e @ self.A @ e)

    def grad_F(self, theta):
        return self.A @ (np.asarray(theta) - self.theta_opt)

    def theta_star(self):
        return self.theta_opt.copy()

    def param_error(self, theta) -> float:
        return float(np.linalg.norm(np.asarray(theta) - self.theta_opt))

    def initial_theta(self):
        return np.zeros(self.dim)


def make_quadratic(dim=10, c=1.0, L=1.5, noise_scale=1.0, noise="gaussian", seed=0) -> QuadraticProblem:
    """Random rotation of ``diag(linspace(c, L))`` with ``theta* ~ N(0, I)``."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    A = Q @ np.diag(np.linspace(c, L, dim)) @ Q.T
    A = 0.5 * (A + A.T)
    return QuadraticProblem(A, rng.standard_normal(dim), noise_scale * np.eye(dim), noise)


def generate_synthetic(kind: str, seed: int = 0, **sizes):
    """Synthetic datasets following the benchmark recipes.

    * ``linreg``: ``N=300``, ``d=100``, ``X`` IID N(0,1), ``gamma=0.5``,
      ``beta ~ N(0, I)``, ``y = X beta + gamma * eps``.
    * ``logreg``: ``N=30``, ``d=100``, ``beta ~ N(0, I/N)``, ``x_i ~ N(0, I)``,
      ``y_i = +1`` with probability ``S(x_i^T beta)``.
    * ``crossed``: ``I=10``, ``J=5``, all latents drawn from their priors.
    """
    rng = np.random.default_rng(seed)
    if kind == "linreg":
        N, d, gamma = sizes.get("N", 300), sizes.get("d", 100), sizes.get("gamma", 0.5)
        X = rng.standard_normal((N, d))
        beta = rng.standard_normal(d)
        y = X @ beta + gamma * rng.standard_normal(N)
        return LinRegModel(X, y, gamma)
    if kind == "logreg":
        N, d = sizes.get("N", 30), sizes.get("d", 100)
        beta = rng.standard_normal(d) / np.sqrt(N)
        X = rng.standard_normal((N, d))
        y = np.where(rng.random(N) < expit(X @ beta), 1.0, -1.0)
        return LogRegModel(X, y)
    if kind == "crossed":
        I, J = sizes.get("I", 10), sizes.get("J", 5)
        mu, la, lb = rng.standard_normal(3)
        a = np.exp(la) * rng.standard_normal(I)
        b = np.exp(lb) * rng.standard_normal(J)
        Y = mu + a[:, None] + b[None, :] + rng.standard_normal((I, J))
        return CrossedEffectsModel(Y)
    raise ValueError(f"unknown model kind {kind!r}")


def save_dataset(model, directory) -> None:
    """Write the model's data as CSV files under ``directory``."""
    os.makedirs(directory, exist_ok=True)
    if isinstance(model, LinRegModel):
        np.savetxt(os.path.join(directory, "X.csv"), model.X, delimiter=",")
        np.savetxt(os.path.join(directory, "y.csv"), model.y, delimiter=",", header=f"gamma={model.gamma!r}")
    elif isinstance(model, LogRegModel):
        np.savetxt(os.path.join(directory, "X.csv"), model.X, delimiter=",")
        np.savetxt(os.path.join(directory, "y.csv"), model.y, delimiter=",")
    elif isinstance(model, CrossedEffectsModel):
        np.savetxt(os.path.join(directory, "Y.csv"), model.Y, delimiter=",")
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")


def load_dataset(kind: str, directory):
    """Inverse of :func:`save_dataset`."""
    if kind == "crossed":
        return CrossedEffectsModel(np.loadtxt(os.path.join(directory, "Y.csv"), delimiter=",", ndmin=2))
    X = np.loadtxt(os.path.join(directory, "X.csv"), delimiter=",", ndmin=2)
    ypath = os.path.join(directory, "y.csv")
    y = np.loadtxt(ypath, delimiter=",", ndmin=1)
    if kind == "linreg":
        with open(ypath) as fh:
            first = fh.readline()
        gamma = float(first.split("=", 1)[1]) if first.startswith("# gamma=") else 0.5
        return LinRegModel(X, y, gamma)
    if kind == "logreg":
        return LogRegModel(X, y)
    raise ValueError(f"unknown model kind {kind!r}")
