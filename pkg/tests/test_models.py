import numpy as np
import pytest
from scipy.stats import norm

from conftest import central_diff
from rqmc_sqn.gauss import uniform_batch_to_normal
from rqmc_sqn.models import (
    LOG_2PI,
    CrossedEffectsModel,
    LinRegModel,
    LogRegModel,
    QuadraticProblem,
    generate_synthetic,
    kl_diag_gaussian,
    linreg_analytic_optimum,
    load_dataset,
    log_sigmoid,
    make_quadratic,
    save_dataset,
)
from rqmc_sqn.sobol import SobolSampler


def small_models():
    return [
        generate_synthetic("linreg", seed=1, N=15, d=4),
        generate_synthetic("logreg", seed=2, N=12, d=5),
        generate_synthetic("crossed", seed=3, I=3, J=2),
    ]


def random_theta(model, rng):
    d = model.latent_dim
    return np.concatenate([0.5 * rng.standard_normal(d), rng.uniform(-1.0, 0.3, d)])


class TestKL:
    def test_zero(self):
        assert kl_diag_gaussian(np.zeros(3), np.zeros(3))[0] == 0.0

    def test_unit_shift(self):
        assert kl_diag_gaussian(np.array([1.0]), np.array([0.0]))[0] == pytest.approx(0.5)

    def test_gradient(self, rng):
        mu, ls = rng.standard_normal(4), rng.standard_normal(4) * 0.5
        theta = np.concatenate([mu, ls])
        fd = central_diff(lambda t: kl_diag_gaussian(t[:4], t[4:])[0], theta)
        assert np.allclose(kl_diag_gaussian(mu, ls)[1], fd, atol=1e-6)


class TestLinRegOptimum:
    def test_identity_design(self, rng):
        y = rng.standard_normal(4)
        mu, sigma = linreg_analytic_optimum(LinRegModel(np.eye(4), y, gamma=1.0))
        assert np.allclose(mu, y / 2) and np.allclose(sigma, 1 / np.sqrt(2))

    def test_zero_column(self, rng):
        X = rng.standard_normal((10, 3))
        X[:, 1] = 0.0
        _, sigma = linreg_analytic_optimum(LinRegModel(X, rng.standard_normal(10)))
        assert sigma[1] == 1.0

    def test_gradient_vanishes(self):
        for seed in range(3):
            m = generate_synthetic("linreg", seed=seed, N=40, d=8)
            assert np.max(np.abs(m.grad_F(m.theta_star()))) <= 1e-8

    def test_rank_deficiency_reported(self):
        m = LinRegModel(np.ones((3, 2)), np.ones(3))
        m._G = -10.0 * np.eye(2)  # force an indefinite system
        with pytest.raises(np.linalg.LinAlgError):
            linreg_analytic_optimum(m)

    def test_param_error_natural_coordinates(self):
        m = generate_synthetic("linreg", seed=0, N=20, d=3)
        theta = m.theta_star().copy()
        theta[3] += np.log(2.0)  # doubles sigma_1
        assert m.param_error(theta) == pytest.approx(m.optimum()[1][0])


class TestLinRegPerSample:
    def test_value_formula(self, rng):
        m = generate_synthetic("linreg", seed=4, N=20, d=3)
        mu = np.linalg.solve(m.X.T @ m.X / m.gamma**2 + np.eye(3), m.X.T @ m.y / m.gamma**2)
        ls = np.array([-0.5, 0.1, 0.2])
        theta = np.concatenate([mu, ls])
        r = m.y - m.X @ mu
        loglik = np.sum(norm.logpdf(m.y, m.X @ mu, m.gamma))
        assert np.allclose(-0.5 * r @ r / m.gamma**2 - 10 * np.log(2 * np.pi * m.gamma**2), loglik)
        kl = np.sum(0.5 * (np.exp(2 * ls) + mu**2 - 1) - ls)
        assert m.f(np.zeros(3), theta) == pytest.approx(-loglik + kl, rel=1e-12)

    def test_expected_loglik(self):
        m = generate_synthetic("linreg", seed=5, N=30, d=4)
        theta = np.concatenate([np.full(4, 0.3), np.full(4, -1.0)])
        Z = uniform_batch_to_normal(SobolSampler(4, "scramble", seed=0).draw_batch(2**13))
        est = np.mean(-m.values(Z, theta) + m.regularizer(theta))
        assert est == pytest.approx(m.expected_loglik(theta), rel=1e-3)

    def test_hvp_independent_of_theta(self, rng):
        m = generate_synthetic("linreg", seed=6, N=20, d=3)
        z = np.zeros(3)  # with z = 0 the sigma coupling vanishes
        v = rng.standard_normal(6)
        h1 = m.hvp(z, random_theta(m, rng), v)[:3]
        h2 = m.hvp(z, random_theta(m, rng), v)[:3]
        assert np.allclose(h1, h2)


@pytest.mark.parametrize("model", small_models(), ids=["linreg", "logreg", "crossed"])
class TestDerivatives:
    def test_gradient(self, model, rng):
        theta, z = random_theta(model, rng), rng.standard_normal(model.latent_dim)
        fd = central_diff(lambda t: model.f(z, t), theta)
        assert np.allclose(model.g(z, theta), fd, rtol=1e-5, atol=1e-6 * (1 + np.abs(fd).max()))

    def test_hvp(self, model, rng):
        theta, z = random_theta(model, rng), rng.standard_normal(model.latent_dim)
        v = rng.standard_normal(model.dim)
        eps = 1e-5
        fd = (model.g(z, theta + eps * v) - model.g(z, theta - eps * v)) / (2 * eps)
        assert np.allclose(model.hvp(z, theta, v), fd, rtol=1e-5, atol=1e-5 * (1 + np.abs(fd).max()))

    def test_batch_rows_match_single(self, model, rng):
        theta = random_theta(model, rng)
        Z = rng.standard_normal((5, model.latent_dim))
        vals, grads = model.values_and_grads(Z, theta)
        for i in range(5):
            assert vals[i] == pytest.approx(model.f(Z[i], theta))
            assert np.allclose(grads[i], model.g(Z[i], theta))

    def test_dimension_mismatch(self, model):
        with pytest.raises(ValueError):
            model.f(np.zeros(model.latent_dim + 1), model.initial_theta())
        with pytest.raises(ValueError):
            model.f(np.zeros(model.latent_dim), np.zeros(model.dim + 1))


class TestLogReg:
    def test_orthogonal_beta(self):
        X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        m = LogRegModel(X, np.array([1.0, -1.0, 1.0]))
        theta = np.zeros(4)
        kl = 0.0
        assert m.f(np.zeros(2), theta) == pytest.approx(3 * np.log(2) + kl)

    def test_log_sigmoid_stable(self):
        assert log_sigmoid(-745.0) == pytest.approx(-745.0)
        assert np.isfinite(log_sigmoid(-1e6)) and log_sigmoid(800.0) == 0.0

    def test_labels_validated(self):
        with pytest.raises(ValueError):
            LogRegModel(np.ones((2, 2)), np.array([0.0, 1.0]))


def crossed_oracle(Y, z, theta):
    """Per-sample negative ELBO assembled term by term from Gaussian log-densities."""
    I, J = Y.shape
    d = I + J + 3
    mu, ls = theta[:d], theta[d:]
    lat = mu + np.exp(ls) * z
    m0, la, lb, a, b = lat[0], lat[1], lat[2], lat[3 : 3 + I], lat[3 + I :]
    logp = 0.0
    for i in range(I):
        for j in range(J):
            logp += norm.logpdf(Y[i, j], m0 + a[i] + b[j], 1.0)
    logp += np.sum(norm.logpdf(a, 0.0, np.exp(la))) + np.sum(norm.logpdf(b, 0.0, np.exp(lb)))
    kl = sum(0.5 * (np.exp(2 * ls[k]) + mu[k] ** 2 - 1) - ls[k] for k in range(3))
    entropy = sum(ls[k] + 0.5 * (1 + np.log(2 * np.pi)) for k in range(3, d))
    return -logp + kl - entropy


class TestCrossed:
    def test_layout(self):
        m = CrossedEffectsModel(np.zeros((10, 5)))
        assert m.latent_dim == 18 and m.dim == 36

    def test_all_zero_by_hand(self):
        m = CrossedEffectsModel(np.zeros((1, 1)))
        # three N(0,1) log-densities at 0 (observation, a, b), zero KL, two unit-variance entropies
        expected = 3 * 0.5 * LOG_2PI - 2 * 0.5 * (1 + LOG_2PI)
        assert m.f(np.zeros(5), np.zeros(10)) == pytest.approx(expected)

    def test_against_oracle(self, rng):
        Y = rng.standard_normal((3, 4))
        m = CrossedEffectsModel(Y)
        for _ in range(5):
            theta, z = random_theta(m, rng), rng.standard_normal(m.latent_dim)
            assert m.f(z, theta) == pytest.approx(crossed_oracle(Y, z, theta), rel=1e-12)


class TestQuadratic:
    def test_constants(self):
        q = make_quadratic(dim=6, c=0.5, L=2.0, seed=1)
        assert q.c == pytest.approx(0.5) and q.L == pytest.approx(2.0)
        assert q.gap(q.theta_star()) == 0.0

    def test_objective_is_mean(self, rng):
        q = make_quadratic(dim=3, seed=2)
        theta = rng.standard_normal(3)
        Z = rng.standard_normal((200_000, 3))
        assert q.values(Z, theta).mean() == pytest.approx(q.objective(theta), rel=1e-2)
        assert q.objective(q.theta_star()) == pytest.approx(q.f_star)

    def test_uniform_noise_unit_variance(self):
        q = make_quadratic(dim=2, noise="uniform")
        z = q.to_base(SobolSampler(2, "scramble", seed=0).draw_batch(4096))
        assert np.all(np.abs(z) <= np.sqrt(3)) and np.allclose(z.var(axis=0), 1.0, atol=1e-3)

    def test_validation(self):
        with pytest.raises(ValueError):
            QuadraticProblem(-np.eye(2), np.zeros(2), np.eye(2))
        with pytest.raises(ValueError):
            QuadraticProblem(np.eye(2), np.zeros(2), np.eye(2), noise="cauchy")


class TestSynthetic:
    def test_defaults(self):
        lin = generate_synthetic("linreg")
        assert lin.X.shape == (300, 100) and lin.gamma == 0.5
        log = generate_synthetic("logreg")
        assert log.X.shape == (30, 100)
        cr = generate_synthetic("crossed")
        assert (cr.I, cr.J) == (10, 5)

    def test_reproducible(self):
        a, b = generate_synthetic("logreg", seed=7), generate_synthetic("logreg", seed=7)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)

    def test_unknown(self):
        with pytest.raises(ValueError):
            generate_synthetic("vae")

    @pytest.mark.parametrize("kind", ["linreg", "logreg", "crossed"])
    def test_csv_round_trip(self, kind, tmp_path):
        m = generate_synthetic(kind, seed=1, **({"N": 7, "d": 3} if kind != "crossed" else {"I": 2, "J": 3}))
        save_dataset(m, tmp_path)
        back = load_dataset(kind, tmp_path)
        theta = np.linspace(-0.5, 0.5, m.dim)
        z = np.linspace(-1, 1, m.latent_dim)
        assert back.f(z, theta) == pytest.approx(m.f(z, theta), rel=1e-15)
