import numpy as np
import pytest

from rqmc_sqn import lbfgs
from rqmc_sqn.lbfgs import LbfgsBuffer, WolfeConfig, insert_pair, two_loop, wolfe_line_search


def dense_bfgs(pairs, dim):
    """Explicit inverse-BFGS recursion from ``gamma I`` (test oracle only)."""
    s_last, y_last = pairs[-1]
    H = (s_last @ y_last) / (y_last @ y_last) * np.eye(dim)
    for s, y in pairs:
        rho = 1.0 / (s @ y)
        V = np.eye(dim) - rho * np.outer(y, s)
        H = V.T @ H @ V + rho * np.outer(s, s)
    return H


class TestBuffer:
    def test_empty_is_identity(self, rng):
        g = rng.standard_normal(4)
        assert np.array_equal(two_loop(LbfgsBuffer(3), g), g)

    def test_one_pair_dense_formula(self):
        s, y = np.array([1.0, 0.5]), np.array([2.0, 0.3])
        buf = LbfgsBuffer(5)
        assert buf.insert(s, y)
        g = np.array([0.7, -1.1])
        gamma = (s @ y) / (y @ y)
        rho = 1 / (s @ y)
        V = np.eye(2) - rho * np.outer(y, s)
        H = gamma * V.T @ V + rho * np.outer(s, s)
        assert np.allclose(buf.apply(g), H @ g, rtol=1e-14)

    def test_matches_dense_oracle(self, rng):
        for _ in range(20):
            dim, m = int(rng.integers(1, 6)), int(rng.integers(1, 5))
            Q = rng.standard_normal((dim, dim))
            A = Q @ Q.T + 0.2 * np.eye(dim)
            buf, pairs = LbfgsBuffer(m), []
            for _ in range(6):
                s = rng.standard_normal(dim)
                if buf.insert(s, A @ s):
                    pairs.append((s, A @ s))
            g = rng.standard_normal(dim)
            assert np.allclose(buf.apply(g), dense_bfgs(pairs[-m:], dim) @ g, rtol=1e-10, atol=1e-12)

    def test_recovers_inverse_on_quadratic(self, rng):
        A = np.array([[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]])
        buf = LbfgsBuffer(10)
        theta = np.array([1.0, -2.0, 0.5])
        for _ in range(5):  # d + 2
            g = A @ theta
            if np.linalg.norm(g) < 1e-12:
                break
            p = -buf.apply(g)
            alpha = -(g @ p) / (p @ A @ p)  # exact minimizer along p
            s = alpha * p
            buf.insert(s, A @ s)
            theta = theta + s
        g = rng.standard_normal(3)
        assert np.allclose(buf.apply(g), np.linalg.solve(A, g), rtol=1e-6)

    def test_curvature_rule(self):
        buf = LbfgsBuffer(3)
        assert insert_pair(buf, [1.0, 0.0], [1.0, 0.0])
        assert not insert_pair(buf, [1.0, 0.0], [-1.0, 0.0])
        assert not buf.insert([1.0, 0.0], [1e-10, 1.0])  # s'y below eps |s||y|
        assert not buf.insert([1.0, 0.0], [np.nan, 0.0])
        assert len(buf) == 1

    def test_eviction(self):
        buf = LbfgsBuffer(2)
        for k in range(3):
            buf.insert([k + 1.0, 0.0], [1.0, 0.0])
        assert [p.s[0] for p in buf.pairs] == [2.0, 3.0]

    def test_shape_and_memory_validation(self):
        with pytest.raises(ValueError):
            LbfgsBuffer(0)
        with pytest.raises(ValueError):
            LbfgsBuffer(2).insert([1.0], [1.0, 2.0])

    def test_inverse_hessian_spd(self, rng):
        buf = LbfgsBuffer(4)
        A = np.diag([1.0, 2.0, 5.0])
        for _ in range(4):
            s = rng.standard_normal(3)
            buf.insert(s, A @ s)
        H = buf.inverse_hessian(3)
        assert np.allclose(H, H.T)
        lo, hi = buf.spectral_bounds(3)
        assert 0 < lo <= hi
        assert np.allclose(two_loop(buf, np.eye(3)), H)


def quad(D):
    D = np.asarray(D, dtype=np.float64)
    return lambda x: (0.5 * float(x @ (D * x)), D * x)


class TestWolfe:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            WolfeConfig(c1=0.5, c2=0.1)

    def test_unit_step_accepted_first(self):
        res = wolfe_line_search(quad([1.0]), np.array([1.0]), np.array([-1.0]))
        assert res.success and res.alpha == 1.0 and res.evaluations == 2  # f0 plus one trial

    def test_non_descent_fallback(self):
        cfg = WolfeConfig(fallback_step=0.05)
        res = wolfe_line_search(quad([1.0]), np.array([1.0]), np.array([1.0]), cfg)
        assert not res.descent and not res.success and res.alpha == 0.05

    @pytest.mark.parametrize("cfg", [WolfeConfig(), WolfeConfig(c1=1e-4, c2=0.9)])
    def test_ill_conditioned_quadratic(self, cfg):
        f = quad([1.0, 100.0])
        x = np.array([1.0, 1.0])
        f0, g0 = f(x)
        p = -g0
        res = wolfe_line_search(f, x, p, cfg, f0, g0)
        f1, g1 = f(x + res.alpha * p)
        assert res.success
        assert f1 <= f0 + cfg.c1 * res.alpha * (g0 @ p)
        assert g1 @ p >= cfg.c2 * (g0 @ p)

    def test_exhausted_trials_fall_back(self):
        cfg = WolfeConfig(max_iter=1, initial_step=1e-8, fallback_step=0.3)
        res = wolfe_line_search(quad([1.0]), np.array([1.0]), np.array([-1.0]), cfg)
        assert not res.success and res.descent and res.alpha == 0.3

    def test_non_finite_trial_shrinks(self):
        def f(x):
            if abs(x[0]) > 5:
                return np.inf, np.array([np.inf])
            return 0.5 * float(x[0] ** 2), x.copy()

        res = wolfe_line_search(f, np.array([1.0]), np.array([-1.0]), WolfeConfig(initial_step=64.0))
        assert res.success and res.alpha < 6

    def test_uses_module_predicates(self, monkeypatch):
        monkeypatch.setattr(lbfgs, "curvature_ok", lambda *a: False)
        res = wolfe_line_search(quad([1.0]), np.array([1.0]), np.array([-1.0]))
        assert not res.success
