import json
import pathlib

import numpy as np
import pytest

from otagd.alpha_core import is_alpha_pd
from otagd.objectives import (
    ConvergenceError,
    LogisticProblem,
    make_logistic,
    make_quadratic,
    oracle_minimize,
)

FIXTURE = pathlib.Path(__file__).parent / "fixtures" / "logistic_wstar.json"


@pytest.fixture(scope="module")
def logistic():
    return make_logistic(6, 5, 30, 0.2, seed=3)


def bregman(problem, w, v):
    return problem.loss(w) - problem.loss(v) - problem.grad(v) @ (w - v)


class TestQuadratic:
    def test_two_centers(self):
        p = make_quadratic(2, 2, centers=[[0.0, 0.0], [2.0, 0.0]])
        np.testing.assert_array_equal(p.w_star, [1.0, 0.0])
        assert p.gamma == p.lam == 1.0

    def test_stationary_at_minimizer(self):
        p = make_quadratic(7, 4, seed=2)
        assert not np.any(np.abs(p.grad(p.w_star)) > 1e-15)

    def test_hessian_alpha_pd(self):
        p = make_quadratic(3, 2, seed=1)
        assert is_alpha_pd(p.hessian(), 1.5, 10_000, rng=0)

    def test_center_shape_checked(self):
        with pytest.raises(ValueError):
            make_quadratic(3, 2, centers=np.zeros((2, 2)))

    def test_oracle_matches_closed_form(self):
        p = make_quadratic(10, 5, seed=4, center_scale=3.0)
        np.testing.assert_allclose(oracle_minimize(p, 1e-12), p.w_star, atol=1e-10)

    def test_gradient_bound_on_ball(self, rng):
        p = make_quadratic(20, 6, seed=5)
        G = p.gradient_bound(2.0)
        u = rng.standard_normal((5000, 6))
        u *= (2.0 * rng.random(5000) ** (1 / 6) / np.linalg.norm(u, axis=1))[:, None]
        norms = np.linalg.norm(p.agent_grads(p.w_star + u), axis=-1)
        assert norms.max() <= G


class TestLogistic:
    def test_zero_features(self):
        p = LogisticProblem(np.zeros((3, 4, 2)), np.ones((3, 4)), 1.0)
        np.testing.assert_allclose(p.w_star, 0.0, atol=1e-15)

    def test_oracle_residual(self, logistic):
        assert logistic.oracle_residual < 1e-10
        assert np.linalg.norm(logistic.grad(logistic.w_star)) < 1e-10

    def test_rejects_nonpositive_reg(self):
        with pytest.raises(ValueError):
            make_logistic(2, 2, 5, 0.0)

    def test_labels_must_be_signs(self):
        with pytest.raises(ValueError):
            LogisticProblem(np.ones((1, 2, 2)), np.array([[0.0, 1.0]]), 1.0)

    def test_finite_differences(self, logistic, rng):
        h = 1e-5
        worst = 0.0
        for _ in range(100):
            w = logistic.w_star + rng.standard_normal(logistic.dim)
            g = logistic.agent_grads(w)
            fd = np.empty_like(g)
            for i in range(logistic.dim):
                e = np.zeros(logistic.dim)
                e[i] = h
                fd[:, i] = (logistic.agent_losses(w + e) - logistic.agent_losses(w - e)) / (2 * h)
            worst = max(worst, np.max(np.linalg.norm(fd - g, axis=1) / np.linalg.norm(g, axis=1)))
        assert worst < 1e-6

    def test_tolerance_bound(self, logistic):
        coarse = oracle_minimize(logistic, 1e-3)
        fine = oracle_minimize(logistic, 1e-10)
        assert np.linalg.norm(coarse - fine) < 1e-3 / logistic.gamma

    def test_budget_exhaustion(self, logistic):
        with pytest.raises(ConvergenceError) as info:
            oracle_minimize(logistic, 1e-14, max_iter=3)
        assert info.value.residual > 0

    def test_against_fixture(self):
        ref = json.loads(FIXTURE.read_text())
        p = make_logistic(**ref["settings"])
        assert ref["residual"] < 1e-12
        np.testing.assert_allclose(p.w_star, ref["w_star"], atol=1e-9)

    def test_against_scipy(self, logistic):
        optimize = pytest.importorskip("scipy.optimize")
        res = optimize.minimize(logistic.loss, np.zeros(logistic.dim), jac=logistic.grad,
                                method="BFGS", options={"gtol": 1e-11})
        np.testing.assert_allclose(logistic.w_star, res.x, atol=1e-8)


PROBLEMS = {
    "quadratic": lambda: make_quadratic(8, 5, seed=9, center_scale=2.0),
    "logistic": lambda: make_logistic(6, 5, 30, 0.2, seed=3),
}


@pytest.mark.parametrize("name", sorted(PROBLEMS))
class TestAssumptions:
    def test_strong_convexity_and_smoothness(self, name, rng):
        p = PROBLEMS[name]()
        for _ in range(10_000):
            w, v = p.w_star + 3 * rng.standard_normal((2, p.dim))
            b = bregman(p, w, v)
            sq = (w - v) @ (w - v)
            assert b >= 0.5 * p.gamma * sq - 1e-12
            assert b <= 0.5 * p.lam * sq + 1e-12

    def test_gradient_consistency(self, name, rng):
        p = PROBLEMS[name]()
        w = rng.standard_normal((50, p.dim))
        np.testing.assert_allclose(p.grad(w), p.agent_grads(w).mean(axis=-2), atol=1e-12)
        for row in w[:5]:
            np.testing.assert_allclose(p.grad(row), p.agent_grads(row).mean(axis=0), atol=1e-12)

    def test_gradient_bound(self, name, rng):
        p = PROBLEMS[name]()
        radius = 1.5
        u = rng.standard_normal((4000, p.dim))
        u *= (radius * rng.random(4000) ** (1 / p.dim) / np.linalg.norm(u, axis=1))[:, None]
        norms = np.linalg.norm(p.agent_grads(p.w_star + u), axis=-1)
        assert norms.max() <= p.gradient_bound(radius)

    def test_hessian_alpha_pd_at_samples(self, name, rng):
        p = PROBLEMS[name]()
        for w in p.w_star + rng.standard_normal((3, p.dim)):
            assert is_alpha_pd(p.hessian(w), 1.5, 2000, rng=rng)

    def test_describe(self, name):
        d = PROBLEMS[name]().describe()
        assert d["type"] == name and d["gamma"] <= d["lambda"]
