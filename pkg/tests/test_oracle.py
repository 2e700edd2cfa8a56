import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import linprog, minimize_scalar

from semiot.measures import DiscreteMeasure, SquaredEuclidean
from semiot.oracle import (FDReport, counterexample_reference, fd_gradient,
                           fd_gradient_check, kl_divergence, relative_entropy,
                           sinkhorn_solve)

SQ = SquaredEuclidean()


def random_pair(seed, m=4, n=3, d=2):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(0.1, 1, m), rng.uniform(0.1, 1, n)
    return (DiscreteMeasure(rng.uniform(0, 1, (m, d)), a / a.sum()),
            DiscreteMeasure(rng.uniform(0, 1, (n, d)), b / b.sum()))


class TestSinkhorn:
    @pytest.mark.parametrize("seed", range(4))
    def test_marginals(self, seed):
        mu, nu = random_pair(seed)
        res = sinkhorn_solve(mu, nu, SQ, 0.1)
        assert res.converged
        row, col = res.plan.marginal_errors(mu, nu)
        assert row < 1e-12 and col < 1e-9

    def test_two_by_two_against_scalar_minimization(self):
        # plans with these marginals form a one-parameter family
        mu = DiscreteMeasure([[0.0], [1.0]], [0.4, 0.6])
        nu = DiscreteMeasure([[0.2], [1.5]], [0.3, 0.7])
        lam = 0.2
        C = SQ.matrix(mu.support, nu.support)

        def primal(t):
            P = np.array([[t, 0.4 - t], [0.3 - t, 0.3 + t]])
            return np.sum(P * C) + lam * np.sum(P * np.log(P / np.outer(mu.weights, nu.weights)))

        best = minimize_scalar(primal, bounds=(1e-12, 0.3 - 1e-12), method="bounded",
                               options={"xatol": 1e-14})
        assert_allclose(sinkhorn_solve(mu, nu, SQ, lam, tol=1e-14).value, best.fun,
                        rtol=1e-10)

    def test_small_lambda_approaches_linear_program(self):
        mu, nu = random_pair(5)
        C = SQ.matrix(mu.support, nu.support)
        m, n = C.shape
        A_eq = np.vstack([np.kron(np.eye(m), np.ones(n)), np.kron(np.ones(m), np.eye(n))])
        lp = linprog(C.ravel(), A_eq=A_eq, b_eq=np.concatenate([mu.weights, nu.weights]),
                     bounds=(0, None), method="highs")
        lam = 1e-3
        val = sinkhorn_solve(mu, nu, SQ, lam).value
        # the entropic value exceeds the LP value by at most lam * min(log m, log n)
        assert lp.fun - 1e-9 <= val <= lp.fun + lam * math.log(min(m, n)) + 1e-9

    def test_single_source_point(self):
        mu = DiscreteMeasure([[0.0, 0.0]])
        nu = DiscreteMeasure([[0.0, 0.0], [0.0, 1.0]])
        for lam in (0.01, 1.0):
            res = sinkhorn_solve(mu, nu, SQ, lam)
            assert_allclose(res.plan.matrix, [[0.5, 0.5]])
            assert_allclose(res.value, 0.5, atol=1e-12)

    def test_identical_measures_bound(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(6, 2))
        mu = nu = DiscreteMeasure(pts)
        lam = 1e-3
        assert sinkhorn_solve(mu, nu, SQ, lam).value <= lam * math.log(6) + 1e-6

    def test_primal_matches_dual_value(self):
        mu, nu = random_pair(7)
        res = sinkhorn_solve(mu, nu, SQ, 0.05, tol=1e-12)
        assert_allclose(res.value, res.semidual_value, rtol=1e-9)

    def test_requires_positive_lambda(self):
        mu, nu = random_pair(0)
        with pytest.raises(ValueError):
            sinkhorn_solve(mu, nu, SQ, 0.0)


class TestEntropy:
    def test_product_plan_is_zero(self):
        a, b = np.array([0.2, 0.8]), np.array([0.5, 0.25, 0.25])
        assert_allclose(relative_entropy(np.outer(a, b), a, b), 0.0, atol=1e-15)

    def test_diagonal_plan(self):
        w = np.full(4, 0.25)
        assert_allclose(relative_entropy(np.eye(4) / 4, w, w), math.log(4))

    def test_support_violation_is_infinite(self):
        assert relative_entropy(np.array([[0.5, 0.5]]), [1.0], [1.0, 0.0]) == math.inf

    def test_matches_kl_for_probability_plans(self):
        rng = np.random.default_rng(1)
        P = rng.uniform(size=(3, 3))
        P /= P.sum()
        a, b = P.sum(axis=1), P.sum(axis=0)
        assert_allclose(relative_entropy(P, a, b), kl_divergence(P, a, b), rtol=1e-14)

    def test_unnormalized_plan_differs_from_kl(self):
        P = np.full((2, 2), 0.5)
        w = np.array([0.5, 0.5])
        # sum P (log(P / (w w)) - 1) + 1 with P = 2 * (w w)
        assert_allclose(relative_entropy(P, w, w), 2 * math.log(2) - 1)
        assert_allclose(kl_divergence(P, w, w), 2 * math.log(2))


class TestCounterexampleReference:
    def test_origin(self):
        ref = counterexample_reference([0.0, 0.0], [0, 0], [0, 1], SQ)
        assert ref.value == 0.5
        assert_allclose(ref.psi, [0.0, 1.0])
        assert_allclose(ref.grad, [0.0, -1.0])

    def test_gradient_by_finite_differences(self):
        rng = np.random.default_rng(0)
        for theta in rng.uniform(-2, 2, (5, 2)):
            f = lambda t: counterexample_reference(t, [0, 0], [0, 1], SQ).value
            assert_allclose(counterexample_reference(theta, [0, 0], [0, 1], SQ).grad,
                            fd_gradient(f, theta), rtol=1e-8)

    def test_negative_lambda(self):
        with pytest.raises(ValueError):
            counterexample_reference([0, 0], [0, 0], [0, 1], SQ, lam=-1.0)


class TestFDHarness:
    def test_quadratic_passes(self):
        A = np.array([[2.0, 0.5], [0.5, 1.0]])
        rep = fd_gradient_check(lambda x: 0.5 * x @ A @ x, lambda x: A @ x,
                                [np.array([1.0, -2.0]), np.array([0.3, 0.3])])
        assert rep.passed and rep.max_error < 1e-9

    def test_wrong_gradient_fails_and_reports_worst(self):
        rep = fd_gradient_check(lambda x: float(np.sum(x**2)), lambda x: 2 * x + [0, 1e-3],
                                [np.array([1.0, 0.0]), np.array([1e-3, 0.0])], name="sq")
        assert not rep.passed
        assert rep.worst == 1
        line = rep.lines()[0]
        assert line.startswith("check=sq status=fail") and "worst=1" in line
        assert "FAIL" in str(rep)

    def test_zero_gradient(self):
        rep = fd_gradient_check(lambda x: 1.0, lambda x: np.zeros(2), [np.zeros(2)])
        assert rep.passed and rep.max_error == 0.0

    def test_empty_report(self):
        rep = FDReport(np.array([]), 1e-6)
        assert rep.passed and rep.worst == -1
