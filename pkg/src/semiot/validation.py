"""Named suites of oracle checks, run by ``semiot validate``."""

import math
from dataclasses import dataclass

import numpy as np

from .dual_solver import closed_form_potential_single_atom, solve_dual_fullbatch
from .generators import MLP, Affine, Translation
from .measures import DiscreteMeasure, PowerNorm, SquaredEuclidean
from .oracle import (counterexample_reference, fd_gradient_check,
                     relative_entropy, sinkhorn_solve)
from .semidual import (c_lambda_transform, eta_weights, grad_psi_c_lambda,
                       semidual_objective)
from .trainer import generator_gradient_estimate

SUITES = ("closed-forms", "gradients", "duality")

Y1, Y2 = np.array([0.0, 0.0]), np.array([0.0, 1.0])


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    tol: float

    def line(self):
        status = "pass" if self.passed else "fail"
        return (f"check={self.name} status={status} "
                f"value={self.value:.6e} tol={self.tol:.1e}")


def _close(name, got, want, tol):
    err = abs(got - want)
    return Check(name, bool(err <= tol), err, tol)


def closed_form_checks(seed=0):
    c = SquaredEuclidean()
    nu = DiscreteMeasure(np.array([Y1, Y2]))
    checks = []
    theta = np.zeros(2)
    psi = closed_form_potential_single_atom(theta, nu, c)
    for lam in (0.0, 0.1):
        v = semidual_objective(psi, theta[None, :], nu, c, lam)
        checks.append(_close(f"two_atom_value_lam{lam:g}", v, 0.5, 1e-12))
    for lam in (0.05, 0.1, 1.0):
        mu = DiscreteMeasure(theta[None, :])
        res = sinkhorn_solve(mu, nu, c, lam)
        checks.append(_close(f"two_atom_sinkhorn_lam{lam:g}", res.value, 0.5, 1e-8))
    ref = counterexample_reference(np.array([0.0, 0.5]), Y1, Y2, c)
    checks.append(Check("two_atom_grad_zero_at_midpoint",
                        bool(np.linalg.norm(ref.grad) <= 1e-15),
                        float(np.linalg.norm(ref.grad)), 1e-15))
    # -log((1 + e^-1) / 2) for psi = 0 at x = y1
    want = -math.log(0.5 * (1.0 + math.exp(-1.0)))
    got = c_lambda_transform(np.zeros(2), theta, nu, c, 1.0)
    checks.append(_close("soft_min_two_atoms", got, want, 1e-12))
    eta = eta_weights(np.zeros(2), theta, nu, c, 1.0)
    checks.append(_close("eta_two_atoms", eta[0], 1.0 / (1.0 + math.exp(-1.0)), 1e-12))
    for n in (2, 5, 10):
        diag = np.eye(n) / n
        w = np.full(n, 1.0 / n)
        checks.append(_close(f"entropy_diagonal_n{n}",
                             relative_entropy(diag, w, w), math.log(n), 1e-12))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        th = rng.uniform(-2, 2, 2)
        ref = counterexample_reference(th, Y1, Y2, c)
        psi = closed_form_potential_single_atom(th, nu, c)
        for lam in (0.0, 0.1):
            worst = max(worst, abs(semidual_objective(psi, th[None, :], nu, c, lam)
                                   - ref.value))
    checks.append(Check("two_atom_value_random_theta", worst <= 1e-9, worst, 1e-9))
    return checks


def _random_problem(rng, n, d):
    w = rng.uniform(0.2, 1.0, n)
    nu = DiscreteMeasure(rng.uniform(-1, 1, (n, d)), w / w.sum())
    return nu, rng.normal(0.0, 0.5, n)


def gradient_checks(seed=0, n_configs=20):
    rng = np.random.default_rng(seed)
    checks = []
    for cost, tag in ((SquaredEuclidean(), "sqeuclid"), (PowerNorm(3.0), "pow3")):
        pts = [rng.normal(size=4) for _ in range(100)]
        y = rng.normal(size=2)
        rep = fd_gradient_check(lambda x: float(cost.value(x[:2], y) + cost.value(x[2:], y)),
                                lambda x: np.concatenate([cost.grad_x(x[:2], y),
                                                          cost.grad_x(x[2:], y)]),
                                pts, h=1e-6, tol=1e-6, name=f"cost_grad_{tag}")
        checks.append(Check(rep.name, rep.passed, rep.max_error, rep.tol))

    c = SquaredEuclidean()
    worst = 0.0
    for _ in range(n_configs):
        nu, psi = _random_problem(rng, 5, 2)
        lam = rng.uniform(0.05, 1.0)
        x = rng.normal(size=2)
        rep = fd_gradient_check(lambda p: c_lambda_transform(psi, p, nu, c, lam),
                                lambda p: grad_psi_c_lambda(psi, p, nu, c, lam),
                                [x], h=1e-6, tol=1e-6)
        worst = max(worst, rep.max_error)
    checks.append(Check("transform_grad_fd", worst <= 1e-6, worst, 1e-6))

    def gens():
        yield "translation", Translation(2), 2
        yield "affine", Affine(3, 2), 3
        yield "mlp_tanh", MLP((2, 4, 2), "tanh"), 2

    for tag, gen, dz in gens():
        worst = 0.0
        for _ in range(n_configs):
            nu, psi = _random_problem(rng, 4, 2)
            lam = rng.uniform(0.05, 1.0)
            Z = rng.normal(size=(8, dz))
            theta = rng.normal(0.0, 0.7, gen.n_params)
            rep = fd_gradient_check(
                lambda th: semidual_objective(psi, gen.forward(th, Z), nu, c, lam),
                lambda th: generator_gradient_estimate(gen, th, psi, Z, nu, c, lam),
                [theta], h=1e-6, tol=1e-6)
            worst = max(worst, rep.max_error)
        checks.append(Check(f"generator_grad_fd_{tag}", worst <= 1e-6, worst, 1e-6))

    nu = DiscreteMeasure(np.array([Y1, Y2]))
    gen = Translation(2)
    z0 = np.zeros((1, 2))
    worst = 0.0
    for _ in range(20):
        theta = rng.uniform(-1.5, 1.5, 2)
        x = gen.forward(theta, z0)
        res = solve_dual_fullbatch(np.zeros(2), x, nu, c, 0.1, tol=1e-12)
        g = generator_gradient_estimate(gen, theta, res.psi, z0, nu, c, 0.1)
        ref = counterexample_reference(theta, Y1, Y2, c)
        worst = max(worst, float(np.abs(g - ref.grad).max()))
    checks.append(Check("envelope_two_atoms", worst <= 1e-6, worst, 1e-6))
    return checks


def duality_checks(seed=0, n_instances=20):
    """Sinkhorn primal value against the semi-dual objective at its potential."""
    rng = np.random.default_rng(seed)
    c = SquaredEuclidean()
    checks = []
    worst = 0.0
    for i in range(n_instances):
        m, n = rng.integers(1, 11, size=2)
        d = int(rng.integers(1, 4))
        a = rng.uniform(0.1, 1.0, m)
        mu = DiscreteMeasure(rng.uniform(0, 1, (m, d)), a / a.sum())
        nu, _ = _random_problem(rng, n, d)
        lam = (0.05, 0.5)[i % 2]
        res = sinkhorn_solve(mu, nu, c, lam)
        # the source is weighted, so weight the batch average accordingly
        sd = float(mu.weights @ c_lambda_transform(res.psi, mu.support, nu, c, lam)
                   + nu.weights @ res.psi)
        rel = abs(res.value - sd) / max(abs(res.value), 1e-300)
        worst = max(worst, rel)
    checks.append(Check("primal_equals_semidual", worst <= 1e-6, worst, 1e-6))
    return checks


def run_suite(name, seed=0):
    if name == "closed-forms":
        return closed_form_checks(seed)
    if name == "gradients":
        return gradient_checks(seed)
    if name == "duality":
        return duality_checks(seed)
    if name == "all":
        return [ch for s in SUITES for ch in run_suite(s, seed)]
    raise ValueError(f"unknown suite {name!r}")
