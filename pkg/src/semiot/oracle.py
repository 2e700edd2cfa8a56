"""Reference computations used to cross-check the semi-dual machinery.

Nothing here calls into :mod:`semiot.semidual`; the Sinkhorn solver uses
``scipy.special.logsumexp`` and explicit cost matrices so it stays an
independent route to the entropic transport value.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .measures import DiscreteMeasure

__all__ = [
    "TransportPlan",
    "SinkhornResult",
    "sinkhorn_solve",
    "kl_divergence",
    "relative_entropy",
    "counterexample_reference",
    "FDReport",
    "fd_gradient",
    "fd_gradient_check",
]


def _weights(m):
    if isinstance(m, DiscreteMeasure):
        return m.weights
    return np.asarray(m, dtype=np.float64).reshape(-1)


@dataclass
class TransportPlan:
    matrix: np.ndarray

    def marginal_errors(self, mu, nu):
        P = self.matrix
        return (float(np.abs(P.sum(axis=1) - _weights(mu)).max()),
                float(np.abs(P.sum(axis=0) - _weights(nu)).max()))


@dataclass
class SinkhornResult:
    plan: TransportPlan
    phi: np.ndarray
    psi: np.ndarray
    value: float
    semidual_value: float
    converged: bool
    n_iter: int
    marginal_error: float


def sinkhorn_solve(mu, nu, cost, lam, tol=1e-9, max_iter=100_000):
    r"""Entropic OT between two discrete measures, log-domain Sinkhorn.

    Solves

    .. math::
        \min_{\pi \in \Pi(\mu, \nu)} \langle \pi, C\rangle
            + \lambda H(\pi \mid \mu \otimes \nu)

    by alternating exact maximization of the dual in ``psi`` and ``phi``.
    The loop ends with a ``phi`` update, so row marginals are exact and
    convergence is measured on the column marginals (l1 norm).

    Parameters
    ----------
    mu, nu : DiscreteMeasure
        Source (rows) and target (columns).
    cost : Cost
    lam : float
        Regularization, > 0.
    tol : float
        Stopping threshold on the l1 column-marginal error.
    max_iter : int

    Returns
    -------
    SinkhornResult
        ``value`` is the primal objective at the returned plan and
        ``semidual_value`` is ``sum_i a_i phi_i + sum_j b_j psi_j`` with
        ``phi`` the entropic transform of the returned ``psi``.
    """
    if not lam > 0:
        raise ValueError("Sinkhorn needs lam > 0")
    C = cost.matrix(mu.support, nu.support)
    a, b = mu.weights, nu.weights
    with np.errstate(divide="ignore"):
        la, lb = np.log(a), np.log(b)
    psi = np.zeros(nu.n)
    phi = -lam * logsumexp(lb[None, :] + (psi[None, :] - C) / lam, axis=1)
    converged = False
    err = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        psi = -lam * logsumexp(la[:, None] + (phi[:, None] - C) / lam, axis=0)
        phi = -lam * logsumexp(lb[None, :] + (psi[None, :] - C) / lam, axis=1)
        logP = la[:, None] + lb[None, :] + (phi[:, None] + psi[None, :] - C) / lam
        P = np.exp(logP)
        err = float(np.abs(P.sum(axis=0) - b).sum())
        if err <= tol:
            converged = True
            break
    value = float(np.sum(P * C) + lam * relative_entropy(P, a, b))
    semidual_value = float(a @ phi + b @ psi)
    return SinkhornResult(TransportPlan(P), phi, psi, value, semidual_value,
                          converged, it, err)


def relative_entropy(plan, mu, nu):
    r"""``H(pi | mu x nu) = sum pi (log(pi / (mu nu)) - 1) + 1`` with ``0 log 0 = 0``.

    Returns ``inf`` when the plan charges a pair where ``mu_i nu_j = 0``.
    """
    P = plan.matrix if isinstance(plan, TransportPlan) else np.asarray(plan, float)
    prod = np.outer(_weights(mu), _weights(nu))
    pos = P > 0
    if np.any(pos & (prod <= 0)):
        return float("inf")
    terms = P[pos] * (np.log(P[pos] / prod[pos]) - 1.0)
    return float(terms.sum() + 1.0)


def kl_divergence(plan, mu, nu):
    """Plain KL divergence ``sum pi log(pi / (mu nu))`` of a plan to ``mu x nu``.

    Equals :func:`relative_entropy` whenever the plan has total mass one.
    """
    P = plan.matrix if isinstance(plan, TransportPlan) else np.asarray(plan, float)
    prod = np.outer(_weights(mu), _weights(nu))
    pos = P > 0
    if np.any(pos & (prod <= 0)):
        return float("inf")
    return float(np.sum(P[pos] * np.log(P[pos] / prod[pos])))


@dataclass
class CounterexampleReference:
    value: float
    psi: np.ndarray
    grad: np.ndarray


def counterexample_reference(theta, y1, y2, cost, lam=0.0):
    """Closed forms for ``delta_theta`` against ``(delta_y1 + delta_y2) / 2``.

    The transport value ``(c(theta, y1) + c(theta, y2)) / 2`` and the optimal
    potential ``(c(theta, y1), c(theta, y2))`` do not depend on ``lam``.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    theta = np.asarray(theta, dtype=np.float64)
    y1, y2 = np.asarray(y1, float), np.asarray(y2, float)
    c1, c2 = float(cost.value(theta, y1)), float(cost.value(theta, y2))
    grad = 0.5 * (cost.grad_x(theta, y1) + cost.grad_x(theta, y2))
    return CounterexampleReference(0.5 * (c1 + c2), np.array([c1, c2]), grad)


def fd_gradient(f, x, h=1e-5):
    """Central-difference gradient of a scalar function of a flat vector."""
    x = np.array(x, dtype=np.float64).reshape(-1)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


@dataclass
class FDReport:
    """Outcome of :func:`fd_gradient_check`."""

    errors: np.ndarray
    tol: float
    name: str = "fd_check"
    fd: list = field(default_factory=list, repr=False)
    analytic: list = field(default_factory=list, repr=False)

    @property
    def passed(self):
        return bool(np.all(self.errors <= self.tol))

    @property
    def worst(self):
        return int(np.argmax(self.errors)) if self.errors.size else -1

    @property
    def max_error(self):
        return float(self.errors.max()) if self.errors.size else 0.0

    def lines(self):
        """Machine-readable ``key=value`` lines."""
        status = "pass" if self.passed else "fail"
        return [f"check={self.name} status={status} max_rel_err={self.max_error:.3e} "
                f"tol={self.tol:.1e} points={self.errors.size} worst={self.worst}"]

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{self.name}: {verdict}, {self.errors.size} points, worst "
                f"relative error {self.max_error:.3e} at point {self.worst} "
                f"(tol {self.tol:.1e})")


def fd_gradient_check(f, grad, points, h=1e-5, tol=1e-6, name="fd_check"):
    """Compare ``grad`` with central differences of ``f`` at each point.

    ``f`` must be a deterministic function of its argument; when it averages
    over random draws, freeze the draws in the closure (common random
    numbers) so that the ``+h`` and ``-h`` evaluations see the same sample.

    The error at a point is ``|fd - grad| / max(|fd|, |grad|)`` (0 when both
    vanish).
    """
    errs, fds, gs = [], [], []
    for p in points:
        fd = fd_gradient(f, p, h)
        g = np.asarray(grad(np.asarray(p, float)), dtype=np.float64).reshape(-1)
        scale = max(np.linalg.norm(fd), np.linalg.norm(g))
        errs.append(0.0 if scale == 0 else np.linalg.norm(fd - g) / scale)
        fds.append(fd)
        gs.append(g)
    return FDReport(np.array(errs), tol, name, fds, gs)
