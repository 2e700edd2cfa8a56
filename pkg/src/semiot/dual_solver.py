"""Kantorovich potential estimation for the semi-discrete entropic problem."""

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, NumericalError
from .semidual import psi_ascent_direction, semidual_objective

__all__ = [
    "AscentConfig",
    "FullBatchResult",
    "solve_dual_sga",
    "solve_dual_fullbatch",
    "closed_form_potential_single_atom",
    "marginal_violation",
    "center",
]


@dataclass(frozen=True)
class AscentConfig:
    """Settings for stochastic ascent on the potential.

    With ``averaging`` the returned potential is the running mean of the
    iterates from step ``int(average_from * n_steps)`` onward (all of them
    by default).
    """

    n_steps: int = 200
    batch_size: int = 100
    schedule: str = "inverse_sqrt"
    c0: float = 1.0
    averaging: bool = True
    average_from: float = 0.0
    warm_start: bool = True

    def __post_init__(self):
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.c0 > 0:
            raise ValueError("c0 must be > 0")
        if self.schedule not in ("constant", "inverse_sqrt"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if not 0 <= self.average_from < 1:
            raise ValueError("average_from must lie in [0, 1)")

    def step_size(self, j):
        if self.schedule == "constant":
            return self.c0
        return self.c0 / np.sqrt(j + 1.0)


def center(psi):
    """Remove the additive constant (gauge) from a potential."""
    psi = np.asarray(psi, dtype=np.float64)
    return psi - psi.mean()


def closed_form_potential_single_atom(x, nu, cost):
    """Exact potential ``psi_i = c(x, y_i)`` when the source is ``delta_x``.

    Valid for every ``lam >= 0``; it makes all transform exponents equal, so
    the soft assignment of ``x`` reproduces the target weights.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return cost.matrix(x[None, :], nu.support)[0]


def marginal_violation(psi, generated, nu, cost, lam):
    """l1 distance between target weights and mean soft assignment, in [0, 2]."""
    return float(np.abs(psi_ascent_direction(psi, generated, nu, cost, lam)).sum())


def solve_dual_sga(psi0, gen, theta, sampler, nu, cost, lam, cfg,
                   key_offset=0):
    """Stochastic gradient ascent on the semi-dual with fresh latent batches.

    Step ``j`` draws ``cfg.batch_size`` latents from ``sampler`` with stream
    key ``key_offset + j``, pushes them through ``gen`` at ``theta`` and moves
    ``psi`` along :func:`psi_ascent_direction`.

    Returns the averaged iterate when ``cfg.averaging`` is set, else the last.
    """
    if not lam > 0:
        raise ValueError("stochastic ascent needs lam > 0")
    psi = np.array(psi0, dtype=np.float64).reshape(-1)
    if cfg.n_steps == 0:
        return psi
    start = int(cfg.average_from * cfg.n_steps)
    avg = np.zeros_like(psi)
    n_avg = 0
    deterministic = sampler.is_deterministic
    X = None
    for j in range(cfg.n_steps):
        if X is None or not deterministic:
            Z = sampler.sample(cfg.batch_size, key_offset + j)
            X = gen.forward(theta, Z)
        psi = psi + cfg.step_size(j) * psi_ascent_direction(psi, X, nu, cost, lam)
        if not np.all(np.isfinite(psi)):
            raise NumericalError(f"non-finite potential at ascent step {j}",
                                 step=j)
        if cfg.averaging and j >= start:
            n_avg += 1
            avg += (psi - avg) / n_avg
    return avg if cfg.averaging else psi


@dataclass
class FullBatchResult:
    psi: np.ndarray
    converged: bool
    n_steps: int
    violation: float
    objective: float


def solve_dual_fullbatch(psi0, generated, nu, cost, lam, n_steps=100_000,
                         step=None, tol=1e-8, patience=100):
    """Deterministic gradient ascent on a frozen batch.

    Stops once :func:`marginal_violation` drops to ``tol``.  The default step
    ``2 * lam`` is the reciprocal of the curvature bound ``1 / (2 lam)``.

    Raises
    ------
    DivergenceError
        If the objective decreases for ``patience`` consecutive steps.
    """
    if not lam > 0:
        raise ValueError("full-batch ascent needs lam > 0")
    if step is None:
        step = 2.0 * lam
    X = np.atleast_2d(np.asarray(generated, dtype=np.float64))
    psi = np.array(psi0, dtype=np.float64).reshape(-1)
    obj = semidual_objective(psi, X, nu, cost, lam)
    decreasing = 0
    for it in range(n_steps + 1):
        direction = psi_ascent_direction(psi, X, nu, cost, lam)
        viol = float(np.abs(direction).sum())
        if viol <= tol:
            return FullBatchResult(psi, True, it, viol, obj)
        if it == n_steps:
            break
        psi = psi + step * direction
        if not np.all(np.isfinite(psi)):
            raise NumericalError(f"non-finite potential at ascent step {it}",
                                 step=it)
        new_obj = semidual_objective(psi, X, nu, cost, lam)
        decreasing = decreasing + 1 if new_obj < obj else 0
        if decreasing >= patience:
            raise DivergenceError(
                f"objective decreased {patience} consecutive steps "
                f"(step {it})", step=it)
        obj = new_obj
    return FullBatchResult(psi, False, n_steps, viol, obj)
