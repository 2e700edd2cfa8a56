r"""Semi-discrete (entropic) semi-dual of optimal transport to a discrete target.

For a target :math:`\nu = \sum_i w_i \delta_{y_i}` and a potential
:math:`\psi \in \mathbb{R}^n` the entropic transform is the soft-min

.. math::
    \psi^{c,\lambda}(x) = -\lambda \log \sum_i w_i
        \exp\left(\frac{\psi_i - c(x, y_i)}{\lambda}\right)

and the semi-dual objective over a batch of generated points is

.. math::
    F(\psi) = \frac{1}{K}\sum_k \psi^{c,\lambda}(x_k) + \sum_i w_i \psi_i .

``lam == 0`` selects the hard c-transform :math:`\min_i c(x, y_i) - \psi_i`.

Every function accepts a single point ``x`` of shape ``(d,)`` or a batch of
shape ``(K, d)`` and returns results with the matching leading shape.
"""

import numpy as np

from .errors import DimensionError

__all__ = [
    "logsumexp",
    "c_transform",
    "c_lambda_transform",
    "eta_weights",
    "grad_psi_c_lambda",
    "semidual_objective",
    "psi_ascent_direction",
]


def logsumexp(a, axis=-1):
    """Max-shifted ``log(sum(exp(a)))`` along ``axis``.

    Entries equal to ``-inf`` contribute nothing; the result is ``-inf`` only
    when a whole slice is ``-inf``.
    """
    a = np.asarray(a, dtype=np.float64)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def _as_batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim != 2:
        raise DimensionError("points must have shape (d,) or (K, d)")
    return x, False


def _check_psi(psi, nu):
    psi = np.asarray(psi, dtype=np.float64).reshape(-1)
    if psi.shape[0] != nu.n:
        raise DimensionError(
            f"potential has {psi.shape[0]} entries, measure has {nu.n} atoms")
    return psi


def _require_positive(lam):
    if not lam > 0:
        raise ValueError(
            f"lambda must be > 0 for the entropic transform (got {lam}); "
            "use c_transform for the unregularized case")


def _exponents(psi, X, nu, cost, lam):
    # (psi_i - c(x_k, y_i)) / lam + log w_i; zero-weight atoms get -inf
    C = cost.matrix(X, nu.support)
    return (psi[None, :] - C) / lam + nu.log_weights[None, :]


def c_transform(psi, x, nu, cost):
    """Hard c-transform and the smallest minimizing atom index.

    Returns
    -------
    value : float or ndarray, shape (K,)
        ``min_i c(x, y_i) - psi_i``.
    index : int or ndarray of int, shape (K,)
        First index attaining the minimum.
    """
    psi = _check_psi(psi, nu)
    X, single = _as_batch(x)
    gaps = cost.matrix(X, nu.support) - psi[None, :]
    idx = np.argmin(gaps, axis=1)
    val = gaps[np.arange(X.shape[0]), idx]
    if single:
        return float(val[0]), int(idx[0])
    return val, idx


def c_lambda_transform(psi, x, nu, cost, lam):
    """Entropic c,lambda-transform (soft-min weighted by ``nu.weights``)."""
    _require_positive(lam)
    psi = _check_psi(psi, nu)
    X, single = _as_batch(x)
    out = -lam * logsumexp(_exponents(psi, X, nu, cost, lam), axis=1)
    return float(out[0]) if single else out


def _softmax_rows(E):
    E = E - np.max(E, axis=1, keepdims=True)
    P = np.exp(E)
    return P / P.sum(axis=1, keepdims=True)


def eta_weights(psi, x, nu, cost, lam):
    """Soft assignment probabilities of ``x`` over the atoms of ``nu``.

    ``eta_i(x)`` is proportional to ``w_i exp((psi_i - c(x, y_i)) / lam)``.
    """
    _require_positive(lam)
    psi = _check_psi(psi, nu)
    X, single = _as_batch(x)
    H = _softmax_rows(_exponents(psi, X, nu, cost, lam))
    return H[0] if single else H


def grad_psi_c_lambda(psi, x, nu, cost, lam):
    """Gradient in ``x`` of the c,lambda-transform: ``sum_i eta_i grad_x c``."""
    X, single = _as_batch(x)
    H = eta_weights(psi, X, nu, cost, lam)
    G = cost.weighted_grad_x(X, nu.support, H)
    return G[0] if single else G


def semidual_objective(psi, generated, nu, cost, lam):
    """Monte-Carlo estimate of the semi-dual objective on a batch.

    Parameters
    ----------
    psi : array_like, shape (n,)
        Dual potential on the atoms of ``nu``.
    generated : array_like, shape (K, d)
        Generated points standing in for the source measure.
    nu : DiscreteMeasure
        Target measure.
    cost : Cost
        Ground cost.
    lam : float
        Regularization; ``0`` uses the hard c-transform.

    Returns
    -------
    float
    """
    psi = _check_psi(psi, nu)
    X, _ = _as_batch(generated)
    if X.shape[0] == 0:
        raise ValueError("generated batch must be non-empty")
    if lam == 0:
        vals, _ = c_transform(psi, X, nu, cost)
    else:
        vals = c_lambda_transform(psi, X, nu, cost, lam)
    return float(np.mean(vals) + nu.weights @ psi)


def psi_ascent_direction(psi, generated, nu, cost, lam):
    """Gradient of :func:`semidual_objective` in ``psi``: ``w - mean_k eta(x_k)``.

    The components always sum to zero, reflecting invariance of the objective
    under constant shifts of ``psi``.
    """
    X, _ = _as_batch(generated)
    H = eta_weights(psi, X, nu, cost, lam)
    return nu.weights - H.mean(axis=0)
