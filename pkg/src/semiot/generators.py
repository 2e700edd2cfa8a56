"""Parametric generators ``g(theta, z)`` with exact vector-Jacobian products.

Parameters are always one flat float64 vector.  ``forward`` maps a latent
batch ``Z`` of shape ``(K, d_z)`` to outputs ``(K, d_x)``; ``vjp`` returns
``sum_k (d g(theta, z_k) / d theta)^T v_k`` as a flat vector.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, NumericalError

__all__ = [
    "Generator",
    "Translation",
    "Affine",
    "MLP",
    "generator_from_dict",
    "AdamState",
    "adam_step",
    "sgd_step",
]


def _batch(z, dim):
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    Z = z[None, :] if single else z
    if Z.ndim != 2 or Z.shape[1] != dim:
        raise DimensionError(f"expected latent dimension {dim}, got {Z.shape}")
    return Z, single


class Generator:
    latent_dim: int
    output_dim: int
    smooth = True

    @property
    def n_params(self):
        raise NotImplementedError

    def forward(self, theta, z):
        raise NotImplementedError

    def vjp(self, theta, z, v):
        raise NotImplementedError

    def init_params(self, seed=0):
        raise NotImplementedError

    def _check_theta(self, theta):
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.shape[0] != self.n_params:
            raise DimensionError(
                f"expected {self.n_params} parameters, got {theta.shape[0]}")
        return theta

    def _check_v(self, v, n):
        V = np.atleast_2d(np.asarray(v, dtype=np.float64))
        if V.shape != (n, self.output_dim):
            raise DimensionError(
                f"cotangent shape {V.shape} != ({n}, {self.output_dim})")
        return V


class Translation(Generator):
    """``g(theta, z) = z + theta``.

    With a Dirac latent at the origin the generated measure is
    ``delta_theta``.
    """

    def __init__(self, dim):
        self.latent_dim = self.output_dim = int(dim)

    @property
    def n_params(self):
        return self.output_dim

    def forward(self, theta, z):
        theta = self._check_theta(theta)
        Z, single = _batch(z, self.latent_dim)
        X = Z + theta
        return X[0] if single else X

    def vjp(self, theta, z, v):
        self._check_theta(theta)
        Z, _ = _batch(z, self.latent_dim)
        return self._check_v(v, Z.shape[0]).sum(axis=0)

    def init_params(self, seed=0):
        return np.zeros(self.n_params)

    def to_dict(self):
        return {"kind": "translation", "dim": self.output_dim}

    def __repr__(self):
        return f"Translation(dim={self.output_dim})"


class Affine(Generator):
    """``g(theta, z) = A z + b`` with ``theta = [A.ravel(), b]``.

    ``Affine.constant(dim)`` builds the degenerate case ``A = 0`` used to
    study the large-regularization limit.
    """

    def __init__(self, latent_dim, output_dim):
        self.latent_dim = int(latent_dim)
        self.output_dim = int(output_dim)

    @property
    def n_params(self):
        return self.output_dim * (self.latent_dim + 1)

    def unpack(self, theta):
        theta = self._check_theta(theta)
        k = self.output_dim * self.latent_dim
        return theta[:k].reshape(self.output_dim, self.latent_dim), theta[k:]

    @staticmethod
    def pack(A, b):
        return np.concatenate([np.ravel(A), np.ravel(b)]).astype(np.float64)

    def forward(self, theta, z):
        A, b = self.unpack(theta)
        Z, single = _batch(z, self.latent_dim)
        X = Z @ A.T + b
        return X[0] if single else X

    def vjp(self, theta, z, v):
        self.unpack(theta)
        Z, _ = _batch(z, self.latent_dim)
        V = self._check_v(v, Z.shape[0])
        return self.pack(V.T @ Z, V.sum(axis=0))

    def init_params(self, seed=0):
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(max(self.latent_dim, 1))
        return rng.uniform(-bound, bound, self.n_params)

    def to_dict(self):
        return {"kind": "affine", "latent_dim": self.latent_dim,
                "output_dim": self.output_dim}

    def __repr__(self):
        return f"Affine({self.latent_dim} -> {self.output_dim})"


_ACTIVATIONS = {
    "tanh": (np.tanh, lambda a, h: 1.0 - h * h),
    # log(1 + e^a) computed without overflow
    "softplus": (lambda a: np.logaddexp(0.0, a),
                 lambda a, h: 0.5 * (1.0 + np.tanh(0.5 * a))),
    # subgradient 0 at exactly 0
    "relu": (lambda a: np.maximum(a, 0.0), lambda a, h: (a > 0).astype(float)),
}


class MLP(Generator):
    """Fully connected network with a linear output layer.

    Parameters
    ----------
    widths : sequence of int
        Layer sizes from latent to output, e.g. ``(2, 4, 2)``.
    activation : {"tanh", "softplus", "relu"}
        Hidden nonlinearity.  ``relu`` makes the map only Lipschitz, not C^1.
    """

    def __init__(self, widths, activation="tanh"):
        widths = tuple(int(w) for w in widths)
        if len(widths) < 2:
            raise ValueError("an MLP needs at least input and output widths")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.widths = widths
        self.activation = activation
        self.latent_dim = widths[0]
        self.output_dim = widths[-1]
        self.smooth = activation != "relu"
        self._shapes = list(zip(widths[1:], widths[:-1]))

    @property
    def n_params(self):
        return sum(o * i + o for o, i in self._shapes)

    def unpack(self, theta):
        theta = self._check_theta(theta)
        layers, pos = [], 0
        for o, i in self._shapes:
            W = theta[pos:pos + o * i].reshape(o, i)
            pos += o * i
            layers.append((W, theta[pos:pos + o]))
            pos += o
        return layers

    def _forward_trace(self, theta, Z):
        act, _ = _ACTIVATIONS[self.activation]
        layers = self.unpack(theta)
        inputs, pre = [], []
        h = Z
        for li, (W, b) in enumerate(layers):
            inputs.append(h)
            a = h @ W.T + b
            pre.append(a)
            h = a if li == len(layers) - 1 else act(a)
        return layers, inputs, pre, h

    def forward(self, theta, z):
        Z, single = _batch(z, self.latent_dim)
        X = self._forward_trace(theta, Z)[-1]
        return X[0] if single else X

    def vjp(self, theta, z, v):
        _, dact = _ACTIVATIONS[self.activation]
        Z, _ = _batch(z, self.latent_dim)
        V = self._check_v(v, Z.shape[0])
        layers, inputs, pre, _ = self._forward_trace(theta, Z)
        grads = []
        delta = V
        for li in range(len(layers) - 1, -1, -1):
            W, _ = layers[li]
            grads.append((delta.T @ inputs[li], delta.sum(axis=0)))
            if li > 0:
                back = delta @ W
                h = inputs[li]
                delta = back * dact(pre[li - 1], h)
        flat = []
        for gW, gb in reversed(grads):
            flat.append(gW.ravel())
            flat.append(gb)
        return np.concatenate(flat)

    def init_params(self, seed=0):
        rng = np.random.default_rng(seed)
        parts = []
        for o, i in self._shapes:
            bound = 1.0 / np.sqrt(i)
            parts.append(rng.uniform(-bound, bound, o * i))
            parts.append(rng.uniform(-bound, bound, o))
        return np.concatenate(parts)

    def weight_norm_product(self, theta):
        """Product of layer spectral norms, a Lipschitz bound in ``z``."""
        return float(np.prod([np.linalg.norm(W, 2)
                              for W, _ in self.unpack(theta)]))

    def to_dict(self):
        return {"kind": "mlp", "widths": list(self.widths),
                "activation": self.activation}

    def __repr__(self):
        return f"MLP(widths={self.widths}, activation={self.activation!r})"


def generator_from_dict(d):
    kind = d["kind"]
    if kind == "translation":
        return Translation(d["dim"])
    if kind == "affine":
        return Affine(d["latent_dim"], d["output_dim"])
    if kind == "mlp":
        return MLP(d["widths"], d.get("activation", "tanh"))
    raise ValueError(f"unknown generator kind {kind!r}")


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n, lr=1e-4, **kw):
        return cls(np.zeros(n), np.zeros(n), 0, lr, **kw)


def adam_step(state, theta, grad):
    """One bias-corrected Adam update.  Returns ``(new_theta, new_state)``."""
    grad = np.asarray(grad, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if grad.shape != theta.shape or grad.shape != state.m.shape:
        raise DimensionError("theta, grad and Adam moments must share a shape")
    if not np.all(np.isfinite(grad)):
        bad = int(np.flatnonzero(~np.isfinite(grad))[0])
        raise NumericalError(f"non-finite gradient entry {bad}", index=bad)
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * (grad * grad)
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_theta = theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_theta, replace(state, m=m, v=v, t=t)


def sgd_step(theta, grad, lr):
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        bad = int(np.flatnonzero(~np.isfinite(grad))[0])
        raise NumericalError(f"non-finite gradient entry {bad}", index=bad)
    return np.asarray(theta, dtype=np.float64) - lr * grad
