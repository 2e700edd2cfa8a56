"""Discrete measures, ground costs, latent samplers and dataset readers.

Points are plain 1-D float arrays and batches of points are 2-D arrays of
shape ``(count, dim)``.  Every object defined here is immutable once built.
"""

import csv
import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetError, DimensionError

__all__ = [
    "DiscreteMeasure",
    "Cost",
    "SquaredEuclidean",
    "PowerNorm",
    "make_cost",
    "cost_value",
    "cost_grad_x",
    "LatentSampler",
    "sample_latent",
    "load_dataset",
    "read_idx",
    "write_idx",
    "IDX_IMAGE_MAGIC",
    "IDX_LABEL_MAGIC",
]

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

# Above this many float entries the squared distance matrix is formed with the
# |x|^2 + |y|^2 - 2<x, y> expansion instead of explicit differences.
_DIRECT_DIFF_LIMIT = 1 << 22


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _check_same_dim(x, y):
    if x.shape[-1] != y.shape[-1]:
        raise DimensionError(
            f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure ``sum_i w_i delta_{y_i}``.

    Parameters
    ----------
    support : array_like, shape (n, d)
        Atom locations.
    weights : array_like, shape (n,), optional
        Nonnegative masses summing to one.  Uniform when omitted.
    """

    support: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        support = np.array(self.support, dtype=np.float64)
        if support.ndim == 1:
            support = support[:, None]
        if support.ndim != 2 or support.shape[0] < 1:
            raise DimensionError("support must be a non-empty (n, d) array")
        if not np.all(np.isfinite(support)):
            raise ValueError("support points must be finite")
        n = support.shape[0]
        if self.weights is None:
            weights = np.full(n, 1.0 / n)
        else:
            weights = np.array(self.weights, dtype=np.float64).reshape(-1)
            if weights.shape != (n,):
                raise DimensionError(
                    f"expected {n} weights, got {weights.shape[0]}")
            if np.any(weights < 0) or not np.all(np.isfinite(weights)):
                raise ValueError("weights must be finite and nonnegative")
            if abs(weights.sum() - 1.0) > 1e-12:
                raise ValueError(
                    f"weights must sum to 1 (got {weights.sum()!r})")
        object.__setattr__(self, "support", _frozen(support))
        object.__setattr__(self, "weights", _frozen(weights))

    @classmethod
    def uniform(cls, points):
        return cls(points)

    @property
    def n(self):
        return self.support.shape[0]

    @property
    def dim(self):
        return self.support.shape[1]

    @property
    def log_weights(self):
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    def mean(self):
        """Weighted barycenter of the atoms."""
        return self.weights @ self.support

    def __len__(self):
        return self.n


class Cost:
    """Ground cost ``c(x, y)`` with its gradient in the first argument.

    ``value`` and ``grad_x`` broadcast over leading axes; ``matrix`` and
    ``weighted_grad_x`` work on whole batches against the atoms of a measure.
    """

    name = "cost"

    def value(self, x, y):
        raise NotImplementedError

    def grad_x(self, x, y):
        raise NotImplementedError

    def matrix(self, X, Y):
        """Cost matrix ``C[k, i] = c(X[k], Y[i])``."""
        raise NotImplementedError

    def weighted_grad_x(self, X, Y, H):
        """Return ``sum_i H[k, i] * grad_x c(X[k], Y[i])`` for every ``k``."""
        raise NotImplementedError

    def lipschitz_x(self, diameter):
        """Bound on ``|grad_x c(x, y)|`` when ``|x - y| <= diameter``."""
        raise NotImplementedError

    def nonsmooth_at(self, x, y):
        """Mask of pairs where ``c(., y)`` is not differentiable at ``x``."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.zeros(x.shape[:-1], dtype=bool)

    def to_dict(self):
        return {"kind": self.name}


def _sq_dist_matrix(X, Y):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    _check_same_dim(X, Y)
    if X.shape[0] * Y.shape[0] * X.shape[1] <= _DIRECT_DIFF_LIMIT:
        diff = X[:, None, :] - Y[None, :, :]
        return np.einsum("kid,kid->ki", diff, diff)
    sq = (np.einsum("kd,kd->k", X, X)[:, None]
          + np.einsum("id,id->i", Y, Y)[None, :]
          - 2.0 * (X @ Y.T))
    return np.maximum(sq, 0.0)


class SquaredEuclidean(Cost):
    """``c(x, y) = |x - y|^2``."""

    name = "sqeuclidean"

    def value(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        _check_same_dim(x, y)
        d = x - y
        return np.sum(d * d, axis=-1)

    def grad_x(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        _check_same_dim(x, y)
        return 2.0 * (x - y)

    def matrix(self, X, Y):
        return _sq_dist_matrix(X, Y)

    def weighted_grad_x(self, X, Y, H):
        X = np.atleast_2d(np.asarray(X, float))
        return 2.0 * (H.sum(axis=1)[:, None] * X - H @ Y)

    def lipschitz_x(self, diameter):
        return 2.0 * diameter

    def __repr__(self):
        return "SquaredEuclidean()"


class PowerNorm(Cost):
    """``c(x, y) = |x - y|^p`` for ``p >= 1``.

    For ``p == 1`` the gradient at ``x == y`` is defined as zero and the pair
    is reported by :meth:`nonsmooth_at`.
    """

    name = "power"

    def __init__(self, p=1.0):
        if p < 1:
            raise ValueError(f"PowerNorm needs p >= 1, got {p}")
        self.p = float(p)

    def value(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        _check_same_dim(x, y)
        return np.linalg.norm(x - y, axis=-1) ** self.p

    def _radial_factor(self, r):
        # p * r^(p-2), set to 0 where r == 0 (the gradient vanishes or is
        # defined as 0 at the kink)
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = self.p * r[pos] ** (self.p - 2.0)
        return out

    def grad_x(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        _check_same_dim(x, y)
        d = x - y
        r = np.linalg.norm(d, axis=-1)
        return self._radial_factor(np.asarray(r))[..., None] * d

    def matrix(self, X, Y):
        return np.sqrt(_sq_dist_matrix(X, Y)) ** self.p

    def weighted_grad_x(self, X, Y, H):
        X = np.atleast_2d(np.asarray(X, float))
        A = H * self._radial_factor(np.sqrt(_sq_dist_matrix(X, Y)))
        return A.sum(axis=1)[:, None] * X - A @ Y

    def lipschitz_x(self, diameter):
        return self.p * diameter ** (self.p - 1.0)

    def nonsmooth_at(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if self.p > 1:
            return np.zeros(x.shape[:-1], dtype=bool)
        return np.all(x == y, axis=-1)

    def to_dict(self):
        return {"kind": self.name, "p": self.p}

    def __repr__(self):
        return f"PowerNorm(p={self.p:g})"


def make_cost(kind="sqeuclidean", p=None):
    if kind in ("sqeuclidean", "squared_euclidean"):
        return SquaredEuclidean()
    if kind == "power":
        return PowerNorm(1.0 if p is None else p)
    raise ValueError(f"unknown cost kind {kind!r}")


def cost_value(c, x, y):
    return float(c.value(np.asarray(x, float), np.asarray(y, float)))


def cost_grad_x(c, x, y):
    return c.grad_x(np.asarray(x, float), np.asarray(y, float))


@dataclass(frozen=True, eq=False)
class LatentSampler:
    """Seeded latent distribution.

    Batches are drawn from an independent stream per ``stream_key``, so the
    same ``(seed, stream_key)`` pair always yields the same batch no matter
    what was sampled before.

    kind is one of ``"dirac"``, ``"gaussian"``, ``"uniform"`` or
    ``"empirical"`` (uniform resampling of a fixed point set).
    """

    kind: str
    dim: int
    seed: int = 0
    params: dict = field(default_factory=dict)

    @classmethod
    def dirac(cls, point, seed=0):
        point = np.atleast_1d(np.asarray(point, float))
        return cls("dirac", point.size, seed, {"point": _frozen(point)})

    @classmethod
    def gaussian(cls, dim, mean=0.0, std=1.0, seed=0):
        mean = np.broadcast_to(np.asarray(mean, float), (dim,))
        std = np.broadcast_to(np.asarray(std, float), (dim,))
        return cls("gaussian", dim, seed,
                   {"mean": _frozen(mean), "std": _frozen(std)})

    @classmethod
    def uniform(cls, dim, low=0.0, high=1.0, seed=0):
        low = np.broadcast_to(np.asarray(low, float), (dim,))
        high = np.broadcast_to(np.asarray(high, float), (dim,))
        return cls("uniform", dim, seed,
                   {"low": _frozen(low), "high": _frozen(high)})

    @classmethod
    def empirical(cls, points, seed=0):
        points = np.atleast_2d(np.asarray(points, float))
        return cls("empirical", points.shape[1], seed,
                   {"points": _frozen(points)})

    @property
    def is_deterministic(self):
        return self.kind == "dirac"

    def rng(self, stream_key):
        return np.random.default_rng(
            np.random.SeedSequence([int(self.seed), int(stream_key)]))

    def sample(self, count, stream_key=0):
        if count < 1:
            raise ValueError("count must be >= 1")
        p = self.params
        if self.kind == "dirac":
            return np.tile(p["point"], (count, 1))
        rng = self.rng(stream_key)
        if self.kind == "gaussian":
            return p["mean"] + p["std"] * rng.standard_normal((count, self.dim))
        if self.kind == "uniform":
            return rng.uniform(p["low"], p["high"], size=(count, self.dim))
        if self.kind == "empirical":
            pts = p["points"]
            return pts[rng.integers(0, pts.shape[0], size=count)]
        raise ValueError(f"unknown latent kind {self.kind!r}")

    def with_seed(self, seed):
        return LatentSampler(self.kind, self.dim, int(seed), self.params)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "seed": self.seed,
                "params": {k: v.tolist() for k, v in self.params.items()}}

    @classmethod
    def from_dict(cls, d):
        params = {k: _frozen(v) for k, v in d["params"].items()}
        return cls(d["kind"], int(d["dim"]), int(d["seed"]), params)


def sample_latent(s, count, stream_key):
    return s.sample(count, stream_key)


# -- datasets ---------------------------------------------------------------

def _read_csv_points(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise DatasetError(
                    f"{path}: line {lineno}: non-numeric cell {bad!r}",
                    offset=lineno) from None
            if rows and len(values) != len(rows[0]):
                raise DatasetError(
                    f"{path}: line {lineno}: expected {len(rows[0])} fields, "
                    f"got {len(values)}", offset=lineno)
            rows.append(values)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    pts = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(pts)):
        lineno = int(np.flatnonzero(~np.all(np.isfinite(pts), axis=1))[0]) + 1
        raise DatasetError(f"{path}: non-finite value near data row {lineno}",
                           offset=lineno)
    return pts


def _is_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def read_idx(path):
    """Read an unsigned-byte IDX tensor (MNIST images or labels).

    Gzip-compressed files (the usual distribution format) are detected by
    their magic bytes and decompressed first; byte offsets in errors then
    refer to the decompressed stream.
    """
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    if len(data) < 4:
        raise DatasetError(f"{path}: truncated header at byte {len(data)}",
                           offset=len(data))
    (magic,) = struct.unpack(">I", data[:4])
    if magic not in (IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC):
        raise DatasetError(f"{path}: bad magic 0x{magic:08x} at byte 0",
                           offset=0)
    ndim = magic & 0xFF
    header_end = 4 + 4 * ndim
    if len(data) < header_end:
        raise DatasetError(
            f"{path}: truncated header, need {header_end} bytes, "
            f"have {len(data)}", offset=len(data))
    dims = struct.unpack(f">{ndim}I", data[4:header_end])
    expected = header_end + int(np.prod(dims, dtype=np.int64))
    if len(data) < expected:
        raise DatasetError(
            f"{path}: truncated payload, expected {expected} bytes, "
            f"file ends at byte {len(data)}", offset=len(data))
    if len(data) > expected:
        raise DatasetError(
            f"{path}: trailing data after byte {expected}", offset=expected)
    return np.frombuffer(data, dtype=np.uint8, offset=header_end).reshape(dims)


def write_idx(path, array):
    """Write a uint8 array of rank 1 (labels) or 3 (images) as IDX."""
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise TypeError("IDX writer only supports uint8 payloads")
    magic = {1: IDX_LABEL_MAGIC, 3: IDX_IMAGE_MAGIC}.get(array.ndim)
    if magic is None:
        raise DimensionError("IDX arrays must have rank 1 or 3")
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        f.write(struct.pack(f">{array.ndim}I", *array.shape))
        f.write(np.ascontiguousarray(array).tobytes())


def load_dataset(path, format="csv"):
    """Load a dataset as a uniform :class:`DiscreteMeasure`.

    CSV files hold one point per line with comma-separated decimals and no
    header.  IDX images are flattened row-major and scaled to ``[0, 1]``.
    """
    if format == "csv":
        return DiscreteMeasure(_read_csv_points(path))
    if format == "idx":
        raw = read_idx(path)
        pts = raw.reshape(raw.shape[0], -1).astype(np.float64) / 255.0
        return DiscreteMeasure(pts)
    raise ValueError(f"unknown dataset format {format!r}")
