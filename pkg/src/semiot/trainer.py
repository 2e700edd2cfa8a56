"""Alternating potential ascent / generator descent on the entropic OT cost.

Each outer step ``k``:

1. estimates the potential ``psi^k`` at the current parameters, either by
   stochastic ascent (``psi_mode="sga"``) or, for a single generated atom,
   in closed form (``psi_mode="exact"``);
2. draws a fresh latent batch;
3. moves ``theta`` along the stochastic gradient
   ``(1/K) sum_k (d_theta g)^T grad psi^{c,lam}(g(theta, z_k))``.

All randomness comes from keyed latent streams, so a run is a pure function
of its configuration and a checkpoint only needs the step counter to resume.
"""

import base64
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .dual_solver import (AscentConfig, closed_form_potential_single_atom,
                          marginal_violation, solve_dual_sga)
from .errors import CheckpointError, ConfigError, NumericalError
from .generators import AdamState, Translation, adam_step, generator_from_dict, sgd_step
from .measures import DiscreteMeasure, LatentSampler, make_cost
from .semidual import grad_psi_c_lambda, semidual_objective

__all__ = [
    "TrainConfig",
    "TrainState",
    "TrajectoryRecord",
    "TrainRun",
    "generator_gradient_estimate",
    "hard_subgradient_estimate",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "counterexample_problem",
    "run_counterexample",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_FORMAT = "semiot-checkpoint"
CHECKPOINT_VERSION = 1
THETA_COLUMNS_MAX_DIM = 16


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of a training run.

    ``lam = 0`` is accepted only with ``psi_mode="exact"``; it reproduces the
    unregularized dynamics of the two-atom example and is not meant for
    general training.  ``tie_break`` picks the subgradient on a Laguerre cell
    boundary in that mode: ``"smallest"`` always takes the first tied atom,
    ``"alternate"`` cycles through the tied atoms with the step counter.
    """

    lam: float = 0.1
    cost: str = "sqeuclidean"
    cost_p: float = 2.0
    batch_size: int = 100
    n_iter: int = 4000
    n_psi: int = 200
    lr: float = 1e-4
    optimizer: str = "adam"
    psi_mode: str = "sga"
    psi_schedule: str = "inverse_sqrt"
    psi_c0: float = 1.0
    psi_averaging: bool = True
    warm_start: bool = True
    tie_break: str = "alternate"
    seed: int = 0
    log_every: int = 10
    log_initial: bool = False
    checkpoint_every: int = 0
    record_timing: bool = True

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ConfigError(f"lam must be finite and >= 0, got {self.lam}")
        if self.lam == 0 and self.psi_mode != "exact":
            raise ConfigError("lam = 0 is only supported with psi_mode='exact'")
        if self.batch_size < 1 or self.n_iter < 0 or self.n_psi < 0:
            raise ConfigError("need batch_size >= 1, n_iter >= 0, n_psi >= 0")
        if self.lr < 0:
            raise ConfigError("lr must be >= 0")
        if self.log_every < 1:
            raise ConfigError("log_every must be >= 1")
        for name, allowed in (("optimizer", ("adam", "plain")),
                              ("psi_mode", ("sga", "exact")),
                              ("psi_schedule", ("constant", "inverse_sqrt")),
                              ("tie_break", ("smallest", "alternate")),
                              ("cost", ("sqeuclidean", "power"))):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def make_cost(self):
        return make_cost(self.cost, self.cost_p)

    def ascent(self):
        return AscentConfig(n_steps=self.n_psi, batch_size=self.batch_size,
                            schedule=self.psi_schedule, c0=self.psi_c0,
                            averaging=self.psi_averaging,
                            warm_start=self.warm_start)

    def stream_key(self, k, j):
        """Latent stream for inner step ``j`` (``j = n_psi`` is the theta batch)."""
        return k * (self.n_psi + 1) + j


@dataclass
class TrainState:
    theta: np.ndarray
    psi: np.ndarray
    adam: AdamState = None
    step: int = 0
    elapsed_ms: float = 0.0


@dataclass
class TrajectoryRecord:
    step: int
    objective: float
    marginal_violation: float
    theta: np.ndarray
    ms: float = None


@dataclass
class TrainRun:
    config: TrainConfig
    trajectory: list = field(default_factory=list)
    state: TrainState = None

    @property
    def theta(self):
        return self.state.theta

    @property
    def psi(self):
        return self.state.psi

    def thetas(self):
        return np.array([r.theta for r in self.trajectory])

    def csv_text(self):
        return trajectory_csv(self.trajectory)

    def write_csv(self, path):
        Path(path).write_text(self.csv_text(), encoding="utf-8")


def _fmt(x):
    return format(float(x), ".17g")


def trajectory_csv(records):
    """Render records as CSV: ``step,objective,marginal_violation,theta...,ms``.

    Parameters up to 16 entries are written one column each; larger vectors
    are summarized by a single ``theta_norm`` column.
    """
    dim = len(records[0].theta) if records else 0
    wide = dim <= THETA_COLUMNS_MAX_DIM
    theta_cols = ([f"theta_{i}" for i in range(dim)] if wide
                  else ["theta_norm"])
    lines = [",".join(["step", "objective", "marginal_violation",
                       *theta_cols, "ms"])]
    for r in records:
        th = r.theta if wide else [np.linalg.norm(r.theta)]
        ms = "" if r.ms is None else _fmt(r.ms)
        lines.append(",".join([str(r.step), _fmt(r.objective),
                               _fmt(r.marginal_violation),
                               *(_fmt(t) for t in th), ms]))
    return "\n".join(lines) + "\n"


def generator_gradient_estimate(gen, theta, psi, z_batch, nu, cost, lam):
    """Stochastic gradient of the entropic OT cost with respect to ``theta``.

    Averages ``(d_theta g(theta, z_k))^T grad psi^{c,lam}(x_k)`` over the
    batch, where ``x_k = g(theta, z_k)``.  With ``psi`` a maximizer of the
    semi-dual this is an unbiased estimate of the gradient of the cost.
    """
    if not lam > 0:
        raise ValueError("the gradient formula needs lam > 0")
    Z = np.atleast_2d(np.asarray(z_batch, dtype=np.float64))
    X = gen.forward(theta, Z)
    G = grad_psi_c_lambda(psi, X, nu, cost, lam)
    bad = ~np.all(np.isfinite(G), axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NumericalError(f"non-finite transform gradient at sample {i}",
                             index=i)
    return gen.vjp(theta, Z, G) / Z.shape[0]


def hard_subgradient_estimate(gen, theta, psi, z_batch, nu, cost,
                              tie_break="smallest", counter=0):
    """Backpropagated gradient of the hard c-transform objective.

    Each generated point is assigned to one atom minimizing
    ``c(x, y_i) - psi_i``; on exact ties the atom is chosen by ``tie_break``.
    This is one element of the subdifferential, which is not a gradient on
    Laguerre cell boundaries.
    """
    Z = np.atleast_2d(np.asarray(z_batch, dtype=np.float64))
    X = gen.forward(theta, Z)
    gaps = cost.matrix(X, nu.support) - np.asarray(psi)[None, :]
    sel = np.empty(X.shape[0], dtype=int)
    for k, row in enumerate(gaps):
        tied = np.flatnonzero(row == row.min())
        sel[k] = tied[0] if tie_break == "smallest" else tied[counter % len(tied)]
    G = cost.grad_x(X, nu.support[sel])
    return gen.vjp(theta, Z, G) / Z.shape[0]


def _potential_exact(gen, theta, sampler, nu, cost):
    if not sampler.is_deterministic:
        raise ConfigError("psi_mode='exact' needs a Dirac latent sampler")
    x = gen.forward(theta, sampler.params["point"])
    return closed_form_potential_single_atom(x, nu, cost)


def _diagnostics(cfg, psi, X, nu, cost):
    obj = semidual_objective(psi, X, nu, cost, cfg.lam)
    mv = (marginal_violation(psi, X, nu, cost, cfg.lam) if cfg.lam > 0
          else float("nan"))
    return obj, mv


def _outer_step(cfg, k, gen, theta, psi, sampler, nu, cost, ascent):
    """Potential update, generator gradient and diagnostics for step ``k``."""
    if cfg.psi_mode == "exact":
        psi = _potential_exact(gen, theta, sampler, nu, cost)
    else:
        start = psi if cfg.warm_start else np.zeros(nu.n)
        psi = solve_dual_sga(start, gen, theta, sampler, nu, cost, cfg.lam,
                             ascent, key_offset=cfg.stream_key(k, 0))
    Z = sampler.sample(cfg.batch_size, cfg.stream_key(k, cfg.n_psi))
    X = gen.forward(theta, Z)
    if cfg.lam > 0:
        grad = generator_gradient_estimate(gen, theta, psi, Z, nu, cost,
                                           cfg.lam)
    else:
        grad = hard_subgradient_estimate(gen, theta, psi, Z, nu, cost,
                                         cfg.tie_break, counter=k)
    obj, mv = _diagnostics(cfg, psi, X, nu, cost)
    return psi, grad, obj, mv


def train(cfg, nu, gen, sampler, theta0=None, state=None,
          checkpoint_dir=None):
    """Run outer steps up to ``cfg.n_iter``.

    Pass ``state`` (e.g. from :func:`load_checkpoint`) to resume; the
    continuation is identical to an uninterrupted run.  Records are logged
    every ``cfg.log_every`` steps and at the last step.

    Raises
    ------
    NumericalError
        If theta or psi become non-finite.  When ``checkpoint_dir`` is given
        the last finite state is written there first.
    """
    cost = cfg.make_cost()
    ascent = cfg.ascent()
    sampler = sampler.with_seed(cfg.seed) if sampler.seed != cfg.seed else sampler
    if state is None:
        theta = (gen.init_params(cfg.seed) if theta0 is None
                 else np.array(theta0, dtype=np.float64).reshape(-1))
        theta = gen._check_theta(theta).copy()
        adam = AdamState.zeros(theta.size, lr=cfg.lr) if cfg.optimizer == "adam" else None
        state = TrainState(theta, np.zeros(nu.n), adam, 0, 0.0)
    else:
        state = replace(state, theta=np.array(state.theta),
                        psi=np.array(state.psi))
        if state.adam is not None:
            state = replace(state, adam=replace(state.adam, lr=cfg.lr))
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    run = TrainRun(cfg, [], state)
    ckpt_meta = {"generator": gen.to_dict(), "latent": sampler.to_dict()}
    total_ms = state.elapsed_ms
    last_tick = time.perf_counter()

    def tick():
        nonlocal total_ms, last_tick
        now = time.perf_counter()
        total_ms += 1000.0 * (now - last_tick)
        last_tick = now
        return total_ms if cfg.record_timing else None

    if cfg.log_initial and state.step == 0:
        psi0 = (_potential_exact(gen, state.theta, sampler, nu, cost)
                if cfg.psi_mode == "exact" else state.psi)
        X = gen.forward(state.theta,
                        sampler.sample(cfg.batch_size, cfg.stream_key(0, cfg.n_psi)))
        obj, mv = _diagnostics(cfg, psi0, X, nu, cost)
        run.trajectory.append(
            TrajectoryRecord(0, obj, mv, state.theta.copy(), tick()))

    def abort(k, reason):
        if checkpoint_dir is not None:
            save_checkpoint(state, checkpoint_dir / f"abort_{k:06d}.json",
                            cfg, **ckpt_meta)
        raise NumericalError(f"{reason} at outer step {k}", step=k)

    theta, psi, adam = state.theta, state.psi, state.adam
    for k in range(state.step + 1, cfg.n_iter + 1):
        try:
            psi, grad, obj, mv = _outer_step(cfg, k, gen, theta, psi, sampler,
                                             nu, cost, ascent)
            if cfg.optimizer == "adam":
                new_theta, new_adam = adam_step(adam, theta, grad)
            else:
                new_theta, new_adam = sgd_step(theta, grad, cfg.lr), None
        except NumericalError as exc:
            abort(k, str(exc))
        if not (np.all(np.isfinite(new_theta)) and np.all(np.isfinite(psi))):
            abort(k, "non-finite parameters")
        theta, adam = new_theta, new_adam
        ms = tick()
        state = TrainState(theta, psi, adam, k, 0.0 if ms is None else ms)
        run.state = state

        if k % cfg.log_every == 0 or k == cfg.n_iter:
            run.trajectory.append(
                TrajectoryRecord(k, obj, mv, theta.copy(), ms))
        if (checkpoint_dir is not None and cfg.checkpoint_every
                and k % cfg.checkpoint_every == 0):
            save_checkpoint(state, checkpoint_dir / f"ckpt_{k:06d}.json",
                            cfg, **ckpt_meta)
    run.state = state
    return run


# -- checkpoints ------------------------------------------------------------

def _enc(a):
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape),
            "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _dec(d):
    raw = base64.b64decode(d["data"].encode("ascii"), validate=True)
    a = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return a.reshape(d["shape"])


def save_checkpoint(state, path, cfg, generator=None, latent=None):
    """Write a versioned JSON checkpoint; arrays are base64 float64 (bit-exact)."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "step": int(state.step),
        "elapsed_ms": float(state.elapsed_ms),
        "config": cfg.to_dict(),
        "seeds": {"seed": cfg.seed},
        "generator": generator,
        "latent": latent,
        "theta": _enc(state.theta),
        "psi": _enc(state.psi),
        "adam": None if state.adam is None else {
            "m": _enc(state.adam.m), "v": _enc(state.adam.v),
            "t": state.adam.t, "lr": state.adam.lr,
            "beta1": state.adam.beta1, "beta2": state.adam.beta2,
            "eps": state.adam.eps},
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc), encoding="utf-8")
    tmp.replace(path)


@dataclass
class Checkpoint:
    state: TrainState
    config: TrainConfig
    generator: object
    latent: LatentSampler


def load_checkpoint(path):
    """Read a checkpoint written by :func:`save_checkpoint`.

    Raises
    ------
    CheckpointError
        On unreadable JSON, a foreign format tag or a version mismatch.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a semiot checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {doc.get('version')!r} is not "
            f"supported (expected {CHECKPOINT_VERSION})")
    try:
        a = doc["adam"]
        adam = None if a is None else AdamState(
            _dec(a["m"]), _dec(a["v"]), int(a["t"]), a["lr"], a["beta1"],
            a["beta2"], a["eps"])
        state = TrainState(_dec(doc["theta"]), _dec(doc["psi"]), adam,
                           int(doc["step"]), float(doc["elapsed_ms"]))
        cfg = TrainConfig.from_dict(doc["config"])
        gen = None if doc["generator"] is None else generator_from_dict(doc["generator"])
        latent = None if doc["latent"] is None else LatentSampler.from_dict(doc["latent"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
    return Checkpoint(state, cfg, gen, latent)


# -- the two-atom example -----------------------------------------------------

def counterexample_problem(y1=(0.0, 0.0), y2=(0.0, 1.0)):
    """Target ``(delta_y1 + delta_y2) / 2``, translation generator, Dirac latent."""
    nu = DiscreteMeasure(np.array([y1, y2], dtype=np.float64))
    return nu, Translation(2), LatentSampler.dirac(np.zeros(2))


def run_counterexample(lam=0.1, tau=0.1, steps=500, theta0=(0.8, -0.6),
                       tie_break="alternate", y1=(0.0, 0.0), y2=(0.0, 1.0),
                       record_timing=False):
    """Plain gradient steps with the exact potential recomputed every step.

    The trajectory holds ``theta^0`` followed by every iterate.
    """
    nu, gen, sampler = counterexample_problem(y1, y2)
    cfg = TrainConfig(lam=lam, batch_size=1, n_iter=steps, n_psi=0, lr=tau,
                      optimizer="plain", psi_mode="exact", tie_break=tie_break,
                      log_every=1, log_initial=True,
                      record_timing=record_timing)
    return train(cfg, nu, gen, sampler, theta0=theta0)
