"""Command line entry point: ``semiot {counterexample,train,sample,validate}``.

Exit codes: 0 success, 1 failed validation, 2 usage or I/O error,
3 numerical abort.  ``SEMIOT_SEED`` overrides the configured seed; an
explicit ``--seed`` overrides both.
"""

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CheckpointError, ConfigError, DatasetError, NumericalError
from .generators import MLP, Affine, Translation
from .measures import DiscreteMeasure, LatentSampler, load_dataset
from .plotting import montage, trajectory_svg, write_pgm
from .trainer import (TrainConfig, load_checkpoint, run_counterexample,
                      save_checkpoint, train)
from .validation import SUITES, run_suite

log = logging.getLogger("semiot")

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
SAMPLE_STREAM = 1 << 40
THETA_STAR = np.array([0.0, 0.5])

MODEL_DEFAULTS = {
    "generator": "mlp",
    "hidden": [64],
    "activation": "tanh",
    "latent": "gaussian",
    "latent_dim": 2,
}


class UsageError(Exception):
    pass


def _resolve_seed(args_seed, config_seed=0):
    if args_seed is not None:
        return args_seed
    env = os.environ.get("SEMIOT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"SEMIOT_SEED must be an integer, got {env!r}")
    return config_seed


def _prepare_dir(path):
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".semiot_write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"output directory {path} is not writable: {exc}")
    return path


def _write_manifest(path, command, seed, config, extra=None):
    doc = {"command": command, "version": __version__, "seed": seed,
           "config": config}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def _parse_point(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("expected two coordinates, e.g. 0.8,-0.6")
    return np.array(vals)


def _short(v):
    # shortest round-trip text, without a trailing ".0"
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


def _default_theta0(seed):
    # a start point at distance 0.5 to 1 from the optimum, fixed by the seed
    rng = np.random.default_rng(seed)
    angle = rng.uniform(0.0, 2.0 * math.pi)
    radius = rng.uniform(0.5, 1.0)
    return THETA_STAR + radius * np.array([math.cos(angle), math.sin(angle)])


def cmd_counterexample(args):
    out = _prepare_dir(args.out_dir)
    seed = _resolve_seed(args.seed)
    theta0 = args.theta0 if args.theta0 is not None else _default_theta0(seed)
    runs = {}
    for tag, lam in (("unreg", 0.0), ("reg", args.lam)):
        run = run_counterexample(lam=lam, tau=args.tau, steps=args.steps,
                                 theta0=theta0, tie_break=args.tie_break)
        run.write_csv(out / f"traj_{tag}.csv")
        runs[tag] = run
    markers = [((0.0, 0.0), "y1", "#d62728"), ((0.0, 1.0), "y2", "#d62728"),
               (tuple(THETA_STAR), "theta*", "#2ca02c")]
    svg = trajectory_svg([
        {"title": "unregularized (lambda = 0)", "points": runs["unreg"].thetas(),
         "markers": markers},
        {"title": f"entropic (lambda = {args.lam:g})",
         "points": runs["reg"].thetas(), "markers": markers},
    ], title=f"theta trajectories, tau = {args.tau:g}")
    (out / "fig1.svg").write_text(svg, encoding="utf-8")
    _write_manifest(out / "manifest.json", "counterexample", seed, {
        "lambda": args.lam, "tau": args.tau, "steps": args.steps,
        "theta0": [float(v) for v in theta0], "tie_break": args.tie_break})
    for tag, run in runs.items():
        final = run.thetas()[-1]
        print(f"run={tag} final_theta={final[0]:.6g},{final[1]:.6g} "
              f"dist_to_opt={np.linalg.norm(final - THETA_STAR):.3e}")
    return EXIT_OK


def _load_train_config(path, seed_flag):
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}")
        if not isinstance(raw, dict):
            raise UsageError("config must be a JSON object")
    model = dict(MODEL_DEFAULTS)
    train_keys = {f.name for f in fields(TrainConfig)}
    unknown = sorted(set(raw) - train_keys - set(MODEL_DEFAULTS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    model.update({k: v for k, v in raw.items() if k in MODEL_DEFAULTS})
    train_part = {k: v for k, v in raw.items() if k in train_keys}
    train_part["seed"] = _resolve_seed(seed_flag, train_part.get("seed", 0))
    try:
        cfg = TrainConfig.from_dict(train_part)
    except (ConfigError, TypeError) as exc:
        raise UsageError(str(exc))
    return cfg, model


def _build_model(model, data_dim, seed):
    kind = model["generator"]
    dz = int(model["latent_dim"])
    if kind == "translation":
        gen, dz = Translation(data_dim), data_dim
    elif kind == "affine":
        gen = Affine(dz, data_dim)
    elif kind == "mlp":
        gen = MLP([dz, *model["hidden"], data_dim], model["activation"])
    else:
        raise UsageError(f"unknown generator {kind!r}")
    latent = model["latent"]
    if latent == "gaussian":
        sampler = LatentSampler.gaussian(dz, seed=seed)
    elif latent == "uniform":
        sampler = LatentSampler.uniform(dz, -1.0, 1.0, seed=seed)
    elif latent == "dirac":
        sampler = LatentSampler.dirac(np.zeros(dz), seed=seed)
    else:
        raise UsageError(f"unknown latent {latent!r}")
    return gen, sampler


def cmd_train(args):
    out = _prepare_dir(args.out_dir)
    cfg, model = _load_train_config(args.config, args.seed)
    fmt = args.format or ("idx" if not str(args.data).endswith(".csv") else "csv")
    try:
        nu = load_dataset(args.data, fmt)
    except (OSError, DatasetError) as exc:
        print(f"error: cannot load dataset: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.limit:
        nu = DiscreteMeasure(nu.support[:args.limit])
    gen, sampler = _build_model(model, nu.dim, cfg.seed)
    _write_manifest(out / "manifest.json", "train", cfg.seed, {
        **cfg.to_dict(), **model}, {"data": str(args.data), "format": fmt,
                                    "n_points": nu.n})
    try:
        run = train(cfg, nu, gen, sampler, checkpoint_dir=out)
    except NumericalError as exc:
        print(f"error: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    run.write_csv(out / "trajectory.csv")
    save_checkpoint(run.state, out / "checkpoint.json", cfg,
                    generator=gen.to_dict(), latent=sampler.to_dict())
    last = run.trajectory[-1] if run.trajectory else None
    if last is not None:
        print(f"steps={last.step} objective={last.objective:.6g} "
              f"marginal_violation={last.marginal_violation:.4g}")
    return EXIT_OK


def cmd_sample(args):
    try:
        ck = load_checkpoint(args.checkpoint)
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if ck.generator is None or ck.latent is None:
        print("error: checkpoint lacks generator or latent description",
              file=sys.stderr)
        return EXIT_USAGE
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    seed = _resolve_seed(args.seed, ck.latent.seed)
    gen, sampler = ck.generator, ck.latent.with_seed(seed)
    out = Path(args.out)
    _prepare_dir(out.parent if str(out.parent) else ".")
    if args.count:
        X = gen.forward(ck.state.theta, sampler.sample(args.count, SAMPLE_STREAM))
    else:
        X = np.zeros((0, gen.output_dim))
    lines = [",".join(f"x_{i}" for i in range(gen.output_dim))]
    lines += [",".join(_short(v) for v in row) for row in X]
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if gen.output_dim == 784 and args.count:
        side = 28
        write_pgm(out.with_suffix(".pgm"),
                  montage(X.reshape(-1, side, side)))
    _write_manifest(out.with_name(out.stem + ".manifest.json"), "sample", seed,
                    {"checkpoint": str(args.checkpoint), "count": args.count})
    return EXIT_OK


def cmd_validate(args):
    seed = _resolve_seed(args.seed)
    checks = run_suite(args.suite, seed)
    failed = [c for c in checks if not c.passed]
    for c in checks:
        print(c.line())
    print(f"summary suite={args.suite} checks={len(checks)} failed={len(failed)}")
    if failed:
        print("failed: " + ", ".join(c.name for c in failed), file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="semiot",
        description="Train generators with semi-discrete entropic optimal transport.")
    p.add_argument("--version", action="version", version=f"semiot {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    ce = sub.add_parser("counterexample",
                        help="two-atom example, unregularized vs entropic")
    ce.add_argument("--lambda", dest="lam", type=float, default=0.1)
    ce.add_argument("--tau", type=float, default=0.1)
    ce.add_argument("--steps", type=int, default=500)
    ce.add_argument("--theta0", type=_parse_point, default=None)
    ce.add_argument("--tie-break", choices=("alternate", "smallest"),
                    default="alternate")
    ce.add_argument("--seed", type=int, default=None)
    ce.add_argument("--out-dir", default=".")
    ce.set_defaults(func=cmd_counterexample)

    tr = sub.add_parser("train", help="train a generator on a dataset")
    tr.add_argument("--data", required=True)
    tr.add_argument("--format", choices=("csv", "idx"), default=None)
    tr.add_argument("--config", default=None)
    tr.add_argument("--limit", type=int, default=None,
                    help="use only the first N data points")
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--out-dir", default=".")
    tr.set_defaults(func=cmd_train)

    sa = sub.add_parser("sample", help="draw samples from a checkpoint")
    sa.add_argument("--checkpoint", required=True)
    sa.add_argument("--count", type=int, default=16)
    sa.add_argument("--out", required=True)
    sa.add_argument("--seed", type=int, default=None)
    sa.set_defaults(func=cmd_sample)

    va = sub.add_parser("validate", help="run oracle checks")
    va.add_argument("--suite", choices=(*SUITES, "all"), default="all")
    va.add_argument("--seed", type=int, default=None)
    va.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help / --version
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
