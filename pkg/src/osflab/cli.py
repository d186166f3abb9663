"""Command-line entry point.

Subcommands: run (experiments), filters (bank inspection), qstar
(conditioning search), eigs (eigenvalue scatter), lift (discretized
linearization), rollout (autoregressive continuation from a checkpoint).
Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import configio, harness, svgplot
from .baselines import OsfPredictor, autoregressive_rollout
from .errors import ConfigError, InvalidInputError, OsflabError
from .filters import filter_bank
from .lifting import build_eps_net, markov_lift, save_lift
from .numerics import eig_general, load_matrix
from .observer import SpectralConstraint, qstar_search
from .predictor import load_checkpoint
from .systems import load_trajectory


def _ensure_out(out):
    os.makedirs(out, exist_ok=True)
    return out


def cmd_run(args):
    flat = {}
    if args.config:
        flat.update(configio.parse_config_file(args.config))
    flat.update(configio.parse_overrides(args.set))
    recipe, kwargs = configio.to_experiment_kwargs(flat)
    if args.seed is not None:
        kwargs["seed0"] = args.seed
    if args.threads is not None:
        kwargs["threads"] = args.threads
    if recipe is None and "system" not in kwargs:
        raise ConfigError("config needs a recipe or a system kind")
    cfg = harness.make_config(recipe, **kwargs)
    out = _ensure_out(args.out)
    record = harness.run_experiment(cfg, keep_predictors=True)
    harness.write_losses_csv(os.path.join(out, "losses.csv"), record)
    harness.write_summary_json(os.path.join(out, "summary.json"), record)
    svgplot.emit_loss_svg(
        os.path.join(out, "loss_curves.svg"),
        {n: harness.mean_smoothed(record, n) for n in cfg.predictors},
        title=f"{cfg.name}: smoothed squared loss (mean over {cfg.seeds} seeds)",
    )
    with open(os.path.join(out, "config.txt"), "w") as fh:
        for key, val in sorted(flat.items()):
            if isinstance(val, tuple):
                val = ",".join(val)
            fh.write(f"{key} = {val}\n")
    for name in cfg.predictors:
        preds = record.predictors.get(name)
        if preds and isinstance(preds[0], OsfPredictor):
            preds[0].checkpoint(os.path.join(out, f"checkpoint_{name}_seed0.json"))
    print(f"wrote artifacts to {out}")
    return 0


def cmd_filters(args):
    bank = filter_bank(args.T, args.h)
    out = _ensure_out(args.out)
    path = os.path.join(out, "filters.csv")
    idx = np.arange(1, bank.h + 1)
    bound = 1e6 * np.exp(-idx / (2.0 * np.log(bank.T)))
    with open(path, "w") as fh:
        fh.write("index,sigma,sigma_quarter,bound\n")
        for i in range(bank.h):
            fh.write(
                f"{i + 1},{bank.sigma[i]:.12g},{bank.sigma[i] ** 0.25:.12g},"
                f"{bound[i]:.12g}\n"
            )
    print(path)
    return 0


def cmd_qstar(args):
    A = load_matrix(args.a).real
    C = load_matrix(args.c).real
    constraint = SpectralConstraint(rho=args.rho, gamma=args.gamma)
    result = qstar_search(A, C, constraint, trials=args.trials, seed=args.seed)
    out = _ensure_out(args.out)
    path = os.path.join(out, "qstar.json")
    if result.failed:
        payload = {"failed": True, "trials": result.n_feasible}
    else:
        payload = {
            "best_kappa": result.best.kappa,
            "gain_norm": result.best.gain_norm,
            "poles": [[z.real, z.imag] for z in result.best.eigenvalues],
            "trials": result.n_feasible,
        }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
    print(path)
    return 0 if not result.failed else 1


def cmd_eigs(args):
    A = load_matrix(args.matrix)
    eigs = eig_general(A.real if not np.iscomplexobj(A) else A)
    out = _ensure_out(args.out)
    csv_path = os.path.join(out, "eigenvalues.csv")
    with open(csv_path, "w") as fh:
        fh.write("re,im,abs\n")
        for z in eigs:
            fh.write(f"{z.real:.12g},{z.imag:.12g},{abs(z):.12g}\n")
    svgplot.emit_eigs_svg(
        os.path.join(out, "eigenvalues.svg"), eigs,
        title=os.path.basename(args.matrix),
    )
    print(csv_path)
    return 0


_LIFT_MAPS = {
    "rotation": lambda theta: (
        lambda x: np.array([
            np.cos(theta) * x[0] - np.sin(theta) * x[1],
            np.sin(theta) * x[0] + np.cos(theta) * x[1],
        ]),
        2,
    ),
    "contraction": lambda factor: (lambda x: factor * x, 1),
}


def cmd_lift(args):
    if args.map not in _LIFT_MAPS:
        raise ConfigError(f"unknown test map {args.map!r}; known: rotation, contraction")
    f, dim = _LIFT_MAPS[args.map](args.param)
    net = build_eps_net(args.radius, args.eps, dim)
    lift = markov_lift(f, lambda x: x, net)
    out = _ensure_out(args.out)
    prefix = os.path.join(out, f"lift_{args.map}")
    save_lift(prefix, lift)
    print(f"{prefix}.net.json ({net.size} states)")
    return 0


def cmd_rollout(args):
    params, cfg = load_checkpoint(args.checkpoint)
    traj = load_trajectory(args.context)
    predictor = OsfPredictor(cfg, optimizer={"kind": "cocob"})
    predictor.params = params
    preds, diverged = autoregressive_rollout(predictor, traj.y, args.steps)
    out = _ensure_out(args.out)
    path = os.path.join(out, "rollout.csv")
    with open(path, "w") as fh:
        fh.write(",".join(f"yhat_{i}" for i in range(preds.shape[1])) + "\n")
        for row in preds:
            fh.write(",".join(f"{v:.12g}" for v in row) + "\n")
    if diverged:
        print("warning: rollout flagged divergent (pinned at clip radius)")
    print(path)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="osflab",
        description="spectral filtering of dynamical systems: experiments and diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config or recipe")
    run.add_argument("--config", help="flat key = value config file")
    run.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a config key (repeatable)")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--threads", type=int,
                     default=int(os.environ.get("OSF_LAB_THREADS", "1")))
    run.set_defaults(func=cmd_run)

    filt = sub.add_parser("filters", help="emit filter-bank spectrum CSV")
    filt.add_argument("T", type=int)
    filt.add_argument("h", type=int)
    filt.add_argument("--out", default="out")
    filt.set_defaults(func=cmd_filters)

    q = sub.add_parser("qstar", help="search for a well-conditioned observer")
    q.add_argument("--a", required=True, help="matrix file for A")
    q.add_argument("--c", required=True, help="matrix file for C")
    q.add_argument("--rho", type=float, default=0.1)
    q.add_argument("--gamma", type=float, default=0.3)
    q.add_argument("--trials", type=int, default=200)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", default="out")
    q.set_defaults(func=cmd_qstar)

    e = sub.add_parser("eigs", help="eigenvalues of a matrix file plus scatter")
    e.add_argument("matrix")
    e.add_argument("--out", default="out")
    e.set_defaults(func=cmd_eigs)

    lf = sub.add_parser("lift", help="discretized linearization of a test map")
    lf.add_argument("--map", default="rotation")
    lf.add_argument("--param", type=float, default=0.1,
                    help="rotation angle or contraction factor")
    lf.add_argument("--radius", type=float, default=1.0)
    lf.add_argument("--eps", type=float, default=0.05)
    lf.add_argument("--out", default="out")
    lf.set_defaults(func=cmd_lift)

    ro = sub.add_parser("rollout", help="autoregressive continuation")
    ro.add_argument("--checkpoint", required=True)
    ro.add_argument("--context", required=True, help="trajectory CSV")
    ro.add_argument("--steps", type=int, default=100)
    ro.add_argument("--out", default="out")
    ro.set_defaults(func=cmd_rollout)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        loc = f" (line {exc.line})" if exc.line else ""
        print(f"config error{loc}: {exc}", file=sys.stderr)
        return 2
    except InvalidInputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except OsflabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
