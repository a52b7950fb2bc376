"""Command-line front end.

Subcommands: ``quarterloop``, ``star``, ``convergence``, ``wellposedness``
and ``identitycheck``.  Exit codes: 0 success, 2 solver failure, 3 bad
configuration.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .cartesian import CartesianRegimeError
from .harness import (
    ConfigError,
    ConvergenceAborted,
    SolverFailure,
    identity_sweep,
    load_config,
    run_convergence,
    run_quarterloop,
    run_star,
    run_wellposedness,
)
from .integrators import NewtonError
from .wellposedness import rect_grid

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 2, 3


def _common(p):
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--out", help="output directory")
    p.add_argument("--formulation", choices=["parabolic", "pdae", "cartesian"])
    p.add_argument("--m", type=float, help="energy ratio gamma_grain / gamma_exterior")
    p.add_argument("--alpha", type=float, help="tangential adjustment (parabolic only)")
    p.add_argument("--n", type=int, nargs="+", help="nodes per curve")
    p.add_argument("--ds", type=float, help="target node spacing when --n is absent")
    p.add_argument("--dt", type=float)
    p.add_argument("--tend", type=float)
    p.add_argument("--seed", type=int)


def build_parser():
    ap = argparse.ArgumentParser(prog="gbmotion", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quarterloop", help="bicrystal quarter-loop evolution")
    _common(p)
    p.add_argument("--scheme", choices=["implicit", "explicit"])
    p.add_argument("--snapshot-every", type=int)

    p = sub.add_parser("star", help="closed-curve evolution with area tracking")
    _common(p)
    p.add_argument("--shape", choices=["star", "circle"], default="star")
    p.add_argument("--law", choices=["sd", "mcf"])
    p.add_argument("--amplitude", type=float)
    p.add_argument("--scheme", choices=["implicit", "explicit"])
    p.add_argument("--snapshot-every", type=int)

    p = sub.add_parser("convergence", help="self-convergence study at tEnd")
    _common(p)
    p.add_argument("--levels", type=float, nargs="+", default=[0.2, 0.1, 0.05],
                   help="node spacings; dt = factor * ds^2")
    p.add_argument("--dt-factor", type=float, default=0.01)
    p.add_argument("--reference", choices=["successive", "finest"], default="successive")

    p = sub.add_parser("wellposedness", help="Laplace-domain determinant scan")
    _common(p)
    p.add_argument("--angles", type=float, nargs=2, metavar=("THETA12", "THETA13"))
    p.add_argument("--re", type=float, nargs=2, default=[0.1, 10.0])
    p.add_argument("--im", type=float, nargs=2, default=[-10.0, 10.0])
    p.add_argument("--grid", type=int, nargs=2, default=[25, 41], metavar=("NRE", "NIM"))

    p = sub.add_parser("identitycheck", help="fourth-derivative / kappa_ss identity on ellipses")
    _common(p)
    p.add_argument("--axes", type=float, nargs=2, default=[2.0, 1.0])
    return ap


def _config(args, **extra):
    over = {
        "formulation": args.formulation, "m": args.m, "alpha": args.alpha, "dt": args.dt,
        "tEnd": args.tend, "out": args.out, "seed": args.seed, "ds": args.ds,
        "N": tuple(args.n) if args.n else None,
    }
    over.update(extra)
    return load_config(args.config, **over)


def _run(args):
    cmd = args.command
    if cmd == "quarterloop":
        cfg = _config(args, scheme=args.scheme, snapshot_every=args.snapshot_every)
        res = run_quarterloop(cfg)
        print(json.dumps({"t": res.state.t, **res.monitors, "wall_time_s": res.wall_time}, sort_keys=True))
    elif cmd == "star":
        cfg = _config(args, initial=args.shape, law=args.law, amplitude=args.amplitude,
                      scheme=args.scheme, snapshot_every=args.snapshot_every)
        res = run_star(cfg)
        print(json.dumps({"t": res.state.t, **res.monitors, "wall_time_s": res.wall_time}, sort_keys=True))
    elif cmd == "convergence":
        cfg = _config(args)
        levels = [(ds, args.dt_factor * ds * ds) for ds in args.levels]
        rep = run_convergence(cfg, levels, args.reference)
        print(rep.table())
    elif cmd == "wellposedness":
        form = args.formulation or "parabolic"
        if args.angles is None and args.m is None:
            raise ConfigError("give --m or --angles")
        grid = rect_grid(tuple(args.re), tuple(args.im), *args.grid)
        rep = run_wellposedness(form, m=args.m, angles=args.angles, grid=grid, out=args.out)
        print(json.dumps(rep, indent=1, sort_keys=True))
    elif cmd == "identitycheck":
        Ns = tuple(args.n) if args.n else (64, 128, 256)
        rep = identity_sweep(Ns, *args.axes, seed=args.seed)
        if args.out:
            from pathlib import Path
            from .curve import atomic_write_text
            Path(args.out).mkdir(parents=True, exist_ok=True)
            atomic_write_text(Path(args.out) / "identity.json", json.dumps(rep, indent=1, sort_keys=True))
        print(json.dumps(rep, indent=1, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceAborted as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        print(exc.report.table(), file=sys.stderr)
        return EXIT_SOLVER
    except (SolverFailure, NewtonError, CartesianRegimeError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
