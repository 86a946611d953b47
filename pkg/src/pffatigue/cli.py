"""Command line entry point.

Usage: simulate <config-path> [--output-dir D] [--scheme bfgs|newton|staggered]
       [--increments-per-cycle N] [--quiet]

Exit codes: 0 completed run (failure reached or cycles exhausted),
1 configuration error, 2 solver abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import ConfigError, parse_config
from .driver import run
from .mesh import MeshFormatError
from .solver import SolverAbort


def build_parser():
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Phase-field fatigue crack growth simulation (plane strain).")
    p.add_argument("config", help="path to the simulation config file")
    p.add_argument("--output-dir", default=None, help="directory for results")
    p.add_argument("--scheme", choices=("bfgs", "newton", "staggered"),
                   default=None, help="override the solver scheme")
    p.add_argument("--increments-per-cycle", type=int, default=None,
                   help="override the load program resolution")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.scheme is not None:
            cfg = dataclasses.replace(
                cfg, solver=dataclasses.replace(cfg.solver, scheme=args.scheme))
        if args.increments_per_cycle is not None:
            cfg = dataclasses.replace(
                cfg, load=dataclasses.replace(
                    cfg.load, increments_per_cycle=args.increments_per_cycle))
        if not args.quiet:
            print(f"running {args.config} [{cfg.solver.scheme}, "
                  f"{cfg.load.increments_per_cycle} increments/cycle]")
        metrics, artifacts = run(cfg, output_dir=args.output_dir, quiet=args.quiet)
    except (ConfigError, MeshFormatError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SolverAbort as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return 2
    if metrics.aborted:
        print(f"solver abort: {artifacts['summary']['abort_reason']}", file=sys.stderr)
        return 2
    if not args.quiet:
        outcome = (f"failed after {metrics.cycles_to_failure:g} cycles "
                   f"(N_f = {metrics.n_f})" if metrics.failed
                   else "completed without failure")
        print(f"{outcome}; results in {artifacts['output_dir']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
