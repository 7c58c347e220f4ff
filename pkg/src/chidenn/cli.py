"""Command line front end.

::

    chidenn run <config.yaml | bundled-name> [--output DIR] [--steps N]
    chidenn verify [--level fast|full]
    chidenn convergence <bar1d|plate2d> --refinements 4 8 16 --modes fem chidenn

Exit status: 0 success, 1 validation error (bad configuration, mesh or
arguments), 2 numerical failure (blow-up, non-convergence, inverted
elements, failed checks).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .assembly import NegativeLumpedMass
from .dynamics import LoadError, NoConvergence, NonFiniteState
from .interp import InterpolationError
from .material import MaterialError
from .mesh import MeshError

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2
NUMERICAL = (NonFiniteState, NoConvergence, MaterialError, NegativeLumpedMass, InterpolationError, FloatingPointError)


def _run(args) -> int:
    from .scenario import bundled_scenario, load_scenario, run_scenario

    path = Path(args.config)
    if not path.exists() and path.suffix == "" and "/" not in args.config:
        path = bundled_scenario(args.config)
    overrides = {}
    if args.output:
        overrides["output"] = {"directory": str(Path(args.output).resolve())}
    if args.steps is not None:
        overrides["solver"] = {"steps": args.steps}
    sc = load_scenario(path, overrides)
    result = run_scenario(sc)
    print(f"wrote {result.csv or 'no history'}; {len(result.snapshots)} VTK snapshot(s); record {result.record}")
    return EXIT_OK


def _verify(args) -> int:
    from .verification import verify_suite

    t0 = time.perf_counter()
    checks = verify_suite(args.level, log=print)
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed in {time.perf_counter() - t0:.1f} s")
    return EXIT_OK if not failed else EXIT_NUMERICAL


def _convergence(args) -> int:
    from .convergence import convergence_study

    result = convergence_study(args.problem, args.refinements, args.modes)
    print(result.table())
    return EXIT_OK if all(r.error is not None for r in result.rows) else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chidenn", description="Convolution-enriched finite element dynamics.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file or a bundled scenario (notch_ramp, free_flight)")
    run.add_argument("config")
    run.add_argument("--output", help="output directory (overrides the scenario)")
    run.add_argument("--steps", type=int, help="number of time steps (overrides the scenario)")
    run.set_defaults(func=_run)
    ver = sub.add_parser("verify", help="run the built-in property suites")
    ver.add_argument("--level", choices=["fast", "full"], default="fast")
    ver.set_defaults(func=_verify)
    conv = sub.add_parser("convergence", help="manufactured-solution convergence study")
    conv.add_argument("problem", choices=["bar1d", "plate2d"])
    conv.add_argument("--refinements", type=int, nargs="+", required=True, help="elements per direction, ascending")
    conv.add_argument("--modes", nargs="+", choices=["fem", "chidenn"], default=["fem", "chidenn"])
    conv.set_defaults(func=_convergence)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except NUMERICAL as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (MeshError, LoadError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
