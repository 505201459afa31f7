"""Command-line entry point.

`dfnvem run` drives an adaptive simulation and writes runlog.csv (plus
optional per-step VTK) into the output directory. Exit code 0 means the
estimated relative error dropped below the threshold, 2 means the iteration
budget ran out, 1 means any error.
"""

from __future__ import annotations

import argparse
import sys

from .adapt import STRATEGIES, RefinementConfig
from .driver import RunConfig, fit_rate, run_adaptive
from .errors import DfnVemError, InsufficientData


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dfnvem")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="adaptive solve on a fracture network")
    r.add_argument(
        "--problem",
        default="problem1",
        help="problem1 | problem2 | file:<path> | synthetic:<seed>",
    )
    r.add_argument("--order", type=int, default=1, help="VEM order k in 1..4")
    r.add_argument("--strategy", choices=STRATEGIES, default="maxmom")
    r.add_argument("--c", type=float, default=0.5, help="marking fraction")
    r.add_argument("--collapse-toll", type=float, default=0.2)
    r.add_argument("--max-ar", type=float, default=10.0)
    r.add_argument("--max-np", type=int, default=12)
    r.add_argument("--tol", type=float, default=0.05, help="relative error threshold")
    r.add_argument("--max-iter", type=int, default=60)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--vtk", action="store_true", help="write one VTK file per step")
    r.add_argument(
        "--no-timing",
        action="store_true",
        help="leave the wall_ms column blank for bit-reproducible CSVs",
    )
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            problem=args.problem,
            order=args.order,
            refinement=RefinementConfig(
                strategy=args.strategy,
                c=args.c,
                collapse_toll=args.collapse_toll,
                max_ar=args.max_ar,
                max_np=args.max_np,
            ),
            tol=args.tol,
            max_iter=args.max_iter,
            out=args.out,
            vtk=args.vtk,
            timing=not args.no_timing,
        )
        log = run_adaptive(cfg)
    except DfnVemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    last = log.steps[-1]
    print(
        f"{log.status}: {len(log.steps)} steps, ncell={last.ncell} "
        f"ndof={last.ndof} est={last.est:.6e} rel={log.rel_est:.4f}"
    )
    for q in ("est", "err"):
        try:
            print(f"rate({q}) = {fit_rate(log, quantity=q):+.3f}")
        except InsufficientData:
            pass
    return log.exit_code


if __name__ == "__main__":
    sys.exit(main())
