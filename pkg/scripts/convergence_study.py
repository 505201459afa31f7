#!/usr/bin/env python3
"""Adaptive convergence study on the built-in benchmarks.

Runs every requested (problem, order, strategy) combination, writes one
runlog.csv per run under the output root, and prints the fitted est/err
rates. Results feed the plotting scripts in reports/.
"""

import argparse
import itertools
from pathlib import Path

from dfnvem.adapt import STRATEGIES, RefinementConfig
from dfnvem.driver import RunConfig, fit_rate, run_adaptive
from dfnvem.errors import InsufficientData


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--problems", nargs="+", default=["problem1", "problem2"])
    ap.add_argument("--orders", nargs="+", type=int, default=[1, 2, 3, 4])
    ap.add_argument("--strategies", nargs="+", default=list(STRATEGIES))
    ap.add_argument("--tol", type=float, default=0.05)
    ap.add_argument("--max-iter", type=int, default=40)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()

    for prob, k, strat in itertools.product(args.problems, args.orders, args.strategies):
        out = args.out / f"{prob}_k{k}_{strat}"
        cfg = RunConfig(
            problem=prob,
            order=k,
            refinement=RefinementConfig(strategy=strat),
            tol=args.tol,
            max_iter=args.max_iter,
            out=out,
            timing=False,
        )
        log = run_adaptive(cfg)
        last = log.steps[-1]
        rates = []
        for q in ("est", "err"):
            try:
                rates.append(f"alpha({q})={fit_rate(log, quantity=q):+.3f}")
            except InsufficientData:
                rates.append(f"alpha({q})=n/a")
        print(
            f"{prob} k={k} {strat:7s} {log.status:15s} steps={len(log.steps):3d} "
            f"ndof={last.ndof:7d} est={last.est:.3e} " + " ".join(rates)
        )


if __name__ == "__main__":
    main()
