#!/usr/bin/env python3
"""Run the reproduction presets and print their band summaries.

Writes one JSON + CSV report pair per preset into --out-dir.  Exit status is
nonzero when any acceptance band fails.
"""

import argparse
import sys

from anisomp.experiments import REPRODUCIBLE_NAMES, reproduce


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--names", nargs="*", default=list(REPRODUCIBLE_NAMES))
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--trials", type=int, help="override per-cell trial count")
    parser.add_argument("--full", action="store_true", help="full-scale sizes (n = 2000, 10^3 table trials)")
    parser.add_argument("--out-dir", default="reports")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    failed = 0
    for name in args.names:
        print(f"== {name} ==")
        reports, bands = reproduce(
            name,
            seed=args.seed,
            full=args.full,
            trials=args.trials,
            out_dir=args.out_dir,
            workers=args.workers,
        )
        for band in bands:
            status = "PASS" if band.passed else "FAIL"
            failed += not band.passed
            print(f"  [{status}] {band.description}: {band.observed:.4g} (bound {band.bound})")
        for rep in reports:
            print(f"  wrote {rep.name}_{rep.master_seed}.json/.csv ({rep.wall_clock:.1f}s)")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
