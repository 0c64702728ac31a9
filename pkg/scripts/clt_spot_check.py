#!/usr/bin/env python3
"""Quick spot check of the resolvent CLT off the spectrum, at chosen scale.

Example:
    python scripts/clt_spot_check.py --n 300 --trials 400 --spike 0.5 --E 4.0
"""

import argparse

import numpy as np

from anisomp import EntryDistribution, ExperimentConfig, PopulationModel
from anisomp.experiments import run_clt_check


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=300)
    parser.add_argument("--aspect", type=float, default=0.5, help="d = n/N")
    parser.add_argument("--trials", type=int, default=400)
    parser.add_argument("--spike", type=float, default=0.5)
    parser.add_argument("--E", type=float, default=4.0)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--rademacher", action="store_true")
    args = parser.parse_args()

    n = args.n
    N = int(round(n / args.aspect))
    e1 = np.zeros(n)
    e1[0] = 1.0
    e2 = np.zeros(n)
    e2[1] = 1.0
    dist = EntryDistribution.rademacher() if args.rademacher else EntryDistribution.gaussian()
    cfg = ExperimentConfig(
        name="clt_spot_check",
        model=PopulationModel.spiked(n, (args.spike,)),
        distribution=dist,
        N=N,
        trial_count=args.trials,
        master_seed=args.seed,
        mode="outside",
        E=args.E,
        vectors=(("spike", e1), ("bulk", e2)),
    )
    rep = run_clt_check(cfg)
    for label in ("spike", "bulk"):
        st = rep.stats[label]
        pred = rep.predicted[label]["value"]
        print(
            f"{label}: mean {st['mean']:+.4f} (se {st['se_mean']:.4f})  "
            f"var {st['variance']:.5f} vs predicted {pred:.5f} "
            f"(ratio {st['variance'] / pred:.3f})  "
            f"KS p = {rep.normality[label]['p_value']:.3f}"
        )


if __name__ == "__main__":
    main()
