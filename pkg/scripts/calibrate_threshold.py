#!/usr/bin/env python3
"""Calibrate the balancing-threshold multiplier per filter.

Sweeps c_ada on the performance benchmark and reports, per value, the median
selected lambda and the resulting parameter and policy gaps.  The shipped
defaults in sblq.learner.FILTER_PRESETS are the stable points of this sweep:
small enough that the scan actually stops mid-grid, large enough that
early noise spikes near the grid floor never trip the rule.
"""
import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from sblq.data import split
from sblq.envs import EnvSpec, generate_trajectories, make_env
from sblq.learner import default_config, train
from sblq.policy import parameter_gap, policy_gap

DEFAULT_GRID = (1e-8, 3e-8, 5e-8, 1e-7, 3e-7, 5e-7, 1e-6, 3e-6, 1e-5)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/calibration")
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--n", type=int, default=1000)
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    worlds = []
    for seed in range(args.seeds):
        env = make_env(EnvSpec(), seed=seed)
        dataset, truth = generate_trajectories(env, args.n, seed=seed)
        train_set, eval_set = split(dataset, 0.5, seed)
        worlds.append((train_set, eval_set, truth))

    rows = []
    for kind in ("tikhonov", "gradient-descent", "cutoff"):
        for c_ada in DEFAULT_GRID:
            pgaps, ygaps, lams = [], [], []
            for train_set, eval_set, truth in worlds:
                cfg = default_config(kind, reward_bound=train_set.reward_bound,
                                     c_ada=c_ada)
                bundle, _ = train(train_set, kind, cfg)
                pgaps.append(parameter_gap(bundle.theta_matrix(), truth.theta_star[:-1]))
                ygaps.append(policy_gap(bundle, truth.theta_star, eval_set))
                lams.append(float(np.median([s.lambda_selected for s in bundle.stages])))
            rows.append((kind, c_ada, float(np.mean(lams)),
                         float(np.mean(pgaps)), float(np.max(pgaps)),
                         float(np.mean(ygaps))))
            print(f"{kind:17s} c_ada={c_ada:.0e} med_lambda={rows[-1][2]:.4f} "
                  f"pgap={rows[-1][3]:7.3f} (max {rows[-1][4]:7.3f}) ygap={rows[-1][5]:.4f}")

    with open(out / "calibration.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["filter", "c_ada", "median_lambda", "mean_parameter_gap",
                    "max_parameter_gap", "mean_policy_gap"])
        w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
