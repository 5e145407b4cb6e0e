"""Hajek and Horvitz-Thompson estimates with true and learned propensities
on one large sample per scenario, next to the analytic ATE."""

import argparse

from bnps.estimators import bnps_pipeline, hajek_ate, horvitz_thompson_ate
from bnps.groundtruth import SCENARIOS, generate_dataset, true_ate, true_propensity
from bnps.montecarlo import COVARIATES


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    print(f"{'id':>4} {'true':>8} {'hajek':>8} {'ht':>8} {'bnps':>8}")
    for sid, s in SCENARIOS.items():
        d = generate_dataset(s, args.n, args.seed).data
        y, t, e = d.column("Y"), d.column("T"), true_propensity(d.codes)
        bn = bnps_pipeline(d, COVARIATES, "T", "Y").estimate.ate
        print(f"{sid:>4} {true_ate(s):8.4f} {hajek_ate(y, t, e).ate:8.4f} "
              f"{horvitz_thompson_ate(y, t, e).ate:8.4f} {bn:8.4f}")


if __name__ == "__main__":
    main()
