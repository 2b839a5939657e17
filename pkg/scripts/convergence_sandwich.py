"""Converse bound, Monte Carlo achievability and the limit as n grows.

Canonical channel (N = Gamma = 1) with a Square constraint. The shell
mixture is the optimal law of the limit at the same r. Writes CSV.
"""

import argparse
import csv
import math
import sys

from mpc_bounds import ChannelSpec, asymptotic_limit
from mpc_bounds import bounds as bd
from mpc_bounds.verify import mean_variance_set


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=float, default=0.0)
    ap.add_argument("--budget", type=float, default=1.0)
    ap.add_argument("--n", type=int, nargs="+", default=[400, 1600, 6400, 25600])
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=17)
    args = ap.parse_args(argv)

    ch, cs = ChannelSpec(1.0, 1.0), mean_variance_set(args.budget)
    lim = asymptotic_limit(ch, cs, args.r)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n", "limit", "converse", "r_prime", "theta_rule", "theta", "mc", "mc_std_error", "shifted_curve"])
    for i, n in enumerate(args.n):
        conv = bd.converse_lower_bound(bd.ConverseQuery(ch, cs, n, args.r))
        for rule in ("default", "auto"):
            q = bd.AchievabilityQuery(ch, cs, n, args.r, lim.distribution, rule, bd.MCConfig(args.samples, args.seed + i))
            est = bd.mc_achievability_epsilon(q)
            nt = n * q.theta_value
            curve = bd.analytic_achievability_curve(ch, q, nt) + math.exp(-nt)
            w.writerow(
                [n, f"{lim.value:.10g}", f"{conv.value:.10g}", f"{conv.details['r_prime']:.6g}", rule,
                 f"{q.theta_value:.6g}", f"{est.mean:.10g}", f"{est.std_error:.3g}", f"{curve:.10g}"]
            )
            sys.stdout.flush()


if __name__ == "__main__":
    main()
