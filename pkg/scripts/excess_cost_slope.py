"""Limit under a smoothed excess-cost constraint as the slope shrinks.

The small-slope target is ``(1 - delta) Phi(r/sqrt(V) - C' threshold / sqrt(V))``.
Writes CSV: slope, value, target, distance.
"""

import argparse
import csv
import sys

from mpc_bounds import ChannelSpec, asymptotic_limit
from mpc_bounds.verify import excess_cost_set, excess_cost_target


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--threshold", type=float, default=1.0)
    ap.add_argument("--r", type=float, default=0.0)
    ap.add_argument("--slopes", type=float, nargs="+", default=[1.0, 3e-1, 1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4])
    args = ap.parse_args(argv)
    ch = ChannelSpec(1.0, 1.0)
    target = excess_cost_target(args.delta, args.threshold, args.r, ch)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["slope", "value", "target", "distance"])
    for a in args.slopes:
        v = asymptotic_limit(ch, excess_cost_set(a, args.delta, args.threshold), args.r).value
        w.writerow([f"{a:.3g}", f"{v:.10g}", f"{target:.10g}", f"{abs(v - target):.3g}"])


if __name__ == "__main__":
    main()
