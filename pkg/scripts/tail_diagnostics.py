"""Tail diagnostics: shell log-ratio residuals and the two-atom tail mass.

Writes two CSV blocks separated by a blank line.
"""

import argparse
import csv
import sys

from mpc_bounds import bounds as bd
from mpc_bounds.verify import excess_cost_set, mean_variance_set, shell_log_ratio_residuals


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[50, 100, 200, 400, 800])
    args = ap.parse_args(argv)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n", "max_log_ratio_residual"])
    for n, res in zip(args.n, shell_log_ratio_residuals(args.n)):
        w.writerow([n, f"{res:.10g}"])
    sys.stdout.write("\n")
    w.writerow(["family", "n", "deviation", "sup_mass"])
    ns = [10**k for k in range(2, 13)]
    for name, cs in (("square_V1", mean_variance_set(1.0)), ("excess_a0.5", excess_cost_set(0.5))):
        rep = bd.tail_concentration_audit(cs, ns, vanish_tol=1.0)
        for n, u, m in zip(rep.n_list, rep.deviation, rep.sup_mass):
            w.writerow([name, int(n), f"{u:.8g}", f"{m:.8g}"])


if __name__ == "__main__":
    main()
