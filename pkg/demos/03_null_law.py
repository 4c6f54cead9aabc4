"""Compare the three calibrations of the null distribution.

The limiting law of each statistic is the supremum of a chi-square-type
process over the QTL position. This script samples it three ways:

  1. the closed-form representation (a chi-square pair plus a random angle),
  2. brute force on the underlying Gaussian process over a position grid,
  3. the analytic tail bound (upper tail only).

and prints tail probabilities side by side.

Run:  python3 demos/03_null_law.py
"""

import numpy as np

from bcqtl import sample_R, sample_Rstar
from bcqtl.asymptotics import davies_pvalue, oracle_sup_process

R = 0.0475813  # a 5 cM interval


def tail(table, u):
    return float(np.mean(table.samples >= u))


def main():
    print(f"null law at r = {R} (both statistics), 100k draws per sampler\n")
    rep_full = sample_R(R, 100_000, seed=0)
    rep_star = sample_Rstar(R, 100_000, seed=0)
    orc_full = oracle_sup_process(R, kind="full", n_samples=50_000, seed=1)
    orc_star = oracle_sup_process(R, kind="star", n_samples=50_000, seed=1)

    print("tail P(stat >= u)   representation   process sim   analytic bound")
    for kind, rep, orc in (("full", rep_full, orc_full), ("star", rep_star, orc_star)):
        for u in (2.0, 4.0, 6.0, 8.0, 10.0):
            bound = davies_pvalue(u, R, kind)
            print(
                f"  {kind:4} u={u:4.1f}        {tail(rep, u):11.4f}   "
                f"{tail(orc, u):11.4f}   {bound:11.4f}"
            )
        print()

    print("95% critical values:")
    print(
        f"  full: representation {rep_full.critical_value(0.05):.4f}, "
        f"process sim {orc_full.critical_value(0.05):.4f}"
    )
    print(
        f"  star: representation {rep_star.critical_value(0.05):.4f}, "
        f"process sim {orc_star.critical_value(0.05):.4f}"
    )
    print(
        "\nthe analytic bound overshoots the exact tail slightly, so tests"
        "\ncalibrated with it reject a little more often than the table ones"
    )


if __name__ == "__main__":
    main()
