#!/usr/bin/env python3
"""Sweep the two-mode crossover location over a (nu, epsilon) grid.

For each scale nu the script reports the location magnitude theta* where the
concentrated scheme's scale MSE meets the naive one at n = 2, together with
the large-nu asymptote sqrt(1 / (2 (1 - 2^(-2 eps)))) for reference.
"""

import argparse
import math

from beamest.experiments import crossover_curve, crossover_rows, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nu", type=float, nargs="+", default=[0.1, 1.0, 10.0, 100.0])
    ap.add_argument(
        "--epsilon", type=float, nargs="+",
        default=[0.02, 0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0],
    )
    ap.add_argument("--output", default=None, help="optional CSV destination")
    args = ap.parse_args()

    rows, findings = crossover_curve(args.nu, args.epsilon)

    print(f"{'nu':>8} {'epsilon':>8} {'theta*':>12} {'asymptote':>12} {'residual':>10}")
    for row in rows:
        asym = math.sqrt(1.0 / (2.0 * (1.0 - 2.0 ** (-2.0 * row.epsilon))))
        print(
            f"{row.nu:>8g} {row.epsilon:>8g} {row.theta_star:>12.6f} "
            f"{asym:>12.6f} {row.residual:>10.2e}"
        )
    for note in findings:
        print("finding:", note)

    if args.output:
        write_csv(args.output, ["nu", "epsilon", "theta_star", "residual"], crossover_rows(rows))
        print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
