#!/usr/bin/env python3
"""Relative-error grid of the concentrated and corrected schemes over naive.

Reproduces the qualitative benchmark table at desk scale: for each (theta, nu)
cell it simulates all three schemes, then prints 1 - M_family / M_naive as a
matrix per family.  Positive entries mean the family beats measuring every
mode directly.
"""

import argparse

from beamest.experiments import table1_grid, table_rows, write_csv


def _print_matrix(rows, family, thetas, nus):
    cell = {(r.theta, r.nu): r for r in rows if r.family == family}
    print(f"\n{family}: rel_err (se)")
    print("theta\\nu " + "".join(f"{v:>16g}" for v in nus))
    for t in thetas:
        line = f"{t:>8g} "
        for v in nus:
            r = cell[(t, v)]
            line += f"{r.rel_err:>8.4f} ({r.se:.4f})"
        print(line)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--epsilon", type=float, default=1e-4)
    ap.add_argument("--theta", type=float, nargs="+", default=[0.0, 2.0, 4.0, 6.0, 8.0, 10.0])
    ap.add_argument("--nu", type=float, nargs="+", default=[0.0, 2.0, 4.0, 6.0, 8.0, 10.0])
    ap.add_argument("--m0", type=int, default=None, help="stopping depth; default m/2")
    ap.add_argument("--replicates", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--output", default=None, help="optional CSV destination")
    args = ap.parse_args()

    policy = "half" if args.m0 is None else "explicit"
    table = table1_grid(
        [args.n], args.theta, args.nu, args.epsilon,
        m0_policy=policy, replicates=args.replicates, seed=args.seed, m0=args.m0,
    )
    for family in ("hayashi", "corrected"):
        _print_matrix(table.rows, family, args.theta, args.nu)

    if args.output:
        fields = ["n", "theta", "eta", "nu", "epsilon", "m0", "family", "rel_err", "se"]
        write_csv(args.output, fields, table_rows(table))
        print(f"\nwrote {args.output}")


if __name__ == "__main__":
    main()
