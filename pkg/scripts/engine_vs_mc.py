#!/usr/bin/env python3
"""Three-way check of the moment engine against plain and conditional MC.

Runs the concentrated scheme at one (m, epsilon, theta, eta, nu) point and
prints the exact engine moments next to the plain Monte Carlo estimates and
the Rao-Blackwellized ones (which integrate the measurement noise out and
average only over the splitter angles).  The last column shows how many
plain-MC replicates one conditional replicate is worth for each quantity.
"""

import argparse

from beamest.analytic import hayashi_engine_moments
from beamest.experiments import Scenario, rao_blackwell_mc, run_monte_carlo
from beamest.model import ModelParams
from beamest.network import NoiseSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--theta", type=float, default=1.0)
    ap.add_argument("--eta", type=float, default=0.0)
    ap.add_argument("--nu", type=float, default=1.0)
    ap.add_argument("--replicates", type=int, default=100_000)
    ap.add_argument("--rb-replicates", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    params = ModelParams(args.theta, args.eta, args.nu)
    n = 2**args.m
    noise = NoiseSpec(args.epsilon)
    engine = hayashi_engine_moments(args.m, args.epsilon, args.theta, args.eta, args.nu)
    mc = run_monte_carlo(
        Scenario(params, n, "tree", "hayashi", noise, None, args.replicates, args.seed)
    )
    rb = rao_blackwell_mc(
        Scenario(params, n, "tree", "hayashi", noise, None, args.rb_replicates, args.seed + 1)
    )

    print(f"n={n} eps={args.epsilon} theta={args.theta} eta={args.eta} nu={args.nu}")
    print(f"plain MC: {mc.replicates} replicates, {mc.wall_clock:.2f}s;"
          f" conditional: {rb.replicates}, {rb.wall_clock:.2f}s")
    print(f"{'quantity':>10} {'engine':>12} {'plain MC':>12} {'(se)':>10} "
          f"{'conditional':>12} {'(se)':>10} {'worth':>8}")
    rows = (
        ("E(theta)", engine.e_theta, mc.theta.mean, mc.theta.se_mean, rb.theta.mean, rb.theta.se_mean),
        ("V(theta)", engine.v_theta, mc.theta.var, mc.theta.se_var, rb.theta.var, rb.theta.se_var),
        ("E(nu)", engine.e_nu, mc.nu.mean, mc.nu.se_mean, rb.nu.mean, rb.nu.se_mean),
        ("V(nu)", engine.v_nu, mc.nu.var, mc.nu.se_var, rb.nu.var, rb.nu.se_var),
    )
    for label, exact, mc_val, mc_se, rb_val, rb_se in rows:
        worth = (mc_se**2 * args.rb_replicates) / (rb_se**2 * args.replicates) if rb_se else float("inf")
        print(f"{label:>10} {exact:>12.6f} {mc_val:>12.6f} {mc_se:>10.2e} "
              f"{rb_val:>12.6f} {rb_se:>10.2e} {worth:>8.1f}")


if __name__ == "__main__":
    main()
