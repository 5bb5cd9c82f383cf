"""Command-line front door.

Subcommands bind the library; no numerics live here.

    simulate   Monte Carlo run for one estimator family -> summary table
    moments    closed forms vs moment engine, side by side
    mse2       the two-mode scale MSEs for both families
    crossover  location magnitude where the families swap rank (two modes)
    table1     relative-error grid of each family against the naive baseline

Grid-valued flags accept either a single number or an inclusive range
lo:hi:step.  The default seed can be set with the BEAMEST_SEED environment
variable; an explicit --seed always wins.  Output files are written
atomically and contain no timestamps, so a repeated invocation is
byte-identical.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass

from .analytic import (
    corrected_closed_forms,
    corrected_engine_moments,
    hayashi_closed_forms,
    hayashi_engine_moments,
    mse_n2,
)
from .experiments import (
    Scenario,
    crossover_curve,
    crossover_rows,
    run_monte_carlo,
    summary_rows,
    SUMMARY_FIELDS,
    table1_grid,
    table_rows,
    write_csv,
    write_json,
)
from .model import ModelParams
from .network import NoiseSpec

__all__ = ["RunConfig", "parse_args", "run", "main"]

_DEFAULT_REPLICATES = 100_000

_CROSSOVER_FIELDS = ["nu", "epsilon", "theta_star", "residual"]
_TABLE_FIELDS = ["n", "theta", "eta", "nu", "epsilon", "m0", "family", "rel_err", "se"]
_MOMENT_FIELDS = ["quantity", "closed", "engine", "rel_diff"]
_MSE2_FIELDS = ["theta", "eta", "nu", "epsilon", "m_bar", "m_hat"]


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    options: argparse.Namespace


def _parse_range(text: str) -> list[float]:
    """A float, or an inclusive lo:hi:step grid."""
    if ":" not in text:
        return [float(text)]
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"range must be lo:hi:step, got {text!r}"
        )
    lo, hi, step = (float(p) for p in parts)
    if step <= 0:
        raise argparse.ArgumentTypeError("range step must be positive")
    if hi < lo:
        raise argparse.ArgumentTypeError("range needs lo <= hi")
    out = []
    k = 0
    while True:
        v = lo + k * step
        if v > hi + 1e-9 * step:
            break
        out.append(v)
        k += 1
    return out


def _parse_n_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _default_seed() -> int:
    return int(os.environ.get("BEAMEST_SEED", "0"))


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=float, default=0.0, help="location of the first quadrature (default 0)")
    p.add_argument("--eta", type=float, default=0.0, help="location of the second quadrature (default 0)")
    p.add_argument("--nu", type=float, default=1.0, help="prior amplitude variance scale, >= 0 (default 1)")
    p.add_argument("--epsilon", type=float, default=0.0,
                   help="angle noise level; each angle has variance epsilon*log(2) (default 0)")


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="beamest",
        description="Estimation of (theta, eta, nu) through noisy beam-splitter networks.",
    )
    sub = top.add_subparsers(dest="subcommand", required=True)

    sim = sub.add_parser("simulate", help="Monte Carlo run for one estimator family")
    sim.add_argument("--estimator", required=True, choices=["naive", "hayashi", "corrected"],
                     help="estimator family")
    size = sim.add_mutually_exclusive_group(required=True)
    size.add_argument("--m", type=int, help="tree depth; n = 2^m")
    size.add_argument("--n", type=int, help="mode count (power of two for tree networks)")
    sim.add_argument("--m0", type=int, help="stopping depth for the corrected family")
    sim.add_argument("--network", choices=["cascade", "tree"], default="tree",
                     help="concentrating layout for the hayashi family (default tree)")
    _add_model_flags(sim)
    sim.add_argument("--replicates", type=int, default=_DEFAULT_REPLICATES,
                     help=f"Monte Carlo replicates (default {_DEFAULT_REPLICATES})")
    sim.add_argument("--seed", type=int, default=None, help="RNG seed (default BEAMEST_SEED or 0)")
    sim.add_argument("--format", choices=["csv", "json"], default="csv", help="output format (default csv)")
    sim.add_argument("--output", help="output path (default summary.csv or summary.json)")

    mom = sub.add_parser("moments", help="closed forms vs moment engine")
    mom.add_argument("--m", type=int, required=True, help="tree depth; n = 2^m")
    mom.add_argument("--m0", type=int, default=None,
                     help="stopping depth; omitted = full concentration (hayashi)")
    _add_model_flags(mom)
    mom.add_argument("--format", choices=["csv", "json"], default="csv", help="output format (default csv)")
    mom.add_argument("--output", help="optional output path; default prints to stdout")

    mse = sub.add_parser("mse2", help="two-mode scale MSEs of both families")
    _add_model_flags(mse)
    mse.add_argument("--format", choices=["csv", "json"], default="csv", help="output format (default csv)")
    mse.add_argument("--output", help="optional output path; default prints to stdout")

    cro = sub.add_parser("crossover", help="family-swap location at two modes")
    cro.add_argument("--nu", type=_parse_range, required=True,
                     help="prior variance scale; single value or lo:hi:step")
    cro.add_argument("--epsilon", type=_parse_range, required=True,
                     help="angle noise level(s); single value or lo:hi:step, all > 0")
    cro.add_argument("--format", choices=["csv", "json"], default="csv", help="output format (default csv)")
    cro.add_argument("--output", help="output path (default crossover.csv or crossover.json)")

    tab = sub.add_parser("table1", help="relative-error grid against the naive baseline")
    tab.add_argument("--n", type=_parse_n_list, required=True,
                     help="mode counts, comma separated, each a power of two")
    tab.add_argument("--theta", type=_parse_range, default=[0.0], help="location grid (lo:hi:step)")
    tab.add_argument("--nu", type=_parse_range, default=[1.0], help="scale grid (lo:hi:step)")
    tab.add_argument("--epsilon", type=float, default=0.0, help="angle noise level (default 0)")
    tab.add_argument("--m0", default="half",
                     help="stopping depth policy: 'half', 'full', or an integer (default half)")
    tab.add_argument("--replicates", type=int, default=_DEFAULT_REPLICATES,
                     help=f"replicates per cell (default {_DEFAULT_REPLICATES})")
    tab.add_argument("--seed", type=int, default=None, help="RNG seed (default BEAMEST_SEED or 0)")
    tab.add_argument("--format", choices=["csv", "json"], default="csv", help="output format (default csv)")
    tab.add_argument("--output", help="output path (default table1.csv or table1.json)")
    return top


def parse_args(argv: list[str]) -> RunConfig:
    """Validate flags into a RunConfig; exits with code 2 on usage errors."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if getattr(ns, "seed", None) is None and hasattr(ns, "seed"):
        ns.seed = _default_seed()

    if ns.subcommand == "simulate":
        if ns.m is not None and ns.m < 1:
            parser.error("--m must be >= 1")
        n = (1 << ns.m) if ns.m is not None else ns.n
        if n is None or n < 2:
            parser.error("need --m or --n with at least two modes")
        ns.n = n
        if ns.estimator == "corrected":
            if ns.m0 is None:
                parser.error("--m0 is required with --estimator corrected")
            if n & (n - 1):
                parser.error("the corrected family needs n to be a power of two")
            if not 0 <= ns.m0 <= n.bit_length() - 1:
                parser.error("--m0 must lie in 0..m")
        elif ns.m0 is not None:
            parser.error("--m0 only applies to the corrected family")
        if ns.estimator == "hayashi" and ns.network == "tree" and n & (n - 1):
            parser.error("tree networks need n to be a power of two (or use --network cascade)")
        if ns.replicates < 1:
            parser.error("--replicates must be positive")
    elif ns.subcommand == "moments":
        if ns.m < 1:
            parser.error("--m must be >= 1")
        if ns.m0 is not None and not 0 <= ns.m0 <= ns.m:
            parser.error("--m0 must lie in 0..m")
    elif ns.subcommand == "crossover":
        nus = [v for grid in [ns.nu] for v in grid]
        epss = [v for grid in [ns.epsilon] for v in grid]
        if any(e <= 0 for e in epss):
            parser.error("--epsilon values must be > 0 (no crossover without noise)")
        if any(v < 0 for v in nus):
            parser.error("--nu must be >= 0")
    elif ns.subcommand == "table1":
        for n in ns.n:
            if n < 2 or n & (n - 1):
                parser.error(f"--n values must be powers of two >= 2, got {n}")
        if ns.m0 not in ("half", "full"):
            try:
                ns.m0 = int(ns.m0)
            except ValueError:
                parser.error("--m0 must be 'half', 'full', or an integer")
        if ns.replicates < 1:
            parser.error("--replicates must be positive")
    return RunConfig(ns.subcommand, ns)


def _default_output(stem: str, fmt: str) -> str:
    return f"{stem}.{'json' if fmt == 'json' else 'csv'}"


def _emit(path: str, fmt: str, fieldnames: list[str], rows: list[dict]) -> None:
    if fmt == "json":
        write_json(path, rows)
    else:
        write_csv(path, fieldnames, rows)


def _print_rows(fieldnames: list[str], rows: list[dict]) -> None:
    for row in rows:
        print("  " + "  ".join(f"{k}={row[k]!r}" for k in fieldnames))


def _run_simulate(ns) -> int:
    params = ModelParams(ns.theta, ns.eta, ns.nu)
    noise = NoiseSpec(ns.epsilon)
    if ns.estimator == "naive":
        sc = Scenario(params, ns.n, "none", "naive", NoiseSpec(0.0), None, ns.replicates, ns.seed)
    elif ns.estimator == "hayashi":
        sc = Scenario(params, ns.n, ns.network, "hayashi", noise, None, ns.replicates, ns.seed)
    else:
        sc = Scenario(params, ns.n, "tree_truncated", "corrected", noise, ns.m0,
                      ns.replicates, ns.seed)
    summary = run_monte_carlo(sc)
    rows = summary_rows([summary])
    out = ns.output or _default_output("summary", ns.format)
    _emit(out, ns.format, SUMMARY_FIELDS, rows)
    print(
        f"simulate[{ns.estimator}]: n={ns.n} replicates={summary.replicates} "
        f"mean=({summary.theta.mean:.6g}, {summary.eta.mean:.6g}, {summary.nu.mean:.6g}) "
        f"-> {out} [{summary.wall_clock:.2f}s]"
    )
    return 0


def _moment_quantities(closed, engine) -> list[dict]:
    rows = []
    for name in ("e_theta", "e_eta", "e_nu", "v_theta", "v_eta", "v_nu"):
        c = getattr(closed, name)
        e = getattr(engine, name)
        if c is None:
            continue
        rel = abs(c - e) / max(abs(c), abs(e), 1e-300)
        rows.append({"quantity": name, "closed": c, "engine": e, "rel_diff": rel})
    return rows


def _run_moments(ns) -> int:
    t0 = time.perf_counter()
    if ns.m0 is None:
        closed = hayashi_closed_forms(ns.m, ns.epsilon, ns.theta, ns.eta, ns.nu)
        engine = hayashi_engine_moments(ns.m, ns.epsilon, ns.theta, ns.eta, ns.nu)
        label = "hayashi"
    else:
        closed = corrected_closed_forms(ns.m, ns.m0, ns.epsilon, ns.theta, ns.eta, ns.nu)
        engine = corrected_engine_moments(ns.m, ns.m0, ns.epsilon, ns.theta, ns.eta, ns.nu)
        label = f"corrected(m0={ns.m0})"
    rows = _moment_quantities(closed, engine)
    if ns.output:
        _emit(ns.output, ns.format, _MOMENT_FIELDS, rows)
        dest = f"-> {ns.output} "
    else:
        _print_rows(_MOMENT_FIELDS, rows)
        dest = ""
    worst = max(r["rel_diff"] for r in rows)
    print(f"moments[{label}]: m={ns.m} max rel_diff={worst:.3g} {dest}"
          f"[{time.perf_counter() - t0:.2f}s]")
    return 0


def _run_mse2(ns) -> int:
    m_bar, m_hat = mse_n2(ns.theta, ns.eta, ns.nu, ns.epsilon)
    rows = [{
        "theta": ns.theta, "eta": ns.eta, "nu": ns.nu, "epsilon": ns.epsilon,
        "m_bar": m_bar, "m_hat": m_hat,
    }]
    if ns.output:
        _emit(ns.output, ns.format, _MSE2_FIELDS, rows)
        print(f"mse2: m_bar={m_bar!r} m_hat={m_hat!r} -> {ns.output}")
    else:
        _print_rows(_MSE2_FIELDS, rows)
        print(f"mse2: m_bar={m_bar!r} m_hat={m_hat!r}")
    return 0


def _run_crossover(ns) -> int:
    t0 = time.perf_counter()
    points, findings = crossover_curve(ns.nu, ns.epsilon)
    rows = crossover_rows(points)
    out = ns.output or _default_output("crossover", ns.format)
    _emit(out, ns.format, _CROSSOVER_FIELDS, rows)
    for f in findings:
        print(f"warning: {f}", file=sys.stderr)
    print(f"crossover: {len(rows)} point(s), {len(findings)} finding(s) "
          f"-> {out} [{time.perf_counter() - t0:.2f}s]")
    return 0


def _run_table1(ns) -> int:
    t0 = time.perf_counter()
    if ns.m0 in ("half", "full"):
        policy, m0 = ns.m0, None
    else:
        policy, m0 = "explicit", ns.m0
    table = table1_grid(ns.n, ns.theta, ns.nu, ns.epsilon, policy,
                        ns.replicates, ns.seed, m0)
    rows = table_rows(table)
    out = ns.output or _default_output("table1", ns.format)
    _emit(out, ns.format, _TABLE_FIELDS, rows)
    print(f"table1: {len(rows)} row(s) over n={ns.n} -> {out} "
          f"[{time.perf_counter() - t0:.2f}s]")
    return 0


_RUNNERS = {
    "simulate": _run_simulate,
    "moments": _run_moments,
    "mse2": _run_mse2,
    "crossover": _run_crossover,
    "table1": _run_table1,
}


def run(config: RunConfig) -> int:
    """Execute a parsed config; returns the process exit code."""
    try:
        return _RUNNERS[config.subcommand](config.options)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv: list[str] | None = None) -> int:
    try:
        config = parse_args(sys.argv[1:] if argv is None else list(argv))
    except SystemExit as exc:  # argparse already printed the usage message
        code = exc.code
        return code if isinstance(code, int) else 2
    return run(config)


if __name__ == "__main__":
    raise SystemExit(main())
