"""Experiment drivers: Monte Carlo, a Rao-Blackwellized oracle, the n=2
crossover solver, and the relative-error grid.

Reproducibility contract: a scenario with a fixed seed produces bit-identical
summaries on every run.  Replicates are generated in fixed-size chunks, one
counter-based stream per chunk, and all reductions run over the full
replicate array in a fixed order, so the results do not depend on how the
work would be scheduled.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from .analytic import mse_n2
from .estimators import (
    corrected_batch,
    corrected_selection,
    cross_weight,
    hayashi_batch,
    naive_batch,
    naive_covariance,
)
from .model import ModelParams, RandomSource, SelectionSet, mix_seed
from .network import (
    Network,
    NoiseSpec,
    binary_tree_network,
    cascade_network,
)

__all__ = [
    "CHUNK",
    "Scenario",
    "ComponentStats",
    "MCSummary",
    "run_monte_carlo",
    "rao_blackwell_mc",
    "crossover_theta",
    "CrossoverRow",
    "crossover_curve",
    "RelErrRow",
    "RelErrTable",
    "table1_grid",
    "SUMMARY_FIELDS",
    "summary_rows",
    "crossover_rows",
    "table_rows",
    "write_csv",
    "write_json",
]

# replicates per stream; fixed so chunk boundaries never depend on K
CHUNK = 1 << 16

_ROOT_HALF = math.sqrt(0.5)

_NETWORK_KINDS = ("none", "cascade", "tree", "tree_truncated")
_ESTIMATOR_KINDS = ("naive", "hayashi", "corrected")


@dataclass(frozen=True)
class Scenario:
    """One fully specified simulation: model, network, estimator, budget."""

    params: ModelParams
    n: int
    network_kind: str
    estimator_kind: str
    noise: NoiseSpec = NoiseSpec(0.0)
    m0: int | None = None
    replicates: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two modes")
        if self.replicates < 1:
            raise ValueError("replicates must be positive")
        if self.network_kind not in _NETWORK_KINDS:
            raise ValueError(f"unknown network kind {self.network_kind!r}")
        if self.estimator_kind not in _ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {self.estimator_kind!r}")
        kind, est = self.network_kind, self.estimator_kind
        if est == "naive" and kind != "none":
            raise ValueError("the naive estimator reads untransformed modes")
        if est == "hayashi" and kind not in ("cascade", "tree"):
            raise ValueError("the concentrated estimator needs a concentrating network")
        if est == "corrected":
            if kind != "tree_truncated":
                raise ValueError("the corrected estimator needs a truncated tree")
            if self.m0 is None:
                raise ValueError("corrected scenarios must fix the stopping depth m0")
        if kind in ("tree", "tree_truncated") and self.n & (self.n - 1):
            raise ValueError("tree networks need n to be a power of two")
        if self.m0 is not None and not 0 <= self.m0 <= self.m:
            raise ValueError("need 0 <= m0 <= m")

    @property
    def m(self) -> int:
        if self.n & (self.n - 1):
            raise ValueError("n is not a power of two")
        return self.n.bit_length() - 1


@dataclass(frozen=True)
class ComponentStats:
    """Mean / variance / MSE of one estimated component, with standard errors."""

    mean: float
    se_mean: float
    var: float
    se_var: float
    mse: float
    se_mse: float


@dataclass(frozen=True)
class MCSummary:
    scenario: Scenario
    theta: ComponentStats
    eta: ComponentStats
    nu: ComponentStats
    total_mse: float
    se_total_mse: float
    replicates: int
    wall_clock: float = field(compare=False)


def _network_for(sc: Scenario) -> Network | None:
    if sc.network_kind == "none":
        return None
    if sc.network_kind == "cascade":
        return cascade_network(sc.n)
    if sc.network_kind == "tree":
        return binary_tree_network(sc.m)
    return binary_tree_network(sc.m, stages=sc.m0)


def _selection_for(sc: Scenario) -> SelectionSet:
    if sc.estimator_kind == "naive":
        return SelectionSet(tuple(range(1, sc.n + 1)))
    if sc.estimator_kind == "hayashi":
        return SelectionSet((1,))
    return corrected_selection(sc.m, sc.m0)


def _simulate_estimates(sc: Scenario) -> np.ndarray:
    """All replicate estimates, shape (replicates, 3).

    Draw order per chunk is fixed: amplitudes A then B, angle noise (only
    when the scenario is noisy), heterodyne X then Y, counts Z.
    """
    p = sc.params
    n = sc.n
    net = _network_for(sc)
    sel = np.array(_selection_for(sc).indices) - 1
    comp = np.setdiff1d(np.arange(n), sel)
    nominal = np.array([op.tau for op in net.ops]) if net is not None else None
    noisy = sc.noise.epsilon > 0 and nominal is not None and nominal.size > 0
    amp_sd = math.sqrt(p.nu / 2.0)

    out = np.empty((sc.replicates, 3))
    for start in range(0, sc.replicates, CHUNK):
        k = min(CHUNK, sc.replicates - start)
        rng = RandomSource(sc.seed, start // CHUNK).generator
        a = rng.normal(p.theta, amp_sd, (k, n))
        b = rng.normal(p.eta, amp_sd, (k, n))
        if nominal is not None and nominal.size:
            if noisy:
                taus = nominal + sc.noise.angle_sd * rng.standard_normal((k, nominal.size))
            else:
                taus = np.broadcast_to(nominal, (k, nominal.size))
            for i, op in enumerate(net.ops):
                c = np.cos(taus[:, i])
                s = np.sin(taus[:, i])
                j, kk = op.j - 1, op.k - 1
                aj = a[:, j].copy()
                bj = b[:, j].copy()
                a[:, j] = aj * c + a[:, kk] * s
                a[:, kk] = -aj * s + a[:, kk] * c
                b[:, j] = bj * c + b[:, kk] * s
                b[:, kk] = -bj * s + b[:, kk] * c
        x = a[:, sel] + rng.normal(0.0, _ROOT_HALF, (k, sel.size))
        y = b[:, sel] + rng.normal(0.0, _ROOT_HALF, (k, sel.size))
        if comp.size:
            z = rng.poisson(a[:, comp] ** 2 + b[:, comp] ** 2)
        else:
            z = np.zeros((k, 0))
        if sc.estimator_kind == "naive":
            th, et, nu = naive_batch(x, y)
        elif sc.estimator_kind == "hayashi":
            th, et, nu = hayashi_batch(x[:, 0], y[:, 0], z)
        else:
            th, et, nu = corrected_batch(x, y, z, sc.m, sc.m0, sc.noise.epsilon)
        out[start : start + k, 0] = th
        out[start : start + k, 1] = et
        out[start : start + k, 2] = nu
    return out


def _column_stats(col: np.ndarray, truth: float) -> ComponentStats:
    k = col.shape[0]
    mean = float(col.mean())
    dev = col - mean
    m2 = float(dev @ dev) / k
    var = float(dev @ dev) / (k - 1) if k > 1 else 0.0
    m4 = float((dev * dev) @ (dev * dev)) / k
    se_mean = math.sqrt(var / k) if k > 1 else 0.0
    # large-sample SE of the sample variance
    se_var = math.sqrt(max(m4 - m2 * m2, 0.0) / k) if k > 1 else 0.0
    sq = (col - truth) ** 2
    mse = float(sq.mean())
    se_mse = float(sq.std(ddof=1)) / math.sqrt(k) if k > 1 else 0.0
    return ComponentStats(mean, se_mean, var, se_var, mse, se_mse)


def _summarize(sc: Scenario, est: np.ndarray, wall: float) -> MCSummary:
    p = sc.params
    truth = (p.theta, p.eta, p.nu)
    stats = [_column_stats(est[:, i], truth[i]) for i in range(3)]
    tot = ((est - np.array(truth)) ** 2).sum(axis=1)
    k = est.shape[0]
    se_tot = float(tot.std(ddof=1)) / math.sqrt(k) if k > 1 else 0.0
    return MCSummary(
        sc, stats[0], stats[1], stats[2], float(tot.mean()), se_tot, k, wall
    )


def run_monte_carlo(sc: Scenario) -> MCSummary:
    """Plain Monte Carlo: fresh amplitudes, angles and measurements per replicate."""
    t0 = time.perf_counter()
    est = _simulate_estimates(sc)
    return _summarize(sc, est, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Rao-Blackwellized oracle
#
# Conditional on the angle draws the network is a fixed orthogonal matrix R,
# the transformed amplitudes are Normal(theta*c, nu/2) with c = R @ 1, and
# every estimator moment is a closed-form function of c.  Sampling only the
# angles removes all measurement noise from the Monte Carlo.


def _compile_rotations(sc: Scenario, net: Network, k: int, stream: int) -> np.ndarray:
    """Row sums c = R @ 1 for k independently perturbed copies of net."""
    n = sc.n
    rng = RandomSource(sc.seed, stream).generator
    nominal = np.array([op.tau for op in net.ops])
    if sc.noise.epsilon > 0 and nominal.size:
        taus = nominal + sc.noise.angle_sd * rng.standard_normal((k, nominal.size))
    else:
        taus = np.broadcast_to(nominal, (k, nominal.size))
    c = np.ones((k, n))
    for i, op in enumerate(net.ops):
        co = np.cos(taus[:, i])
        si = np.sin(taus[:, i])
        j, kk = op.j - 1, op.k - 1
        cj = c[:, j].copy()
        c[:, j] = cj * co + c[:, kk] * si
        c[:, kk] = -cj * si + c[:, kk] * co
    return c


def _conditional_moments(sc: Scenario, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-draw conditional means and variances of the estimator triple.

    c holds R @ 1 per draw; returns (e, v), each of shape (draws, 3).
    """
    p = sc.params
    n = sc.n
    g2 = p.theta**2 + p.eta**2
    w = (p.nu + 1.0) / 2.0
    k = c.shape[0]
    e = np.empty((k, 3))
    v = np.empty((k, 3))
    sel = np.array(_selection_for(sc).indices) - 1
    comp = np.setdiff1d(np.arange(n), sel)
    s = sel.size

    if sc.estimator_kind == "hayashi":
        c1 = c[:, 0]
        c2c = (c[:, comp] ** 2).sum(axis=1)
        root_n = math.sqrt(n)
        e[:, 0] = p.theta * c1 / root_n
        e[:, 1] = p.eta * c1 / root_n
        v[:, 0] = v[:, 1] = w / n
        e[:, 2] = (g2 * c2c + p.nu * (n - 1)) / (n - 1)
        v[:, 2] = (g2 * (1.0 + 2.0 * p.nu) * c2c + (p.nu + p.nu**2) * (n - 1)) / (
            n - 1
        ) ** 2
        return e, v

    # corrected family
    m, m0 = sc.m, sc.m0
    c_sel = c[:, sel]
    c1 = c_sel.sum(axis=1)
    csq = (c_sel**2).sum(axis=1)
    c2c = (c[:, comp] ** 2).sum(axis=1)
    den = math.sqrt(4.0**m / 2.0**m0)
    mult = 2.0 ** (sc.noise.epsilon * m0 / 2.0)
    scale = mult / den
    e[:, 0] = p.theta * c1 * scale
    e[:, 1] = p.eta * c1 * scale
    v[:, 0] = v[:, 1] = s * w * scale**2

    bw = (s - 1.0) / ((n - 1.0) * s)
    c0 = (n - 2.0**m0) / (2.0**m0 * (n - 1.0))
    gamma = cross_weight(m, m0, sc.noise.epsilon) if m0 < m else 0.0
    bg = bw + gamma
    # counting part, then the Gaussian quadratic form X'MX + Y'MY with
    # M = (b + gamma) I - gamma J on the selected modes
    e_z = (g2 * c2c + p.nu * (n - s)) / (n - 1.0)
    v_z = (g2 * (1.0 + 2.0 * p.nu) * c2c + (p.nu + p.nu**2) * (n - s)) / (n - 1.0) ** 2
    e_q = 2.0 * w * s * bw + bg * g2 * csq - gamma * g2 * c1**2
    tr_m2 = s * bg**2 - 2.0 * gamma * bg * s + gamma**2 * s**2
    v_q = 4.0 * w**2 * tr_m2 + 4.0 * w * g2 * (
        bg**2 * csq + (gamma**2 * s - 2.0 * gamma * bg) * c1**2
    )
    e[:, 2] = e_z + e_q - c0
    v[:, 2] = v_z + v_q
    return e, v


def rao_blackwell_mc(sc: Scenario) -> MCSummary:
    """Angle-only Monte Carlo over closed-form conditional moments.

    Unbiased for the same means, variances and MSEs as run_monte_carlo but
    with the measurement randomness integrated out; at epsilon = 0 there is
    a single rotation and the result is deterministic.  Variance standard
    errors are large-sample approximations.
    """
    t0 = time.perf_counter()
    p = sc.params
    if sc.estimator_kind == "naive":
        # no network: conditioning removes every random input
        cov = naive_covariance(p.nu, sc.n)
        e = np.tile([p.theta, p.eta, p.nu], (sc.replicates, 1))
        v = np.tile(np.diag(cov), (sc.replicates, 1))
    else:
        net = _network_for(sc)
        blocks = []
        for start in range(0, sc.replicates, CHUNK):
            k = min(CHUNK, sc.replicates - start)
            blocks.append(_compile_rotations(sc, net, k, start // CHUNK))
        c = np.concatenate(blocks, axis=0)
        e, v = _conditional_moments(sc, c)

    truth = np.array([p.theta, p.eta, p.nu])
    k = sc.replicates
    stats = []
    for i in range(3):
        mean = float(e[:, i].mean())
        se_mean = float(e[:, i].std(ddof=1)) / math.sqrt(k) if k > 1 else 0.0
        between = float(e[:, i].var(ddof=1)) if k > 1 else 0.0
        var = float(v[:, i].mean()) + between
        vsamp = v[:, i] + (e[:, i] - mean) ** 2
        se_var = float(vsamp.std(ddof=1)) / math.sqrt(k) if k > 1 else 0.0
        msamp = v[:, i] + (e[:, i] - truth[i]) ** 2
        mse = float(msamp.mean())
        se_mse = float(msamp.std(ddof=1)) / math.sqrt(k) if k > 1 else 0.0
        stats.append(ComponentStats(mean, se_mean, var, se_var, mse, se_mse))
    tot = (v + (e - truth) ** 2).sum(axis=1)
    se_tot = float(tot.std(ddof=1)) / math.sqrt(k) if k > 1 else 0.0
    return MCSummary(
        sc,
        stats[0],
        stats[1],
        stats[2],
        float(tot.mean()),
        se_tot,
        k,
        time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# n = 2 crossover


def crossover_theta(nu: float, epsilon: float) -> float:
    """Location magnitude where the concentrated scale MSE overtakes the naive one.

    Solves m_hat(theta) = m_bar at n = 2, eta = 0, by geometric bracket
    expansion followed by bisection to an interval of 1e-10.  At theta = 0
    the concentrated estimator is strictly better, so the root is positive.
    """
    if epsilon <= 0.0:
        raise ValueError(
            "no crossover at epsilon <= 0: the concentrated MSE stays below the naive one"
        )

    def gap(theta: float) -> float:
        m_bar, m_hat = mse_n2(theta, 0.0, nu, epsilon)
        return m_hat - m_bar

    lo, hi = 0.0, 1.0
    while gap(hi) < 0.0:
        lo, hi = hi, hi * 2.0
        if hi > 1e6:
            raise ValueError(
                f"no sign change up to theta = 1e6 (nu={nu}, epsilon={epsilon})"
            )
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if gap(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class CrossoverRow:
    nu: float
    epsilon: float
    theta_star: float
    residual: float


def crossover_curve(
    nu_values, epsilon_values
) -> tuple[list[CrossoverRow], list[str]]:
    """Crossover points over a grid, plus monotonicity findings.

    For fixed nu the crossover should move down as the noise grows; any
    violation on the supplied grid is reported rather than dropped.
    """
    rows = []
    findings = []
    for nu in nu_values:
        prev = None
        for eps in sorted(epsilon_values):
            ts = crossover_theta(nu, eps)
            m_bar, m_hat = mse_n2(ts, 0.0, nu, eps)
            rows.append(CrossoverRow(nu, eps, ts, abs(m_hat - m_bar) / m_bar))
            if prev is not None and ts > prev + 1e-12:
                findings.append(
                    f"theta_star not decreasing at nu={nu}: eps={eps} gives {ts} > {prev}"
                )
            prev = ts
    return rows, findings


# ---------------------------------------------------------------------------
# relative-error grid


@dataclass(frozen=True)
class RelErrRow:
    n: int
    theta: float
    eta: float
    nu: float
    epsilon: float
    m0: int
    family: str
    rel_err: float
    se: float


@dataclass(frozen=True)
class RelErrTable:
    rows: tuple[RelErrRow, ...]


def _grid_scenario(
    family: str, n: int, theta: float, nu: float, epsilon: float, m0: int, reps: int, seed: int
) -> Scenario:
    params = ModelParams(theta, 0.0, nu)
    noise = NoiseSpec(epsilon)
    if family == "naive":
        return Scenario(params, n, "none", "naive", NoiseSpec(0.0), None, reps, seed)
    if family == "hayashi":
        return Scenario(params, n, "tree", "hayashi", noise, None, reps, seed)
    return Scenario(params, n, "tree_truncated", "corrected", noise, m0, reps, seed)


def table1_grid(
    n_list,
    theta_list,
    nu_list,
    epsilon: float,
    m0_policy: str = "half",
    replicates: int = 100_000,
    seed: int = 0,
    m0: int | None = None,
) -> RelErrTable:
    """Summed-MSE improvement of each family over the naive baseline.

    One row per grid point per family, rel_err = 1 - M_family / M_naive with
    a delta-method standard error.  Numerator and baseline use disjoint
    random streams so the independence behind the delta method holds.
    """
    if m0_policy not in ("half", "full", "explicit"):
        raise ValueError(f"unknown m0 policy {m0_policy!r}")
    if m0_policy == "explicit" and m0 is None:
        raise ValueError("explicit m0 policy needs an m0 value")
    rows = []
    for n in n_list:
        if n < 2 or n & (n - 1):
            raise ValueError(f"grid n must be a power of two, got {n}")
        m = n.bit_length() - 1
        if m0_policy == "half":
            if m % 2:
                raise ValueError("half-depth stopping needs even m")
            cell_m0 = m // 2
        elif m0_policy == "full":
            cell_m0 = m
        else:
            cell_m0 = m0
        for i_t, theta in enumerate(theta_list):
            for i_v, nu in enumerate(nu_list):
                results = {}
                for fam_idx, family in enumerate(("naive", "hayashi", "corrected")):
                    sub = mix_seed(seed, n, i_t, i_v, fam_idx)
                    sc = _grid_scenario(
                        family, n, theta, nu, epsilon, cell_m0, replicates, sub
                    )
                    results[family] = run_monte_carlo(sc)
                m0_ref = results["naive"]
                base, se_base = m0_ref.total_mse, m0_ref.se_total_mse
                for family, row_m0 in (("hayashi", m), ("corrected", cell_m0)):
                    summ = results[family]
                    ratio = summ.total_mse / base
                    se = math.sqrt(
                        (summ.se_total_mse / base) ** 2
                        + (summ.total_mse * se_base / base**2) ** 2
                    )
                    rows.append(
                        RelErrRow(
                            n, theta, 0.0, nu, epsilon, row_m0, family,
                            1.0 - ratio, se,
                        )
                    )
    return RelErrTable(tuple(rows))


# ---------------------------------------------------------------------------
# emitters
#
# Wall-clock never enters the files: identical seeds must give identical bytes.

SUMMARY_FIELDS = [
    "family", "network", "n", "m0", "theta", "eta", "nu", "epsilon",
    "replicates", "seed",
    "mean_theta", "se_mean_theta", "mean_eta", "se_mean_eta",
    "mean_nu", "se_mean_nu",
    "var_theta", "se_var_theta", "var_eta", "se_var_eta",
    "var_nu", "se_var_nu",
    "mse_theta", "se_mse_theta", "mse_eta", "se_mse_eta",
    "mse_nu", "se_mse_nu",
    "total_mse", "se_total_mse",
]


def summary_rows(summaries) -> list[dict]:
    rows = []
    for s in summaries:
        sc = s.scenario
        row = {
            "family": sc.estimator_kind,
            "network": sc.network_kind,
            "n": sc.n,
            "m0": "" if sc.m0 is None else sc.m0,
            "theta": sc.params.theta,
            "eta": sc.params.eta,
            "nu": sc.params.nu,
            "epsilon": sc.noise.epsilon,
            "replicates": s.replicates,
            "seed": sc.seed,
            "total_mse": s.total_mse,
            "se_total_mse": s.se_total_mse,
        }
        for name, st in (("theta", s.theta), ("eta", s.eta), ("nu", s.nu)):
            row[f"mean_{name}"] = st.mean
            row[f"se_mean_{name}"] = st.se_mean
            row[f"var_{name}"] = st.var
            row[f"se_var_{name}"] = st.se_var
            row[f"mse_{name}"] = st.mse
            row[f"se_mse_{name}"] = st.se_mse
        rows.append(row)
    return rows


def crossover_rows(rows) -> list[dict]:
    return [
        {
            "nu": r.nu,
            "epsilon": r.epsilon,
            "theta_star": r.theta_star,
            "residual": r.residual,
        }
        for r in rows
    ]


def table_rows(table: RelErrTable) -> list[dict]:
    return [
        {
            "n": r.n,
            "theta": r.theta,
            "eta": r.eta,
            "nu": r.nu,
            "epsilon": r.epsilon,
            "m0": r.m0,
            "family": r.family,
            "rel_err": r.rel_err,
            "se": r.se,
        }
        for r in table.rows
    ]


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _atomic_write(path: str, text: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, fieldnames: list[str], rows: list[dict]) -> None:
    """Write rows atomically; floats use repr so reruns are byte-identical."""
    import io

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _format_cell(v) for k, v in row.items()})
    _atomic_write(path, buf.getvalue())


def write_json(path: str, rows: list[dict]) -> None:
    _atomic_write(path, json.dumps(rows, indent=2) + "\n")
