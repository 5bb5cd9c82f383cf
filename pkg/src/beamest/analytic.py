"""Exact finite-sample moments of the estimators under angle noise.

Two independent routes are provided on purpose:

* closed forms: the displayed formulas for the concentrated estimator
  (mean/variance of the location part, mean of the scale part) and for the
  corrected estimator's location variance, rearranged through expm1 so the
  removable singularity at noise level 1 never hits a 0/0;
* a moment-propagation engine that pushes exact joint moments of the mode
  amplitudes through the binary tree stage by stage, averaging over the
  Gaussian angles analytically.

The engine covers what no display does (the scale variances) and doubles as
an independent check on every closed form.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from math import comb

__all__ = [
    "trig_moment",
    "gaussian_raw_moments",
    "EstimatorMoments",
    "hayashi_closed_forms",
    "MomentTables",
    "binary_tree_moments",
    "hayashi_engine_moments",
    "hayashi_nu_variance",
    "corrected_engine_moments",
    "corrected_closed_forms",
    "mse_n2",
]

_LOG2 = math.log(2.0)
_QUARTER_PI = math.pi / 4.0

# monomial degrees carried by the engine
_DEG4 = tuple((a, b) for a in range(5) for b in range(5) if a + b <= 4)
_DEG2 = tuple((a, b) for a in range(3) for b in range(3) if a + b <= 2)


@lru_cache(maxsize=None)
def trig_moment(p: int, q: int, mu: float, var: float) -> float:
    """E[cos^p(t) sin^q(t)] for t ~ Normal(mu, var), evaluated exactly.

    Writes the product as a sum of complex exponentials and applies
    E[exp(ikt)] = exp(ik*mu - k^2*var/2).  No quadrature involved.
    """
    if p < 0 or q < 0:
        raise ValueError("powers must be nonnegative")
    total = 0.0 + 0.0j
    for a in range(p + 1):
        ca = comb(p, a)
        for b in range(q + 1):
            k = 2 * a - p + 2 * b - q
            sign = -1.0 if (q - b) % 2 else 1.0
            total += ca * comb(q, b) * sign * cmath.exp(1j * k * mu - 0.5 * k * k * var)
    total *= 0.5**p
    total /= (2.0j) ** q
    return total.real


def gaussian_raw_moments(mean: float, var: float, kmax: int) -> list[float]:
    """Raw moments E[W^k], k = 0..kmax, of W ~ Normal(mean, var)."""
    out = [1.0, mean]
    for k in range(2, kmax + 1):
        out.append(mean * out[k - 1] + (k - 1) * var * out[k - 2])
    return out[: kmax + 1]


def _ratio_expm1(c: float, x: float) -> float:
    # expm1(c*x)/expm1(x), continued by its limit c at x = 0
    if x == 0.0:
        return float(c)
    return math.expm1(c * x) / math.expm1(x)


@dataclass(frozen=True)
class EstimatorMoments:
    """First two moments of an estimator triple.

    v_nu is None where no displayed formula exists (the engine supplies it).
    """

    e_theta: float
    e_eta: float
    e_nu: float
    v_theta: float
    v_eta: float
    v_nu: float | None = None


def hayashi_closed_forms(
    m: int, epsilon: float, theta: float, eta: float, nu: float
) -> EstimatorMoments:
    """Displayed moments of the concentrate-then-count estimator, n = 2^m.

    Holds for the full binary tree with noisy angles (the cascade agrees
    only at epsilon = 0, where both concentrate perfectly).  The scale
    variance has no display and is left None (see hayashi_nu_variance).
    """
    if m < 1:
        raise ValueError("need m >= 1")
    n = 2.0**m
    x = (epsilon - 1.0) * _LOG2
    att = 2.0 ** (-epsilon * m / 2.0)
    e_theta = att * theta
    e_eta = att * eta

    bias_coef = 1.0 + _ratio_expm1(-m, x) / ((n - 1.0) * 2.0 ** (1.0 + epsilon))
    e_nu = nu + (theta**2 + eta**2) * bias_coef

    n_eps = 2.0 ** (-epsilon * m)
    tail = n_eps / 2.0 ** (1.0 + epsilon) * _ratio_expm1(m, x)

    def _vloc(loc: float) -> float:
        return (1.0 + nu) / (2.0 * n) + loc**2 / n - loc**2 * n_eps + tail * loc**2

    return EstimatorMoments(e_theta, e_eta, e_nu, _vloc(theta), _vloc(eta), None)


# ---------------------------------------------------------------------------
# moment-propagation engine
#
# State after t stages of the tree, per merge block:
#   sig[(a, b)]                E[L_A^a L_B^b] of the block leader
#   res[s][(a, b)]             same for the residual mode born at stage s
#   cross_leader[s][(a,b,c,d)] E[L_A^a L_B^b R_A^c R_B^d], leader with the
#                              stage-s residual on its own merge chain
#   cross_res[(s,t)][(...)]    E[Rt_A^a Rt_B^b Rs_A^c Rs_B^d], s < t
#
# A stage merges two i.i.d. depth-(t-1) blocks, leader U and leader W, with
# one Gaussian angle per merge:  L = U cos + W sin,  R = -U sin + W cos.
# Angles average out independently of everything else, so each update is a
# binomial convolution of the previous tables against exact trig moments.
# With the nominal angle at pi/4 the trig moments are swap-symmetric,
# E[cos^p sin^q] = E[cos^q sin^p], which makes the tables independent of
# which side of a merge a residual sits on (for the even degrees used here);
# one representative per stage therefore suffices.


@dataclass(frozen=True)
class MomentTables:
    depth: int
    epsilon: float
    sig: dict[tuple[int, int], float]
    res: dict[int, dict[tuple[int, int], float]]
    cross_leader: dict[int, dict[tuple[int, int, int, int], float]]
    cross_res: dict[tuple[int, int], dict[tuple[int, int, int, int], float]]


def binary_tree_moments(
    depth: int, epsilon: float, theta: float, eta: float, nu: float
) -> MomentTables:
    """Propagate exact amplitude moments through `depth` tree stages."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    var = epsilon * _LOG2

    def tm(p: int, q: int) -> float:
        return trig_moment(p, q, _QUARTER_PI, var)

    ga = gaussian_raw_moments(theta, nu / 2.0, 4)
    gb = gaussian_raw_moments(eta, nu / 2.0, 4)
    sig = {(a, b): ga[a] * gb[b] for (a, b) in _DEG4}
    res: dict[int, dict] = {}
    cross_leader: dict[int, dict] = {}
    cross_res: dict[tuple[int, int], dict] = {}

    for t in range(1, depth + 1):
        new_sig = {}
        new_res = {}
        for a, b in _DEG4:
            acc_s = 0.0
            acc_r = 0.0
            for i in range(a + 1):
                for j in range(b + 1):
                    w = comb(a, i) * comb(b, j) * sig[(i, j)] * sig[(a - i, b - j)]
                    acc_s += w * tm(i + j, a + b - i - j)
                    sgn = -1.0 if (i + j) % 2 else 1.0
                    acc_r += sgn * w * tm(a + b - i - j, i + j)
            new_sig[(a, b)] = acc_s
            new_res[(a, b)] = acc_r

        # leader paired with the residual created this very stage
        born = {}
        for a, b in _DEG2:
            for c, d in _DEG2:
                acc = 0.0
                for i in range(a + 1):
                    for j in range(b + 1):
                        for k in range(c + 1):
                            for l in range(d + 1):
                                sgn = -1.0 if (k + l) % 2 else 1.0
                                acc += (
                                    sgn
                                    * comb(a, i)
                                    * comb(b, j)
                                    * comb(c, k)
                                    * comb(d, l)
                                    * tm(i + j + c - k + d - l, a - i + b - j + k + l)
                                    * sig[(i + k, j + l)]
                                    * sig[(a - i + c - k, b - j + d - l)]
                                )
                born[(a, b, c, d)] = acc

        # the new residual against every older one, via the old leader cross
        for s_idx, cl_prev in cross_leader.items():
            tbl = {}
            for a, b in _DEG2:
                for c, d in _DEG2:
                    acc = 0.0
                    for i in range(a + 1):
                        for j in range(b + 1):
                            sgn = -1.0 if (i + j) % 2 else 1.0
                            acc += (
                                sgn
                                * comb(a, i)
                                * comb(b, j)
                                * tm(a + b - i - j, i + j)
                                * cl_prev[(i, j, c, d)]
                                * sig[(a - i, b - j)]
                            )
                    tbl[(a, b, c, d)] = acc
            cross_res[(s_idx, t)] = tbl

        # carry the old leader crosses through the merge
        for s_idx, cl_prev in list(cross_leader.items()):
            tbl = {}
            for a, b in _DEG2:
                for c, d in _DEG2:
                    acc = 0.0
                    for i in range(a + 1):
                        for j in range(b + 1):
                            acc += (
                                comb(a, i)
                                * comb(b, j)
                                * tm(i + j, a + b - i - j)
                                * cl_prev[(i, j, c, d)]
                                * sig[(a - i, b - j)]
                            )
                    tbl[(a, b, c, d)] = acc
            cross_leader[s_idx] = tbl

        cross_leader[t] = born
        res[t] = new_res
        sig = new_sig

    return MomentTables(depth, epsilon, sig, res, cross_leader, cross_res)


def _block_summaries(tb: MomentTables) -> dict[str, float]:
    """Observation moments for one depth-m0 block.

    X = L_A + noise, Y = L_B + noise (heterodyne the leader), and the block
    count total Z sums conditionally Poisson counts over all residuals.
    Everything reported raw except vz, kept centered to dodge cancellation.
    """
    g = tb.sig
    u1 = g[(1, 0)]
    v1 = g[(0, 1)]
    u2 = g[(2, 0)] + 0.5
    v2 = g[(0, 2)] + 0.5
    uv = g[(1, 1)]
    u3 = g[(3, 0)] + 1.5 * g[(1, 0)]
    v3 = g[(0, 3)] + 1.5 * g[(0, 1)]
    u4 = g[(4, 0)] + 3.0 * g[(2, 0)] + 0.75
    v4 = g[(0, 4)] + 3.0 * g[(0, 2)] + 0.75
    uv2 = g[(1, 2)] + 0.5 * g[(1, 0)]
    u2v = g[(2, 1)] + 0.5 * g[(0, 1)]
    u2v2 = g[(2, 2)] + 0.5 * g[(2, 0)] + 0.5 * g[(0, 2)] + 0.25

    m0 = tb.depth
    kappa = {t: 2.0 ** (m0 - t) for t in tb.res}
    eq = {t: r[(2, 0)] + r[(0, 2)] for t, r in tb.res.items()}
    eq2 = {t: r[(4, 0)] + 2.0 * r[(2, 2)] + r[(0, 4)] for t, r in tb.res.items()}

    z1 = sum(kappa[t] * eq[t] for t in eq)
    # Var(Z_block): Poisson part + per-residual spread + nested-pair covariance
    vz = sum(kappa[t] * (eq[t] + eq2[t] - eq[t] ** 2) for t in eq)
    for (s, t), tbl in tb.cross_res.items():
        joint = (
            tbl[(2, 0, 2, 0)]
            + tbl[(2, 0, 0, 2)]
            + tbl[(0, 2, 2, 0)]
            + tbl[(0, 2, 0, 2)]
        )
        vz += 2.0 * 2.0 ** (m0 - s) * (joint - eq[s] * eq[t])

    za1 = zb1 = za2 = zb2 = 0.0
    for t, cl in tb.cross_leader.items():
        za1 += kappa[t] * (cl[(1, 0, 2, 0)] + cl[(1, 0, 0, 2)])
        zb1 += kappa[t] * (cl[(0, 1, 2, 0)] + cl[(0, 1, 0, 2)])
        za2 += kappa[t] * (cl[(2, 0, 2, 0)] + cl[(2, 0, 0, 2)])
        zb2 += kappa[t] * (cl[(0, 2, 2, 0)] + cl[(0, 2, 0, 2)])

    return {
        "u1": u1,
        "v1": v1,
        "u2": u2,
        "v2": v2,
        "uv": uv,
        "z1": z1,
        "vz": vz,
        "zu": za1,
        "zv": zb1,
        "zw": za2 + zb2 + z1,
        "w1": u2 + v2,
        "w2": u4 + 2.0 * u2v2 + v4,
        "wu": u3 + uv2,
        "wv": u2v + v3,
    }


def hayashi_engine_moments(
    m: int, epsilon: float, theta: float, eta: float, nu: float
) -> EstimatorMoments:
    """Engine route for the concentrated estimator: one block of depth m."""
    if m < 1:
        raise ValueError("need m >= 1")
    tb = binary_tree_moments(m, epsilon, theta, eta, nu)
    s = _block_summaries(tb)
    n = 2.0**m
    root_n = math.sqrt(n)
    e_theta = s["u1"] / root_n
    e_eta = s["v1"] / root_n
    v_theta = (s["u2"] - s["u1"] ** 2) / n
    v_eta = (s["v2"] - s["v1"] ** 2) / n
    e_nu = s["z1"] / (n - 1.0)
    v_nu = s["vz"] / (n - 1.0) ** 2
    return EstimatorMoments(e_theta, e_eta, e_nu, v_theta, v_eta, v_nu)


def hayashi_nu_variance(m: int, epsilon: float, theta: float, eta: float, nu: float) -> float:
    """Exact variance of the count-average scale estimate (engine route)."""
    return hayashi_engine_moments(m, epsilon, theta, eta, nu).v_nu


def corrected_engine_moments(
    m: int, m0: int, epsilon: float, theta: float, eta: float, nu: float
) -> EstimatorMoments:
    """Exact moments of the truncated-tree corrected estimator.

    The 2^(m-m0) blocks are i.i.d., so one depth-m0 block summary plus the
    block count fixes every term.  The variance is assembled from centered
    per-block quantities; the naive E[T^2]-E[T]^2 route loses all precision
    once the block count is large.
    """
    if not 0 <= m0 <= m:
        raise ValueError("need 0 <= m0 <= m")
    from .estimators import cross_weight

    tb = binary_tree_moments(m0, epsilon, theta, eta, nu)
    s = _block_summaries(tb)
    nblocks = 2.0 ** (m - m0)
    n = 2.0**m

    den = math.sqrt(4.0**m / 2.0**m0)
    mult = 2.0 ** (epsilon * m0 / 2.0)
    scale = mult / den
    e_theta = nblocks * s["u1"] * scale
    e_eta = nblocks * s["v1"] * scale
    v_theta = nblocks * (s["u2"] - s["u1"] ** 2) * scale**2
    v_eta = nblocks * (s["v2"] - s["v1"] ** 2) * scale**2

    a = 1.0 / (n - 1.0)
    b = (nblocks - 1.0) / ((n - 1.0) * nblocks)
    c0 = (n - 2.0**m0) / (2.0**m0 * (n - 1.0))
    gamma = cross_weight(m, m0, epsilon) if m0 < m else 0.0

    u1, v1 = s["u1"], s["v1"]
    z1, w1 = s["z1"], s["w1"]
    u2c = s["u2"] - u1**2
    v2c = s["v2"] - v1**2
    uvc = s["uv"] - u1 * v1

    e_nu = a * nblocks * z1 + b * nblocks * w1 - gamma * nblocks * (nblocks - 1.0) * (
        u1**2 + v1**2
    ) - c0

    v_tz = nblocks * s["vz"]
    v_tw = nblocks * (s["w2"] - w1**2)
    c_zw = nblocks * (s["zw"] - z1 * w1)
    pair = nblocks * (nblocks - 1.0)
    c_zg = 2.0 * pair * ((s["zu"] - z1 * u1) * u1 + (s["zv"] - z1 * v1) * v1)
    c_wg = 2.0 * pair * ((s["wu"] - w1 * u1) * u1 + (s["wv"] - w1 * v1) * v1)
    v_tg = 2.0 * pair * (u2c**2 + 2.0 * uvc**2 + v2c**2) + 4.0 * pair * (
        nblocks - 1.0
    ) * (u2c * u1**2 + 2.0 * uvc * u1 * v1 + v2c * v1**2)

    v_nu = (
        a * a * v_tz
        + b * b * v_tw
        + gamma * gamma * v_tg
        + 2.0 * a * b * c_zw
        - 2.0 * a * gamma * c_zg
        - 2.0 * b * gamma * c_wg
    )
    return EstimatorMoments(e_theta, e_eta, e_nu, v_theta, v_eta, v_nu)


def corrected_closed_forms(
    m: int, m0: int, epsilon: float, theta: float, eta: float, nu: float
) -> EstimatorMoments:
    """Displayed moments of the corrected estimator.

    Location means are exact by construction; the location variance display
    is rearranged so its eps -> 1 removable zero evaluates cleanly.  The
    scale moments have no self-contained display and come from the engine.

    Unbiasedness of the scale part needs at least two measured leaders; at
    m0 = m the family collapses to the concentrated estimator and inherits
    its location-dependent scale bias.
    """
    if not 0 <= m0 <= m:
        raise ValueError("need 0 <= m0 <= m")
    e_nu = nu if m0 < m else hayashi_closed_forms(m, epsilon, theta, eta, nu).e_nu
    x = (epsilon - 1.0) * _LOG2
    noise_gain = (2.0**epsilon - 1.0) ** 2 * 2.0 ** (m0 - 1) * _ratio_expm1(m0, x) / 2.0 ** (
        epsilon + m
    )
    base = (1.0 + nu) / 2.0 ** (1 + m - epsilon * m0)
    v_theta = base + noise_gain * theta**2
    v_eta = base + noise_gain * eta**2
    engine = corrected_engine_moments(m, m0, epsilon, theta, eta, nu)
    return EstimatorMoments(theta, eta, e_nu, v_theta, v_eta, engine.v_nu)


def mse_n2(theta: float, eta: float, nu: float, epsilon: float) -> tuple[float, float]:
    """Scale-estimate mean squared errors at n = 2, (naive, concentrated).

    The naive MSE is noise-free, (nu+1)^2.  The concentrated one picks up
    location-dependent terms that grow with the angle noise; their crossing
    defines the handover point between the two families.
    """
    m_bar = (nu + 1.0) ** 2
    c1 = 1.0 - 2.0 ** (-2.0 * epsilon)
    c2 = (3.0 + 2.0 ** (-8.0 * epsilon) - 4.0 ** (1.0 - epsilon)) / 2.0
    m_hat = (
        nu * nu
        + nu
        + (2.0 * nu + 1.0) * c1 * (theta**2 + eta**2)
        + c2 * (theta**4 + eta**4)
    )
    return m_bar, m_hat
