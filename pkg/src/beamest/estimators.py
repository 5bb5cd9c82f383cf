"""The three estimator families for (theta, eta, nu).

* naive: sample means and a bias-corrected sample variance over heterodyne
  outcomes from all n untransformed modes.
* hayashi: heterodyne only mode 1 after a concentrating network, count the
  rest; the count average estimates nu without the +1 measurement-noise
  penalty.
* corrected: heterodyne the block leaders of a tree truncated after m0
  stages; unbiased in theta/eta under angle noise of level epsilon, with a
  cross-product correction term restoring unbiasedness in nu.

Scale estimates are reported as-is and may go negative in finite samples;
nothing here clamps them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Observations, SelectionSet

__all__ = [
    "Estimates",
    "naive_estimate",
    "naive_covariance",
    "hayashi_estimate",
    "hayashi_covariance",
    "corrected_selection",
    "cross_weight_parts",
    "cross_weight",
    "corrected_estimate",
    "naive_batch",
    "hayashi_batch",
    "corrected_batch",
]

_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class Estimates:
    theta: float
    eta: float
    nu: float

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.eta, self.nu], dtype=np.float64)


# ---------------------------------------------------------------------------
# naive family


def naive_batch(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised naive estimates; x, y have shape (..., n)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[-1]
    if n < 2:
        raise ValueError("naive scale estimate needs n >= 2")
    theta = x.sum(axis=-1) / n
    eta = y.sum(axis=-1) / n
    nu = (
        ((x - theta[..., None]) ** 2).sum(axis=-1)
        + ((y - eta[..., None]) ** 2).sum(axis=-1)
    ) / (n - 1) - 1.0
    return theta, eta, nu


def naive_estimate(obs: Observations) -> Estimates:
    """Naive estimates from an all-heterodyne observation record."""
    if obs.counts:
        raise ValueError("naive estimation expects every mode heterodyned")
    x = np.array([v for _, v, _ in obs.het])
    y = np.array([v for _, _, v in obs.het])
    theta, eta, nu = naive_batch(x, y)
    return Estimates(float(theta), float(eta), float(nu))


def naive_covariance(nu: float, n: int) -> np.ndarray:
    """Asymptotic covariance of the naive triple in the noiseless model."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return np.diag(
        [
            (nu + 1.0) / (2.0 * n),
            (nu + 1.0) / (2.0 * n),
            (nu + 1.0) ** 2 / (n - 1.0),
        ]
    )


# ---------------------------------------------------------------------------
# hayashi family (concentrate-then-count, heterodyne mode 1 only)


def hayashi_batch(
    x1: np.ndarray, y1: np.ndarray, z: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised estimates from mode-1 heterodyne plus counts z (..., n-1)."""
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[-1] + 1
    root_n = math.sqrt(n)
    theta = np.asarray(x1, dtype=np.float64) / root_n
    eta = np.asarray(y1, dtype=np.float64) / root_n
    nu = z.sum(axis=-1) / (n - 1)
    return theta, eta, nu


def hayashi_estimate(obs: Observations) -> Estimates:
    if [j for j, _, _ in obs.het] != [1]:
        raise ValueError("hayashi estimation expects heterodyne on mode 1 only")
    _, x1, y1 = obs.het[0]
    z = np.array([zv for _, zv in obs.counts], dtype=np.float64)
    theta, eta, nu = hayashi_batch(np.float64(x1), np.float64(y1), z)
    return Estimates(float(theta), float(eta), float(nu))


def hayashi_covariance(nu: float, n: int) -> np.ndarray:
    """Covariance of the concentrated triple under a noiseless network.

    Strictly dominated by the naive covariance: the difference is
    diag(0, 0, (nu+1)/(n-1)).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    return np.diag(
        [
            (nu + 1.0) / (2.0 * n),
            (nu + 1.0) / (2.0 * n),
            nu * (nu + 1.0) / (n - 1.0),
        ]
    )


# ---------------------------------------------------------------------------
# corrected family


def corrected_selection(m: int, m0: int) -> SelectionSet:
    """Leaders of the 2^(m-m0) blocks after m0 tree stages: 1, 2^m0+1, ..."""
    if not 0 <= m0 <= m:
        raise ValueError("need 0 <= m0 <= m")
    step = 1 << m0
    return SelectionSet(tuple(range(1, (1 << m) + 1, step)))


def cross_weight_parts(m: int, m0: int, epsilon: float) -> tuple[float, float]:
    """Numerator/denominator pair (alpha, beta) of the cross-product weight.

    Evaluated exactly as displayed; beta vanishes at m0 = m, where the
    cross term has no pairs to act on, so that case is rejected.
    """
    if not 0 <= m0 < m:
        raise ValueError("need 0 <= m0 < m (no cross pairs exist at m0 = m)")
    e = epsilon
    alpha = 2.0 ** (-e - m - m0) * (
        2.0 ** ((2 + e) * m0)
        - 2.0 ** (1 + e + 2 * m0 + e * m0)
        + 2.0 ** (1 + e + m + 2 * m0 + e * m0)
        + 2.0 ** (2 * m0 + e * (2 + m0))
        - 2.0 ** (m + 2 * m0 + e * (2 + m0))
        - 8.0**m0
    )
    beta = (-2.0 + 2.0**e) * (-1.0 + 2.0**m) * (-(2.0**m) + 2.0**m0)
    return alpha, beta


def cross_weight(m: int, m0: int, epsilon: float) -> float:
    """Cancellation-safe alpha/beta.

    The raw alpha display sums six terms as large as 2^(m+2m0+2) with
    alternating signs; factoring out 2^(2m0 + eps*m0) leaves

        alpha = 2^(m0(1+eps) - eps - m)
                * [ (2^m - 1) 2^eps (2 - 2^eps) - (2^(m0(1-eps)) - 1) ]

    whose bracket is evaluated here through expm1 so the eps -> 1 removable
    zero of (2 - 2^eps) never degrades the quotient.  Equal to the display
    ratio wherever both are finite; reduces to 2^m0 / (n(n-1)) at eps = 0.
    """
    if not 0 <= m0 < m:
        raise ValueError("need 0 <= m0 < m")
    x = (epsilon - 1.0) * _LOG2
    big = 2.0**m - 1.0
    gap = 2.0**m - 2.0**m0
    core = math.expm1(x)  # (2^eps - 2) / 2
    if core == 0.0:
        bracket = (4.0 * big - m0) / (2.0 * big * gap)
    else:
        num = -big * 2.0 ** (1.0 + epsilon) * core - math.expm1(-m0 * x)
        den = -2.0 * core * big * gap
        bracket = num / den
    return 2.0 ** (m0 * (1.0 + epsilon) - epsilon - m) * bracket


def corrected_batch(
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    m: int,
    m0: int,
    epsilon: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised corrected estimates.

    x, y hold the block-leader heterodyne outcomes, shape (..., 2^(m-m0));
    z holds the remaining counts, shape (..., 2^m - 2^(m-m0)).
    """
    if not 0 <= m0 <= m:
        raise ValueError("need 0 <= m0 <= m")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    n = 1 << m
    n_sel = 1 << (m - m0)
    if x.shape[-1] != n_sel or z.shape[-1] != n - n_sel:
        raise ValueError("observation arrays do not match (m, m0)")

    # location part: sum of leaders over 2^(m - m0/2), rescaled by 2^(eps*m0/2)
    den = math.sqrt(4.0**m / 2.0**m0)
    mult = 2.0 ** (epsilon * m0 / 2.0)
    sx = x.sum(axis=-1)
    sy = y.sum(axis=-1)
    theta = sx / den * mult
    eta = sy / den * mult

    # scale part; the count sum is divided (not scaled by 1/(n-1)) so the
    # m0 = m case agrees bit for bit with hayashi_batch
    b = (n_sel - 1.0) / ((n - 1.0) * n_sel)
    c0 = (n - (1 << m0)) / ((1 << m0) * (n - 1.0))
    sq = (x**2).sum(axis=-1) + (y**2).sum(axis=-1)
    nu = z.sum(axis=-1) / (n - 1.0) + b * sq - c0
    if m0 < m:
        gamma = cross_weight(m, m0, epsilon)
        cross = sx**2 + sy**2 - sq
        nu = nu - gamma * cross
    return theta, eta, nu


def corrected_estimate(obs: Observations, m: int, m0: int, epsilon: float) -> Estimates:
    """Corrected estimates from a record measured with the block-leader selection."""
    n = 1 << m
    if obs.n != n:
        raise ValueError(f"expected n = 2^{m} = {n} modes, got {obs.n}")
    sel = corrected_selection(m, m0)
    if tuple(j for j, _, _ in obs.het) != sel.indices:
        raise ValueError("heterodyne indices do not match the block-leader selection")
    x = np.array([v for _, v, _ in obs.het])
    y = np.array([v for _, _, v in obs.het])
    z = np.array([zv for _, zv in obs.counts], dtype=np.float64)
    theta, eta, nu = corrected_batch(x, y, z, m, m0, epsilon)
    return Estimates(float(theta), float(eta), float(nu))
