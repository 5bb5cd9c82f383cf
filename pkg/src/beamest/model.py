"""Gaussian-amplitude mode model and the two measurement channels.

Each of the n modes carries a pair of real amplitudes (a_j, b_j) drawn
independently from Normal(theta, nu/2) and Normal(eta, nu/2).  A mode is
read out either by heterodyne detection, which returns a Gaussian-smeared
pair (x_j, y_j) with variance 1/2 around the amplitudes, or by photon
counting, which returns z_j ~ Poisson(a_j^2 + b_j^2).

Marginally (amplitudes integrated out, zero-mean counting modes) the
heterodyne outcomes are Normal with variance (nu+1)/2 and the counts are
geometric with mean nu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelParams",
    "AmplitudeEnsemble",
    "SelectionSet",
    "Observations",
    "RandomSource",
    "mix_seed",
    "sample_amplitudes",
    "measure",
    "conditional_log_density",
    "marginal_log_density",
]

_LOG_PI = math.log(math.pi)


@dataclass(frozen=True)
class ModelParams:
    """True parameter triple: two locations and one common scale.

    nu is the variance *doubled*, i.e. each amplitude has variance nu/2;
    nu = 0 collapses the prior to the point (theta, eta).
    """

    theta: float
    eta: float
    nu: float

    def __post_init__(self) -> None:
        if not (self.nu >= 0):
            raise ValueError(f"nu must be >= 0, got {self.nu}")


@dataclass
class AmplitudeEnsemble:
    """Amplitude pairs for n modes, kept as two aligned float64 vectors."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.a.shape != self.b.shape or self.a.ndim != 1:
            raise ValueError("a and b must be 1-d arrays of equal length")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def copy(self) -> "AmplitudeEnsemble":
        return AmplitudeEnsemble(self.a.copy(), self.b.copy())


@dataclass(frozen=True)
class SelectionSet:
    """Sorted 1-based indices of the heterodyne-measured modes."""

    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        idx = tuple(sorted(self.indices))
        if len(set(idx)) != len(idx):
            raise ValueError("selection indices must be distinct")
        if idx and idx[0] < 1:
            raise ValueError("selection indices are 1-based")
        object.__setattr__(self, "indices", idx)

    def complement(self, n: int) -> tuple[int, ...]:
        chosen = set(self.indices)
        return tuple(j for j in range(1, n + 1) if j not in chosen)


@dataclass
class Observations:
    """Measurement record: heterodyne triples and counting pairs.

    het holds (index, x, y) and counts holds (index, z), both sorted by
    index; together the index sets must partition 1..n.
    """

    het: list[tuple[int, float, float]]
    counts: list[tuple[int, int]]

    def __post_init__(self) -> None:
        self.het = sorted((int(j), float(x), float(y)) for j, x, y in self.het)
        self.counts = sorted((int(k), int(z)) for k, z in self.counts)
        n = len(self.het) + len(self.counts)
        seen = [j for j, _, _ in self.het] + [k for k, _ in self.counts]
        if sorted(seen) != list(range(1, n + 1)):
            raise ValueError("heterodyne and counting indices must partition 1..n")
        if any(z < 0 for _, z in self.counts):
            raise ValueError("counts must be non-negative")

    @property
    def n(self) -> int:
        return len(self.het) + len(self.counts)


def mix_seed(*parts: int) -> int:
    """Mix integers into one 64-bit value (splitmix64 finalizer per part).

    Used to derive disjoint sub-seeds for grid cells so that every cell of
    an experiment sweep consumes its own counter-based streams.
    """
    h = 0x9E3779B97F4A7C15
    for p in parts:
        h = (h ^ (int(p) & 0xFFFFFFFFFFFFFFFF)) * 0xBF58476D1CE4E5B9 % (1 << 64)
        h = (h ^ (h >> 27)) * 0x94D049BB133111EB % (1 << 64)
        h ^= h >> 31
    return h


@dataclass
class RandomSource:
    """Counter-based random stream addressed by (seed, stream_id).

    Identical (seed, stream_id) pairs always yield the identical value
    sequence, independently of any other stream, which is what makes
    block-parallel Monte Carlo reproducible at any worker count.  Streams
    are backed by Philox keyed with the pair, so distinct ids are
    statistically independent by construction.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            key = np.array(
                [self.seed & 0xFFFFFFFFFFFFFFFF, self.stream_id & 0xFFFFFFFFFFFFFFFF],
                dtype=np.uint64,
            )
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def child(self, k: int) -> "RandomSource":
        """Derived stream for sub-task k (hash-mixed, collision-free in 64 bits)."""
        return RandomSource(self.seed, mix_seed(self.stream_id, k))


def sample_amplitudes(params: ModelParams, n: int, rng: RandomSource) -> AmplitudeEnsemble:
    """Draw an n-mode ensemble from the i.i.d. Gaussian prior.

    a is drawn before b; callers that re-implement this vectorised must
    keep that order to stay stream-compatible.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    g = rng.generator
    sd = math.sqrt(params.nu / 2.0)
    a = params.theta + sd * g.standard_normal(n)
    b = params.eta + sd * g.standard_normal(n)
    return AmplitudeEnsemble(a, b)


def measure(ens: AmplitudeEnsemble, sel: SelectionSet, rng: RandomSource) -> Observations:
    """Measure every mode: heterodyne on sel, photon counting elsewhere.

    Draw order is x over sel, then y over sel, then the Poisson counts,
    matching the vectorised Monte Carlo kernels.
    """
    n = ens.n
    if sel.indices and sel.indices[-1] > n:
        raise ValueError("selection index exceeds ensemble size")
    g = rng.generator
    het_idx = np.array(sel.indices, dtype=np.int64) - 1
    cnt_idx = np.array(sel.complement(n), dtype=np.int64) - 1
    sd = math.sqrt(0.5)
    x = ens.a[het_idx] + sd * g.standard_normal(het_idx.size)
    y = ens.b[het_idx] + sd * g.standard_normal(het_idx.size)
    lam = ens.a[cnt_idx] ** 2 + ens.b[cnt_idx] ** 2
    z = g.poisson(lam)
    het = [(int(j + 1), float(xv), float(yv)) for j, xv, yv in zip(het_idx, x, y)]
    counts = [(int(k + 1), int(zv)) for k, zv in zip(cnt_idx, z)]
    return Observations(het=het, counts=counts)


def conditional_log_density(obs: Observations, ens: AmplitudeEnsemble, sel: SelectionSet) -> float:
    """Log density of the outcomes given a fixed amplitude configuration.

    Heterodyne modes contribute -(x-a)^2 - (y-b)^2 - log(pi); counting
    modes contribute the Poisson log pmf with mean a^2 + b^2 using the
    0^0 = 1 convention.  Returns -inf when some z > 0 has zero mean.
    """
    n = ens.n
    if obs.n != n:
        raise ValueError("observation record and ensemble disagree on n")
    chosen = set(sel.indices)
    if {j for j, _, _ in obs.het} != chosen:
        raise ValueError("heterodyne indices do not match the selection set")
    total = 0.0
    for j, x, y in obs.het:
        a, b = ens.a[j - 1], ens.b[j - 1]
        total += -((x - a) ** 2) - (y - b) ** 2 - _LOG_PI
    for k, z in obs.counts:
        lam = ens.a[k - 1] ** 2 + ens.b[k - 1] ** 2
        total += -lam - math.lgamma(z + 1)
        if z > 0:
            if lam == 0.0:
                return float("-inf")
            total += z * math.log(lam)
    return total


def marginal_log_density(obs: Observations, params: ModelParams, sel: SelectionSet) -> float:
    """Log density with the amplitude prior integrated out.

    Valid only for the untransformed independent setting in which the
    heterodyne modes carry means (theta, eta) and the counting modes carry
    mean zero: then x, y are Normal(theta resp. eta, (nu+1)/2) and each
    count is geometric, P(z) = (1/(nu+1)) (nu/(nu+1))^z.
    """
    chosen = set(sel.indices)
    if {j for j, _, _ in obs.het} != chosen:
        raise ValueError("heterodyne indices do not match the selection set")
    nu = params.nu
    var = (nu + 1.0) / 2.0
    total = 0.0
    for _, x, y in obs.het:
        total += -((x - params.theta) ** 2) / (2 * var) - 0.5 * math.log(2 * math.pi * var)
        total += -((y - params.eta) ** 2) / (2 * var) - 0.5 * math.log(2 * math.pi * var)
    log_fail = math.log1p(nu)  # log(nu + 1)
    for _, z in obs.counts:
        total -= log_fail
        if z > 0:
            if nu == 0.0:
                return float("-inf")
            total += z * (math.log(nu) - log_fail)
    return total
