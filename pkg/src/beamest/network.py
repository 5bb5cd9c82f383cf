"""Beam-splitter networks: single rotations, builders, noise, compilation.

A splitter with angle tau acting on modes (j, k) applies the same Givens
rotation to the a- and b-amplitude vectors:

    a_j -> a_j cos(tau) + a_k sin(tau)
    a_k -> -a_j sin(tau) + a_k cos(tau)

Networks are chronological op lists (first element applied first).  Two
concentration layouts are provided: a cascade that folds modes 2..n into
mode 1 one at a time, and a balanced binary tree over n = 2^m modes whose
stages can be truncated.  Both send the signal to mode 1 with row weight
1/sqrt(n) per input when run noiselessly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import AmplitudeEnsemble, RandomSource

__all__ = [
    "BeamSplitterOp",
    "Network",
    "NoiseSpec",
    "apply_op",
    "apply_network",
    "cascade_network",
    "binary_tree_network",
    "tree_stages",
    "perturb",
    "network_matrix",
    "network_to_text",
    "network_from_text",
]


@dataclass(frozen=True)
class BeamSplitterOp:
    """One splitter: 1-based mode pair (j, k), j != k, and its angle."""

    j: int
    k: int
    tau: float

    def __post_init__(self) -> None:
        if self.j < 1 or self.k < 1:
            raise ValueError("mode indices are 1-based")
        if self.j == self.k:
            raise ValueError("a splitter needs two distinct modes")


@dataclass(frozen=True)
class Network:
    """Ordered splitter list; ops[0] is applied first."""

    ops: tuple[BeamSplitterOp, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ops", tuple(self.ops))

    @property
    def n_min(self) -> int:
        """Smallest mode count this network can act on."""
        return max((max(op.j, op.k) for op in self.ops), default=1)

    def __add__(self, other: "Network") -> "Network":
        return Network(self.ops + other.ops)


@dataclass(frozen=True)
class NoiseSpec:
    """Angle jitter level: each angle gets variance epsilon * log(2)."""

    epsilon: float

    def __post_init__(self) -> None:
        if not (self.epsilon >= 0):
            raise ValueError("epsilon must be >= 0")

    @property
    def angle_sd(self) -> float:
        return math.sqrt(self.epsilon * math.log(2.0))


def apply_op(ens: AmplitudeEnsemble, op: BeamSplitterOp) -> AmplitudeEnsemble:
    """Apply one splitter, returning a new ensemble (input untouched)."""
    n = ens.n
    if op.j > n or op.k > n:
        raise ValueError(f"op touches mode beyond n={n}")
    out = ens.copy()
    c, s = math.cos(op.tau), math.sin(op.tau)
    j, k = op.j - 1, op.k - 1
    aj, ak = ens.a[j], ens.a[k]
    bj, bk = ens.b[j], ens.b[k]
    out.a[j] = aj * c + ak * s
    out.a[k] = -aj * s + ak * c
    out.b[j] = bj * c + bk * s
    out.b[k] = -bj * s + bk * c
    return out


def apply_network(ens: AmplitudeEnsemble, net: Network) -> AmplitudeEnsemble:
    """Run the whole op list in order."""
    if net.n_min > ens.n:
        raise ValueError("network touches modes beyond the ensemble")
    out = ens.copy()
    for op in net.ops:
        c, s = math.cos(op.tau), math.sin(op.tau)
        j, k = op.j - 1, op.k - 1
        aj, ak = out.a[j], out.a[k]
        bj, bk = out.b[j], out.b[k]
        out.a[j] = aj * c + ak * s
        out.a[k] = -aj * s + ak * c
        out.b[j] = bj * c + bk * s
        out.b[k] = -bj * s + bk * c
    return out


def cascade_network(n: int) -> Network:
    """Sequential concentrator: fold mode t+1 into mode 1 with tan(tau)=1/sqrt(t).

    After op t the running mode-1 amplitude is (a_1 + ... + a_{t+1}) / sqrt(t+1),
    so the full cascade leaves (sum a_i) / sqrt(n) on mode 1.
    """
    if n < 2:
        raise ValueError("need at least two modes")
    ops = [
        BeamSplitterOp(1, t + 1, math.atan(1.0 / math.sqrt(t)))
        for t in range(1, n)
    ]
    return Network(tuple(ops))


def tree_stages(m: int, stages: int | None = None) -> list[list[tuple[int, int]]]:
    """Mode pairs of the binary-tree stages on n = 2^m modes.

    Stage t (1-based) pairs (j, j + 2^(t-1)) for every j = 1 mod 2^t, in
    increasing j.  Passing stages=s keeps only the first s stages.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    s = m if stages is None else stages
    if not 0 <= s <= m:
        raise ValueError(f"stage count must lie in 0..{m}")
    n = 1 << m
    out = []
    for t in range(1, s + 1):
        half, step = 1 << (t - 1), 1 << t
        out.append([(j, j + half) for j in range(1, n + 1, step)])
    return out


def binary_tree_network(m: int, stages: int | None = None) -> Network:
    """Balanced-tree concentrator on n = 2^m modes, all angles pi/4.

    stages=s truncates to the first s stages, leaving one concentrated
    leader per block of 2^s consecutive modes (modes 1, 2^s + 1, ...).
    """
    quarter = math.pi / 4.0
    ops = [
        BeamSplitterOp(j, k, quarter)
        for stage in tree_stages(m, stages)
        for j, k in stage
    ]
    return Network(tuple(ops))


def perturb(net: Network, noise: NoiseSpec, rng: RandomSource) -> Network:
    """Replace each angle by an independent Normal(nominal, epsilon*log 2) draw."""
    sd = noise.angle_sd
    draws = rng.generator.standard_normal(len(net.ops))
    return Network(
        tuple(
            BeamSplitterOp(op.j, op.k, op.tau + sd * d)
            for op, d in zip(net.ops, draws)
        )
    )


def network_matrix(net: Network, n: int) -> np.ndarray:
    """Compile the op list into the single orthogonal matrix it implements.

    Returns R with (applied network)(v) = R @ v for any amplitude vector v.
    """
    if net.n_min > n:
        raise ValueError("network touches modes beyond n")
    r = np.eye(n, dtype=np.float64)
    for op in net.ops:
        c, s = math.cos(op.tau), math.sin(op.tau)
        j, k = op.j - 1, op.k - 1
        rj = r[j].copy()
        r[j] = c * rj + s * r[k]
        r[k] = -s * rj + c * r[k]
    return r


def network_to_text(net: Network) -> str:
    """Serialise as one 'j,k,tau' line per op (tau in shortest repr)."""
    return "".join(f"{op.j},{op.k},{op.tau!r}\n" for op in net.ops)


def network_from_text(text: str) -> Network:
    """Inverse of network_to_text; blank lines are ignored."""
    ops = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        j, k, tau = line.split(",")
        ops.append(BeamSplitterOp(int(j), int(k), float(tau)))
    return Network(tuple(ops))
