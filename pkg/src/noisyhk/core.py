"""Shared types, circle geometry, random streams, order parameter and clustering."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Parameters shared by the agent and density simulators.

    ``sigma`` has units of length / sqrt(time); ``h`` is the time step.
    """

    N: int = 100
    R: float = 0.1
    sigma: float = 0.05
    L: float = 1.0
    seed: int = 0
    h: float = 1e-2

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N}")
        if self.L <= 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if not 0 < self.R <= self.L / 2:
            raise ValueError(f"R must lie in (0, L/2], got {self.R}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.h <= 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")

    @property
    def gamma(self) -> float:
        """Dimensionless noise ratio sigma^2 / 4R^3."""
        return self.sigma**2 / (4 * self.R**3)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass
class AgentState:
    positions: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 1:
            raise ValueError("positions must be one-dimensional")

    @property
    def N(self) -> int:
        return self.positions.size

    def validate(self, L: float = 1.0) -> None:
        p = self.positions
        if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p >= L):
            raise ValueError(f"positions must lie in [0, {L})")


@dataclass
class Cluster:
    """Agents (or grid cells of a density) forming one run on the circle.

    ``mass`` is the fraction of all agents, or of total density mass.
    """

    members: np.ndarray
    center: float
    width: float
    mass: float = 0.0

    @property
    def size(self) -> int:
        return int(self.members.size)


@dataclass
class ClusterSet:
    clusters: list[Cluster] = field(default_factory=list)
    gap_threshold: float = 0.0

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    @property
    def sizes(self) -> list[int]:
        return [c.size for c in self.clusters]

    @property
    def widths(self) -> list[float]:
        return [c.width for c in self.clusters]


# slack on the "<= R" neighbour test so grid-aligned ties do not depend on rounding
TIE_TOL = 1e-12


def wrap(x, L: float = 1.0):
    """Map positions into [0, L)."""
    y = np.mod(x, L)
    # np.mod returns L itself for tiny negative inputs
    y = np.where(y >= L, 0.0, y)
    return float(y) if y.ndim == 0 else y


def signed_displacement(a, b, L: float = 1.0):
    """Shortest signed displacement b - a on the circle, in (-L/2, L/2].

    Exact antipodes resolve to +L/2.
    """
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return d + L * np.floor(0.5 - d / L)


def periodic_distance(a, b, L: float = 1.0):
    """Circle distance min(|a - b|, L - |a - b|) after reducing both inputs mod L."""
    d = np.abs(np.mod(a, L) - np.mod(b, L))
    out = np.minimum(d, L - d)
    return float(out) if np.ndim(out) == 0 else out


def circular_mean(positions, L: float = 1.0, weights=None) -> float:
    """Angular mean of positions on a circle of length L, returned in [0, L)."""
    theta = 2 * np.pi * np.asarray(positions, dtype=float) / L
    w = np.ones_like(theta) if weights is None else np.asarray(weights, dtype=float)
    c = np.sum(w * np.cos(theta))
    s = np.sum(w * np.sin(theta))
    return float(wrap(np.arctan2(s, c) * L / (2 * np.pi), L))


def order_parameter(positions, R: float, L: float = 1.0) -> float:
    """Edge density of the communication graph, diagonal included.

    Sort-based pair count: O(N log N).
    """
    x = np.sort(np.mod(np.asarray(positions, dtype=float), L))
    n = x.size
    if n == 0:
        raise ValueError("no agents")
    if R >= L / 2:
        return 1.0
    # count ordered pairs (i, j) with circular gap j - i in [0, R], on a doubled line
    ext = np.concatenate([x, x + L])
    hi = np.searchsorted(ext, x + R + TIE_TOL * L, side="right")
    forward = np.minimum(hi - np.arange(n), n)  # includes i itself
    # each unordered off-diagonal pair is found once going forward
    pairs = int(np.sum(forward - 1))
    return (n + 2 * pairs) / n**2


def disordered_reference(N: int, R: float, L: float = 1.0) -> float:
    """Expected order parameter of N i.i.d. uniform agents."""
    return 1.0 / N + (1.0 - 1.0 / N) * min(2 * R / L, 1.0)


def detect_clusters(positions, gap_threshold: float, L: float = 1.0) -> ClusterSet:
    """Split agents into runs separated by circular gaps larger than ``gap_threshold``."""
    x = np.mod(np.asarray(positions, dtype=float), L)
    if x.size == 0:
        raise ValueError("no agents")
    if gap_threshold <= 0:
        raise ValueError("gap_threshold must be positive")
    order = np.argsort(x, kind="stable")
    xs = x[order]
    gaps = np.diff(np.concatenate([xs, [xs[0] + L]]))  # gaps[i] follows xs[i]
    cuts = np.flatnonzero(gaps > gap_threshold)
    clusters: list[Cluster] = []
    if cuts.size == 0:
        clusters.append(_make_cluster(order, xs, L, span=L - gaps.max()))
    else:
        # start each run just after a cut; the run wrapping past index 0 stays whole
        starts = (cuts + 1) % xs.size
        ends = np.roll(cuts, -1)
        for s, e in zip(starts, ends):
            idx = np.arange(s, e + 1) if s <= e else np.concatenate([np.arange(s, xs.size), np.arange(0, e + 1)])
            clusters.append(_make_cluster(order[idx], xs[idx], L, span=(xs[e] - xs[s]) % L))
    for c in clusters:
        c.mass = c.size / x.size
    clusters.sort(key=lambda c: c.center)
    return ClusterSet(clusters=clusters, gap_threshold=gap_threshold)


def _make_cluster(members, xs, L, span):
    # width is the circular span of the run, first to last member
    return Cluster(members=np.sort(members), center=circular_mean(xs, L), width=float(span))


def seeded_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent, reproducible PCG64 stream for ``(seed, stream_id)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(*keys: int) -> int:
    """Fold integer keys into one 64-bit seed."""
    lo, hi = np.random.SeedSequence(entropy=[int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)
