"""Finite-N noisy bounded-confidence dynamics on the circle (Euler-Maruyama)."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    TIE_TOL,
    AgentState,
    ModelParams,
    circular_mean,
    detect_clusters,
    order_parameter,
    seeded_stream,
    signed_displacement,
    wrap,
)


class UnstableStepError(RuntimeError):
    pass


def drift_all(positions, params: ModelParams) -> np.ndarray:
    """Velocities of every agent: (1/N) sum over neighbours j of (x_j - x_i).

    Neighbour sums come from prefix sums over the sorted positions laid out
    on three copies of the circle, so the cost is O(N log N).
    """
    x = np.asarray(positions, dtype=float)
    L, R = params.L, params.R
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ext = np.concatenate([xs - L, xs, xs + L])
    csum = np.concatenate([[0.0], np.cumsum(ext)])
    tol = TIE_TOL * L
    if R >= L / 2 - tol:
        # whole circle; displacements live in (-L/2, L/2]
        lo = np.searchsorted(ext, xs - L / 2, side="right")
        hi = lo + xs.size
    else:
        lo = np.searchsorted(ext, xs - R - tol, side="left")
        hi = np.searchsorted(ext, xs + R + tol, side="right")
    v = np.empty_like(x)
    v[order] = (csum[hi] - csum[lo] - (hi - lo) * xs) / x.size
    return v


def drift(positions, i: int, params: ModelParams) -> float:
    x = np.asarray(positions, dtype=float)
    if not 0 <= i < x.size:
        raise IndexError(f"agent index {i} out of range")
    d = signed_displacement(x[i], x, params.L)
    d[np.abs(d) > params.R + TIE_TOL * params.L] = 0.0
    return float(d.sum() / x.size)


def step(state: AgentState, params: ModelParams, rng: np.random.Generator) -> AgentState:
    """One Euler-Maruyama step; positions are reduced mod L afterwards."""
    v = drift_all(state.positions, params)
    h = params.h
    if np.max(np.abs(v)) * h >= params.L / 2:
        raise UnstableStepError(f"unstable step: |drift| * h reaches L/2 at t={state.t:g}")
    x = state.positions + v * h
    if params.sigma > 0:
        x = x + params.sigma * math.sqrt(h) * rng.standard_normal(x.size)
    return AgentState(wrap(x, params.L), state.t + h)


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (n_snapshots, N)
    record_stride: int
    h: float

    @property
    def snapshots(self) -> list[AgentState]:
        return [AgentState(p, t) for t, p in zip(self.times, self.positions)]

    @property
    def final(self) -> AgentState:
        return AgentState(self.positions[-1].copy(), float(self.times[-1]))

    def window(self, t_start: float, t_end: float = math.inf) -> "Trajectory":
        sel = (self.times >= t_start - 1e-9) & (self.times <= t_end + 1e-9)
        return Trajectory(self.times[sel], self.positions[sel], self.record_stride, self.h)

    def to_csv(self, path) -> None:
        write_trajectory_csv(self, path)


_INIT_RE = re.compile(r"^\s*([a-z\-]+)\s*(?:\((.*)\))?\s*$")


def initial_positions(init, params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    """Named initializers: ``uniform-random``, ``point(x0)``, ``gaussian(x0, s)``."""
    if isinstance(init, AgentState):
        x = init.positions
    elif not isinstance(init, str):
        x = np.asarray(init, dtype=float)
    else:
        match = _INIT_RE.match(init)
        name, arglist = match.groups() if match else (init, None)
        args = [float(a) for a in arglist.split(",")] if arglist else []
        if name == "uniform-random" and not args:
            x = rng.uniform(0.0, params.L, params.N)
        elif name == "point" and len(args) == 1:
            x = np.full(params.N, args[0])
        elif name == "gaussian" and len(args) == 2:
            x = args[0] + args[1] * rng.standard_normal(params.N)
        else:
            raise ValueError(f"unknown initializer {init!r}")
    if x.shape != (params.N,):
        raise ValueError(f"initial state has {x.size} agents, expected N={params.N}")
    return wrap(x, params.L)


def simulate(params: ModelParams, T: float, init="uniform-random", record_stride: int = 100,
             stream_id: int = 0) -> Trajectory:
    """Run ceil(T/h) steps from ``init`` and keep every ``record_stride``-th state.

    The initial state is always recorded, as is the final one.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    rng = seeded_stream(params.seed, stream_id)
    state = AgentState(initial_positions(init, params, rng), 0.0)
    n_steps = int(math.ceil(T / params.h - 1e-9))
    n_rec = n_steps // record_stride + 1 + (1 if n_steps % record_stride else 0)
    times = np.empty(n_rec)
    out = np.empty((n_rec, params.N))
    times[0], out[0] = 0.0, state.positions
    r = 1
    for i in range(1, n_steps + 1):
        state = step(state, params, rng)
        if i % record_stride == 0 or i == n_steps:
            # use i * h rather than the accumulated clock so snapshot times are exact multiples
            times[r], out[r] = i * params.h, state.positions
            r += 1
    return Trajectory(times[:r], out[:r], record_stride, params.h)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    N = traj.positions.shape[1]
    header = ",".join(["t"] + [f"x{i}" for i in range(N)])
    with open(Path(path), "w", newline="") as fh:
        fh.write(header + "\n")
        for t, row in zip(traj.times, traj.positions):
            fh.write(",".join(f"{v:.9g}" for v in (t, *row)) + "\n")


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(Path(path)) as fh:
        header = fh.readline().strip().split(",")
    if not header or header[0] != "t" or header[1:] != [f"x{i}" for i in range(len(header) - 1)]:
        raise ValueError("not a trajectory CSV (expected header t,x0,x1,...)")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:]


# --- clustered-phase moments -------------------------------------------------


@dataclass(frozen=True)
class ClusterMoments:
    n: int
    eigen_large: float
    eigen_small: float
    var_ii: float


def cluster_moment_prediction(n: int, params: ModelParams) -> ClusterMoments:
    """Stationary covariance of a linearised n-agent cluster among N agents.

    The covariance is (N sigma^2 / 2n) S S^T with S = I + J/N (J all ones).
    """
    N, s2 = params.N, params.sigma**2
    if not 1 <= n <= N:
        raise ValueError(f"cluster population n must lie in 1..{N}, got {n}")
    if params.sigma <= 0:
        raise ValueError("moment prediction needs sigma > 0")
    scale = N * s2 / (2 * n)
    return ClusterMoments(
        n=n,
        eigen_large=(1 + n / (2 * N) + N / (2 * n)) * s2,
        eigen_small=scale,
        var_ii=scale * ((1 + 1 / N) ** 2 + (n - 1) / N**2),
    )


def fluctuation_about_mean(positions: np.ndarray, L: float = 1.0) -> float:
    """Mean squared circular displacement of agents from their circular mean.

    ``positions`` may be one snapshot or a stack of snapshots (averaged).
    """
    p = np.atleast_2d(positions)
    total = 0.0
    for row in p:
        d = signed_displacement(circular_mean(row, L), row, L)
        total += float(np.mean(d * d))
    return total / p.shape[0]


def trajectory_summary(traj: Trajectory, params: ModelParams, n_windows: int = 4) -> dict:
    """Final order parameter and cluster statistics, plus modal cluster counts per window."""
    final = traj.positions[-1]
    cs = detect_clusters(final, params.R, params.L)
    counts = [len(detect_clusters(p, params.R, params.L)) for p in traj.positions]
    chunks = np.array_split(np.asarray(counts), max(1, min(n_windows, len(counts))))
    return {
        "t_final": float(traj.times[-1]),
        "Q_final": order_parameter(final, params.R, params.L),
        "n_clusters": len(cs),
        "cluster_sizes": cs.sizes,
        "cluster_centers": [c.center for c in cs],
        "cluster_widths": cs.widths,
        "window_cluster_counts": [int(np.bincount(c).argmax()) for c in chunks],
    }
