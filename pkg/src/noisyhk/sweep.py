"""(R, sigma) phase-diagram sweeps over the agent or density simulator."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import ModelParams, derive_seed, detect_clusters, disordered_reference, order_parameter
from .sde import UnstableStepError, simulate
from .spectral import BlowUpError, SolverConfig, evolve, density_clusters, density_order_parameter
from .stability import classify_phase_region

COLUMNS = ["R", "sigma", "replicate", "seed", "Q_mean", "Q_std", "n_clusters", "phase_label", "failed", "wall_ms"]


class NoTransitionError(LookupError):
    pass


def grid(start: float, stop: float, count: int) -> list[float]:
    """``count`` equispaced values with inclusive endpoints."""
    if count < 1:
        raise ValueError("grid count must be >= 1")
    if count == 1:
        return [float(start)]
    return [float(v) for v in np.linspace(start, stop, count)]


@dataclass
class SweepSpec:
    R_values: list[float]
    sigma_values: list[float]
    engine: str = "sde"
    T: float = 2000.0
    window_fraction: float = 0.25
    replicates: int = 1
    seed: int = 0
    N: int = 100
    h: float = 1e-2
    L: float = 1.0
    record_stride: int = 100
    init: str | None = None
    # density engine only
    m: int = 128
    pde_h: float = 1e-3
    record_every: float = 1.0

    def __post_init__(self):
        self.R_values = [float(r) for r in self.R_values]
        self.sigma_values = [float(s) for s in self.sigma_values]
        for name, vals in (("R", self.R_values), ("sigma", self.sigma_values)):
            if not vals:
                raise ValueError(f"{name} grid is empty")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"{name} grid must be strictly increasing")
        if self.engine not in ("sde", "pde"):
            raise ValueError(f"engine must be 'sde' or 'pde', got {self.engine!r}")
        if not 0 < self.window_fraction <= 1:
            raise ValueError("window_fraction must lie in (0, 1]")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.engine == "pde" and self.replicates != 1:
            raise ValueError("replicates are only meaningful for the sde engine")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.init is None:
            self.init = "uniform-random" if self.engine == "sde" else "uniform-plus-noise(1e-3)"

    def cells(self):
        for i, R in enumerate(self.R_values):
            for j, s in enumerate(self.sigma_values):
                for r in range(self.replicates):
                    yield i, j, r, R, s

    def cell_seed(self, i: int, j: int, r: int) -> int:
        return derive_seed(self.seed, i, j, r)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PhaseDiagramTable:
    rows: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def at_R(self, R: float) -> list[dict]:
        return [r for r in self.rows if math.isclose(r["R"], R, rel_tol=0, abs_tol=1e-12)]

    def to_csv(self, path, timing: bool = False) -> None:
        """Write the table; wall times are zeroed unless ``timing`` so reruns are byte-identical."""
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for r in self.rows:
                w.writerow([
                    _fmt(r["R"]), _fmt(r["sigma"]), r["replicate"], r["seed"], _fmt(r["Q_mean"]),
                    _fmt(r["Q_std"]), r["n_clusters"], r["phase_label"], int(r["failed"]),
                    int(r["wall_ms"]) if timing else 0,
                ])

    @classmethod
    def from_csv(cls, path) -> "PhaseDiagramTable":
        with open(Path(path), newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != COLUMNS:
                raise ValueError(f"not a phase-diagram CSV: columns {reader.fieldnames}")
            rows = []
            for r in reader:
                rows.append({
                    "R": float(r["R"]), "sigma": float(r["sigma"]), "replicate": int(r["replicate"]),
                    "seed": int(r["seed"]), "Q_mean": float(r["Q_mean"]), "Q_std": float(r["Q_std"]),
                    "n_clusters": int(r["n_clusters"]), "phase_label": r["phase_label"],
                    "failed": bool(int(r["failed"])), "wall_ms": int(r["wall_ms"]),
                })
        return cls(rows)


def _fmt(v: float) -> str:
    return "nan" if v != v else f"{v:.10g}"


def run_cell(spec: SweepSpec, i: int, j: int, r: int) -> dict:
    R, sigma = spec.R_values[i], spec.sigma_values[j]
    seed = spec.cell_seed(i, j, r)
    t0 = time.perf_counter()
    row = {"R": R, "sigma": sigma, "replicate": r, "seed": seed, "phase_label": classify_phase_region(R, sigma).label}
    try:
        q, counts = (_run_sde if spec.engine == "sde" else _run_pde)(spec, R, sigma, seed)
        row.update(Q_mean=float(np.mean(q)), Q_std=float(np.std(q)),
                   n_clusters=int(np.bincount(counts).argmax()), failed=False)
    except (BlowUpError, UnstableStepError):
        row.update(Q_mean=math.nan, Q_std=math.nan, n_clusters=0, failed=True)
    row["wall_ms"] = int(round(1000 * (time.perf_counter() - t0)))
    return row


def _run_sde(spec, R, sigma, seed):
    params = ModelParams(N=spec.N, R=R, sigma=sigma, L=spec.L, seed=seed, h=spec.h)
    traj = simulate(params, spec.T, spec.init, record_stride=spec.record_stride)
    window = traj.window((1 - spec.window_fraction) * traj.times[-1])
    q = [order_parameter(p, R, spec.L) for p in window.positions]
    counts = [len(detect_clusters(p, R, spec.L)) for p in window.positions]
    return q, counts


def _run_pde(spec, R, sigma, seed):
    params = ModelParams(N=spec.N, R=R, sigma=sigma, L=spec.L, seed=seed, h=spec.h)
    config = SolverConfig(m=spec.m, h=spec.pde_h)
    q, counts = [], []
    t_start = (1 - spec.window_fraction) * spec.T

    def collect(state):
        if state.t >= t_start - 1e-9:
            q.append(density_order_parameter(state, R))
            counts.append(len(density_clusters(state.sample(config.grid))))

    evolve(spec.init, config, params, spec.T, record_every=spec.record_every, callback=collect)
    return q, counts


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> PhaseDiagramTable:
    """Run every (R, sigma, replicate) cell; row order never depends on scheduling."""
    tasks = [(spec, i, j, r) for i, j, r, _, _ in spec.cells()]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell_args, tasks))
    else:
        rows = [run_cell(*t) for t in tasks]
    return PhaseDiagramTable(rows)


def write_sidecar(spec: SweepSpec, path) -> None:
    meta = {"spec": spec.to_dict(), "version": __version__, "columns": COLUMNS}
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def transition_reference(spec_or_N, R: float, engine: str = "sde") -> float:
    """Order parameter of the disordered state for a sweep at radius R."""
    if engine == "pde":
        return min(2 * R, 1.0)
    return disordered_reference(int(spec_or_N), R)


def detect_transition(table: PhaseDiagramTable, R: float, reference: float) -> float:
    """Sigma where Q_mean first falls through the midpoint between 1 and ``reference``.

    Scans upward in sigma for the first bracket with Q above the midpoint on
    the left and below it on the right, and interpolates linearly inside it.
    """
    rows = [r for r in table.at_R(R) if not r["failed"]]
    sigmas = sorted({r["sigma"] for r in rows})
    if len(sigmas) < 5:
        raise ValueError(f"need a sigma sweep with >= 5 points at R={R}, got {len(sigmas)}")
    q = [float(np.mean([r["Q_mean"] for r in rows if r["sigma"] == s])) for s in sigmas]
    mid = 0.5 * (1.0 + reference)
    for (s0, q0), (s1, q1) in zip(zip(sigmas, q), zip(sigmas[1:], q[1:])):
        if q0 >= mid > q1:
            return s0 + (q0 - mid) * (s1 - s0) / (q0 - q1)
    raise NoTransitionError(f"no transition in range at R={R}")


PRESETS = {
    "ci": dict(R_values=grid(0.05, 0.25, 5), sigma_values=grid(0.01, 0.13, 5), T=200.0),
    "transition": dict(R_values=[0.05], sigma_values=grid(0.005, 0.1, 10), T=2000.0),
    "pd": dict(R_values=grid(0.02, 0.5, 25), sigma_values=grid(0.005, 0.3, 30), N=300, T=1e5),
}


def preset(name: str, **overrides) -> SweepSpec:
    if name not in PRESETS:
        raise KeyError(f"unknown sweep preset {name!r}; choose from {sorted(PRESETS)}")
    return SweepSpec(**{**PRESETS[name], **overrides})
