"""Command-line front end: ``noisyhk {sde,pde,stability,steady-state,sweep,plot}``.

Settings are resolved in the order preset -> JSON config -> ``HK_SEED`` ->
command-line flags.  Every command writes into ``--out`` and finishes with a
``manifest.json`` that lists the produced files and the resolved-config hash.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .core import ModelParams
from .sde import UnstableStepError, fluctuation_about_mean, simulate, trajectory_summary, write_trajectory_csv
from .spectral import (
    DIAG_COLUMNS,
    BlowUpError,
    SolverConfig,
    bump_variance,
    density_clusters,
    density_order_parameter,
    evolve,
)
from .stability import (
    NoUnstableModeError,
    classify_phase_region,
    critical_sigma_clustered,
    critical_sigma_disordered,
    expected_cluster_count,
    f_gamma,
    gamma_of,
    most_unstable_s,
    unstable_modes,
    zone_table,
)
from .steady_state import (
    ClustersInteractError,
    analysis_grid,
    asymptotic_profile,
    fixed_point_residual,
    multi_cluster_profile,
)
from .sweep import COLUMNS, PRESETS as SWEEP_PRESETS, NoTransitionError, SweepSpec, detect_transition, run_sweep
from .sweep import transition_reference, write_sidecar

CONFIG_VERSION = 1
EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class ConfigError(Exception):
    """Invalid configuration; reported with exit code 2."""


# --- config schema -------------------------------------------------------------

_NUM, _INT, _STR, _BOOL, _NUMS = "number", "integer", "string", "boolean", "list of numbers"

SCHEMA = {
    "model": {"N": _INT, "R": _NUM, "sigma": _NUM, "L": _NUM, "seed": _INT, "h": _NUM},
    "solver": {"m": _INT, "h": _NUM, "dealias": _BOOL, "grid": _INT},
    "run": {"T": _NUM, "init": _STR, "record_stride": _INT, "record_every": _NUM, "snapshot_every": _NUM},
    "sweep": {
        "R_values": _NUMS, "sigma_values": _NUMS, "engine": _STR, "T": _NUM, "window_fraction": _NUM,
        "replicates": _INT, "seed": _INT, "N": _INT, "h": _NUM, "L": _NUM, "record_stride": _INT,
        "init": _STR, "m": _INT, "pde_h": _NUM, "record_every": _NUM,
    },
    "steady_state": {"sigmas": _NUMS, "n": _INT, "centers": _NUMS},
}
TOP_LEVEL = {"version", "preset", "out", *SCHEMA}

RUN_DEFAULTS = {
    "sde": {"T": 200.0, "init": "uniform-random", "record_stride": 100},
    "pde": {"T": 100.0, "init": "uniform-plus-noise(1e-3)", "record_every": 1.0},
}

SDE_PRESETS = {
    "merge": {"model": {"N": 100, "sigma": 0.05, "R": 0.1}, "run": {"init": "uniform-random", "T": 500.0}},
    "disperse": {"model": {"N": 100, "sigma": 0.5, "R": 0.1}, "run": {"init": "point(0.5)", "T": 20.0}},
}
PDE_PRESETS = {
    "fig3-left": {"model": {"R": 0.2, "sigma": 0.02}, "run": {"init": "gaussian(0.5, 20)", "T": 100.0}},
    "fig3-middle": {"model": {"R": 0.05, "sigma": 0.005}, "solver": {"m": 512, "grid": 2048},
                    "run": {"init": "gaussian(0.5, 1)", "T": 200.0}},
    "fig3-right": {"model": {"R": 0.1, "sigma": 0.1}, "run": {"init": "gaussian(0.5, 40)", "T": 50.0}},
}


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _type_ok(kind, v):
    if kind == _NUM:
        return _is_num(v)
    if kind == _INT:
        return isinstance(v, int) and not isinstance(v, bool)
    if kind == _STR:
        return isinstance(v, str)
    if kind == _BOOL:
        return isinstance(v, bool)
    return isinstance(v, list) and all(_is_num(x) for x in v)


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def _where(path, text, key):
    line = _line_of(text, key) if text is not None else None
    return f"{path}:{line}" if line else str(path)


def load_config(path) -> tuple[dict, str]:
    """Parse and schema-check a JSON config; returns (document, raw text)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        doc = json.loads(text, parse_constant=lambda c: _reject_constant(c))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    if "version" not in doc:
        raise ConfigError(f"{path}:1: missing required field 'version'")
    if doc["version"] != CONFIG_VERSION:
        raise ConfigError(f"{_where(path, text, 'version')}: field 'version': unsupported version "
                          f"{doc['version']!r} (expected {CONFIG_VERSION})")
    for key, val in doc.items():
        if key not in TOP_LEVEL:
            raise ConfigError(f"{_where(path, text, key)}: unknown field '{key}'")
        if key in SCHEMA:
            if not isinstance(val, dict):
                raise ConfigError(f"{_where(path, text, key)}: field '{key}' must be an object")
            for sub, v in val.items():
                kind = SCHEMA[key].get(sub)
                if kind is None:
                    raise ConfigError(f"{_where(path, text, sub)}: unknown field '{key}.{sub}'")
                if not _type_ok(kind, v):
                    raise ConfigError(f"{_where(path, text, sub)}: field '{key}.{sub}' must be a {kind}")
        elif key in ("preset", "out") and not isinstance(val, str):
            raise ConfigError(f"{_where(path, text, key)}: field '{key}' must be a string")
    return doc, text


def _reject_constant(name):
    raise ConfigError(f"non-finite number {name} is not allowed")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict):
            out[k] = _merge(out.get(k, {}), v)
        else:
            out[k] = v
    return out


def config_hash(resolved: dict) -> str:
    """SHA-256 of the canonical JSON form of a resolved config."""
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _seed_from_env():
    raw = os.environ.get("HK_SEED")
    if raw is None or raw == "":
        return None
    try:
        seed = int(raw, 10)
    except ValueError:
        raise ConfigError(f"HK_SEED must be a non-negative integer, got {raw!r}") from None
    if not 0 <= seed < 2**64:
        raise ConfigError(f"HK_SEED must fit in 64 bits, got {raw!r}")
    return seed


def resolve(args, command: str, presets: dict | None = None) -> tuple[dict, str | None, str | None]:
    """Combine preset, config file, HK_SEED and flags into one document."""
    doc, text, path = {}, None, None
    if getattr(args, "config", None):
        path = args.config
        doc, text = load_config(path)
    name = getattr(args, "preset", None) or doc.get("preset")
    base = {}
    if name is not None:
        if presets is None or name not in presets:
            raise ConfigError(f"unknown preset {name!r} for '{command}'"
                              + (f"; choose from {sorted(presets)}" if presets else ""))
        base = copy.deepcopy(presets[name])
        base["preset"] = name
    resolved = _merge(base, {k: v for k, v in doc.items() if k != "version"})
    seed = _seed_from_env()
    if seed is not None:
        resolved.setdefault("model", {})["seed"] = seed
        resolved.setdefault("sweep", {})["seed"] = seed
    for section, key, value in _flag_overrides(args):
        if value is not None:
            resolved.setdefault(section, {})[key] = value
    if getattr(args, "out", None):
        resolved["out"] = args.out
    resolved.setdefault("out", "out")
    resolved["version"] = CONFIG_VERSION
    return resolved, text, path


_FLAG_MAP = {
    "N": ("model", "N"), "R": ("model", "R"), "sigma": ("model", "sigma"), "seed": ("model", "seed"),
    "h": ("model", "h"), "T": ("run", "T"), "init": ("run", "init"), "record_stride": ("run", "record_stride"),
    "record_every": ("run", "record_every"), "snapshot_every": ("run", "snapshot_every"),
    "m": ("solver", "m"), "pde_h": ("solver", "h"), "grid": ("solver", "grid"),
}


def _flag_overrides(args):
    for attr, (section, key) in _FLAG_MAP.items():
        if hasattr(args, attr):
            yield section, key, getattr(args, attr)
    if getattr(args, "seed", None) is not None:
        yield "sweep", "seed", args.seed


def _build(cls, section: str, values: dict, text, path):
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        msg = str(exc)
        field_name = msg.split()[0] if msg else section
        where = _where(path, text, field_name) if path else "<flags>"
        raise ConfigError(f"{where}: section '{section}': {msg}") from None


def _model(resolved, text, path) -> ModelParams:
    return _build(ModelParams, "model", resolved.get("model", {}), text, path)


def _solver(resolved, text, path) -> SolverConfig:
    return _build(SolverConfig, "solver", resolved.get("solver", {}), text, path)


def _run_section(resolved, command, text, path) -> dict:
    run = {**RUN_DEFAULTS[command], **resolved.get("run", {})}
    if not run["T"] > 0:
        raise ConfigError(f"{_where(path, text, 'T') if path else '<flags>'}: field 'run.T' must be positive")
    for key in ("record_stride",):
        if key in run and run[key] < 1:
            raise ConfigError(f"{_where(path, text, key) if path else '<flags>'}: field 'run.{key}' must be >= 1")
    for key in ("record_every", "snapshot_every"):
        if key in run and not run[key] > 0:
            raise ConfigError(f"{_where(path, text, key) if path else '<flags>'}: field 'run.{key}' must be positive")
    return run


# --- output helpers -------------------------------------------------------------


class Outputs:
    """Collects produced files and writes the manifest last."""

    def __init__(self, out_dir, resolved: dict):
        self.dir = Path(out_dir)
        # where results land is not part of the experiment, so it stays out of the hash
        self.resolved = {k: v for k, v in resolved.items() if k != "out"}
        self.hash = config_hash(self.resolved)
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        if name not in self.files:
            self.files.append(name)
        return self.dir / name

    def write_json(self, name: str, obj) -> None:
        self.path(name).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")

    def write_csv(self, name: str, header, rows) -> None:
        with open(self.path(name), "w") as fh:
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join(_cell(v) for v in r) + "\n")

    def finish(self, command: str) -> None:
        self.write_json("config.resolved.json", self.resolved)
        entries = [{"file": f, "sha256": hashlib.sha256((self.dir / f).read_bytes()).hexdigest()}
                   for f in self.files]
        manifest = {"command": command, "config_hash": self.hash, "version": __version__, "files": entries}
        (self.dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if v != v else f"{v:.10g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def parse_range(text: str, name: str) -> list[float]:
    """``a:b:step`` with inclusive endpoints, or a single number."""
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"--{name}: expected a number or start:stop:step, got {text!r}") from None
    if len(nums) == 1:
        return nums
    if len(nums) != 3 or nums[2] <= 0 or nums[1] < nums[0]:
        raise ConfigError(f"--{name}: expected start:stop:step with stop >= start and step > 0, got {text!r}")
    a, b, step = nums
    n = int(math.floor((b - a) / step + 1e-9)) + 1
    return [round(a + i * step, 12) for i in range(n)]


def parse_grid(text: str, name: str) -> list[float]:
    """``start:stop:count`` (linspace), or a comma-separated list."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return [float(v) for v in np.linspace(float(a), float(b), int(n))]
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"--{name}: expected start:stop:count or a comma list, got {text!r}") from None


def _floats(text: str, name: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"--{name}: expected comma-separated numbers, got {text!r}") from None


# --- commands -------------------------------------------------------------------


def cmd_sde(args) -> int:
    resolved, text, path = resolve(args, "sde", SDE_PRESETS)
    params = _model(resolved, text, path)
    run = _run_section(resolved, "sde", text, path)
    resolved["model"], resolved["run"] = asdict(params), run
    out = Outputs(resolved["out"], resolved)
    traj = simulate(params, run["T"], run["init"], record_stride=run["record_stride"])
    write_trajectory_csv(traj, out.path("trajectory.csv"))
    summary = trajectory_summary(traj, params)
    summary["fluctuation_final"] = fluctuation_about_mean(traj.positions[-1], params.L)
    out.write_json("summary.json", summary)
    out.finish("sde")
    print(f"Q_final={summary['Q_final']:.6g} n_clusters={summary['n_clusters']} -> {out.dir}")
    return EXIT_OK


def cmd_pde(args) -> int:
    resolved, text, path = resolve(args, "pde", PDE_PRESETS)
    params = _model(resolved, text, path)
    config = _solver(resolved, text, path)
    run = _run_section(resolved, "pde", text, path)
    if params.L != 1.0:
        raise ConfigError("the density solver works on the unit circle; set model.L = 1")
    resolved["model"], resolved["solver"], resolved["run"] = asdict(params), asdict(config), run
    out = Outputs(resolved["out"], resolved)
    snap_every = run.get("snapshot_every", run["T"])
    snap_stride = max(1, int(round(snap_every / config.h)))
    snaps = []

    def keep(state):
        step = int(round(state.t / config.h))
        if step % snap_stride == 0 or math.isclose(state.t, run["T"], abs_tol=config.h / 2):
            if not snaps or snaps[-1].t != state.t:
                snaps.append(state.copy())

    result = evolve(run["init"], config, params, run["T"], record_every=run["record_every"], callback=keep)
    if not snaps or snaps[-1].t != result.final.t:
        snaps.append(result.final.copy())
    out.write_csv("diagnostics.csv", DIAG_COLUMNS, [[r[c] for c in DIAG_COLUMNS] for r in result.diagnostics])
    x = config.x
    samples = [s.sample(config.grid) for s in snaps]
    out.write_csv("density.csv", ["x"] + [f"rho(t={s.t:g})" for s in snaps],
                  [[xi, *(rho[i] for rho in samples)] for i, xi in enumerate(x)])
    rho = samples[-1]
    clusters = density_clusters(rho)
    summary = {
        "t_final": result.final.t, "Q_final": density_order_parameter(result.final, params.R),
        "n_clusters": len(clusters), "cluster_centers": [c.center for c in clusters],
        "cluster_widths": clusters.widths, "min_rho": float(rho.min()), "max_rho": float(rho.max()),
        "peak_over_mean": float(rho.max() / rho.mean()), "mass": result.final.mass,
        "bump_variance": bump_variance(rho) if len(clusters) == 1 else None,
    }
    out.write_json("summary.json", summary)
    out.finish("pde")
    print(f"n_clusters={summary['n_clusters']} peak/mean={summary['peak_over_mean']:.4g} -> {out.dir}")
    return EXIT_OK


def cmd_stability(args) -> int:
    if args.config:
        raise ConfigError("'stability' is driven by flags only; --config is not accepted")
    if args.d < 1:
        raise ConfigError("--d must be >= 1")
    resolved = {"version": CONFIG_VERSION, "stability": {
        k: getattr(args, k) for k in ("gamma", "table_s", "zones", "classify", "R", "sigma", "d")}}
    resolved["out"] = args.out or "out"
    out = Outputs(resolved["out"], resolved)
    did = False
    if args.table_s:
        s = np.asarray(parse_range(args.table_s, "table-s"))
        gammas = _floats(args.gamma or "0", "gamma")
        cols = [f_gamma(s, g) for g in gammas]
        header = ["s", "f_gamma"] if len(gammas) == 1 else ["s"] + [f"f_gamma(gamma={g:g})" for g in gammas]
        out.write_csv("f_gamma.csv", header, [[si, *(c[i] for c in cols)] for i, si in enumerate(s)])
        for g, c in zip(gammas, cols):
            print(f"gamma={g:g}: max f_gamma on table at s={s[int(np.argmax(c))]:.6g}")
        did = True
    if args.zones:
        if args.R is None:
            raise ConfigError("--zones needs --R start:stop:step")
        Rs = parse_range(args.R, "R")
        _check_R(Rs)
        out.write_csv("zones.csv", ["R", "sigma_lower", "sigma_upper", "label"], zone_table(Rs))
        print(f"zones: {len(Rs)} rows")
        did = True
    if args.classify:
        R, sigma = _scalar_R_sigma(args)
        region = classify_phase_region(R, sigma)
        out.write_json("classify.json", asdict(region) | {"R": R, "sigma": sigma})
        print(region.label)
        did = True
    if not did:
        if args.R is not None and args.sigma is not None:
            R, sigma = _scalar_R_sigma(args)
            g = gamma_of(R, sigma)
            report = {"R": R, "sigma": sigma, "gamma": g, "d": args.d,
                      "sigma_c_disordered": critical_sigma_disordered(R, args.d),
                      "sigma_c_clustered": critical_sigma_clustered(R),
                      "label": classify_phase_region(R, sigma).label,
                      "unstable_modes": unstable_modes(R, sigma).tolist()}
            try:
                report["s_star"] = most_unstable_s(g)
                report["k_star"] = report["s_star"] / (2 * math.pi * R)
                report["expected_cluster_count"] = expected_cluster_count(R, g)
            except NoUnstableModeError:
                report["s_star"] = report["k_star"] = report["expected_cluster_count"] = None
        else:
            gammas = _floats(args.gamma or "0", "gamma")
            report = {"gammas": []}
            for g in gammas:
                try:
                    s_star = most_unstable_s(g)
                    report["gammas"].append({"gamma": g, "s_star": s_star, "count_coefficient": s_star / (2 * math.pi)})
                except NoUnstableModeError:
                    report["gammas"].append({"gamma": g, "s_star": None, "count_coefficient": None})
        out.write_json("stability.json", report)
        print(json.dumps(_jsonable(report), sort_keys=True))
    out.finish("stability")
    return EXIT_OK


def _check_R(Rs):
    for R in Rs:
        if not 0 < R <= 0.5:
            raise ConfigError(f"--R values must lie in (0, 1/2], got {R:g}")


def _scalar_R_sigma(args):
    if args.R is None or args.sigma is None:
        raise ConfigError("--classify needs --R and --sigma")
    try:
        R, sigma = float(args.R), float(args.sigma)
    except ValueError:
        raise ConfigError("--R and --sigma must be numbers here") from None
    _check_R([R])
    if not sigma > 0:
        raise ConfigError("--sigma must be positive")
    return R, sigma


def cmd_steady_state(args) -> int:
    resolved, text, path = resolve(args, "steady-state")
    ss = {"sigmas": [0.04, 0.02, 0.01], "n": 2048, **resolved.get("steady_state", {})}
    if args.sigmas:
        ss["sigmas"] = _floats(args.sigmas, "sigmas")
    if args.n is not None:
        ss["n"] = args.n
    if args.centers:
        ss["centers"] = _floats(args.centers, "centers")
    R = resolved.get("model", {}).get("R", 0.1)
    resolved["steady_state"], resolved["model"] = ss, {**resolved.get("model", {}), "R": R}
    if not 0 < R <= 0.5 or any(s <= 0 for s in ss["sigmas"]) or not ss["sigmas"]:
        raise ConfigError("need 0 < R <= 1/2 and positive sigmas")
    if ss["n"] < 2 or ss["n"] % 2:
        raise ConfigError("steady_state.n must be an even integer >= 2")
    if "centers" in ss:
        # validate before any file is written
        multi_cluster_profile(ss["centers"], R, ss["sigmas"][0], x=np.zeros(1))
    out = Outputs(resolved["out"], resolved)
    x = analysis_grid(ss["n"])
    profiles = [asymptotic_profile(x, 0.0, R, s) for s in ss["sigmas"]]
    out.write_csv("profile.csv", ["x"] + [f"rho0(sigma={s:g})" for s in ss["sigmas"]],
                  [[xi, *(p[i] for p in profiles)] for i, xi in enumerate(x)])
    rows = []
    for s, p in zip(ss["sigmas"], profiles):
        res = fixed_point_residual(p, R, s)
        rows.append((s, res, res / p[ss["n"] // 2]))
    out.write_csv("residuals.csv", ["sigma", "residual", "relative_residual"], rows)
    summary = {"R": R, "residuals": [{"sigma": s, "residual": r, "relative": q} for s, r, q in rows]}
    if len(rows) >= 2 and all(r[1] > 0 for r in rows):
        summary["loglog_slope"] = float(np.polyfit(np.log([r[0] for r in rows]), np.log([r[1] for r in rows]), 1)[0])
    if "centers" in ss:
        xm = np.arange(ss["n"]) / ss["n"]
        rho = multi_cluster_profile(ss["centers"], R, ss["sigmas"][0], x=xm)
        out.write_csv("multi_cluster.csv", ["x", "rho"], zip(xm, rho))
    out.write_json("summary.json", summary)
    out.finish("steady-state")
    for s, r, q in rows:
        print(f"sigma={s:g} residual={r:.3e} relative={q:.3e}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    resolved, text, path = resolve(args, "sweep", {k: {} for k in SWEEP_PRESETS})
    sw = dict(resolved.get("sweep", {}))
    name = args.sweep_preset or resolved.get("preset")
    if name is None and not {"R_values", "sigma_values"} <= set(sw):
        name = "ci"
    if name is not None:
        if name not in SWEEP_PRESETS:
            raise ConfigError(f"unknown sweep preset {name!r}; choose from {sorted(SWEEP_PRESETS)}")
        sw = {**SWEEP_PRESETS[name], **sw}
        resolved["preset"] = name
    for attr, key in (("engine", "engine"), ("replicates", "replicates"), ("T", "T"), ("N", "N")):
        if getattr(args, attr, None) is not None:
            sw[key] = getattr(args, attr)
    if args.seed is not None:
        sw["seed"] = args.seed
    elif "seed" in resolved.get("model", {}):
        sw.setdefault("seed", resolved["model"]["seed"])
    if args.R_grid:
        sw["R_values"] = parse_grid(args.R_grid, "R-grid")
    if args.sigma_grid:
        sw["sigma_values"] = parse_grid(args.sigma_grid, "sigma-grid")
    spec = _build(SweepSpec, "sweep", sw, text, path)
    for R in spec.R_values:
        if not 0 < R <= spec.L / 2:
            raise ConfigError(f"sweep R values must lie in (0, L/2], got {R:g}")
    if any(s < 0 for s in spec.sigma_values):
        raise ConfigError("sweep sigma values must be >= 0")
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    resolved["sweep"] = spec.to_dict()
    resolved.pop("model", None)
    resolved.pop("run", None)
    out = Outputs(resolved["out"], resolved)
    table = run_sweep(spec, jobs=args.jobs)
    table.to_csv(out.path("phase_diagram.csv"), timing=args.timing)
    write_sidecar(spec, out.path("phase_diagram.json"))
    transitions = {}
    for R in spec.R_values:
        ref = transition_reference(spec.N, R, spec.engine)
        try:
            transitions[f"{R:g}"] = detect_transition(table, R, ref)
        except (NoTransitionError, ValueError):
            transitions[f"{R:g}"] = None
    out.write_json("transitions.json", transitions)
    if args.plot:
        from .plotting import render_svg

        render_svg(out.dir / "phase_diagram.csv", "heatmap", out.path("phase_diagram.svg"),
                   title="Q (phase diagram)", config_hash=out.hash[:16])
    out.finish("sweep")
    failed = sum(r["failed"] for r in table.rows)
    print(f"{len(table)} cells ({failed} failed) -> {out.dir}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plotting import SchemaError, render_svg

    if not Path(args.input).is_file():
        raise ConfigError(f"--input: no such file {args.input}")
    resolved = {"version": CONFIG_VERSION, "plot": {"input": str(args.input), "kind": args.kind,
                                                     "log_time": args.log_time, "title": args.title}}
    resolved["input_sha256"] = hashlib.sha256(Path(args.input).read_bytes()).hexdigest()
    resolved["out"] = args.out or "out"
    out = Outputs(resolved["out"], resolved)
    name = args.output or f"{args.kind}.svg"
    target = out.dir / name
    try:
        out.dir.mkdir(parents=True, exist_ok=True)
        render_svg(args.input, args.kind, target, title=args.title, log_time=args.log_time,
                   config_hash=out.hash[:16])
    except SchemaError as exc:
        raise ConfigError(f"{args.input}: schema mismatch: {exc}") from None
    out.path(name)
    out.finish("plot")
    print(f"wrote {target}")
    return EXIT_OK


# --- argument parsing -------------------------------------------------------------


def _common(p, presets=None):
    p.add_argument("--config", metavar="PATH", help="strict JSON config with a 'version' field")
    p.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    if presets is not None:
        p.add_argument("--preset", choices=sorted(presets), help="named scenario")


def _model_flags(p, with_N=True):
    if with_N:
        p.add_argument("--N", type=int, help="number of agents [count]")
    p.add_argument("--R", type=float, help="confidence radius [length; circle length L = 1]")
    p.add_argument("--sigma", type=float, help="noise amplitude [length / sqrt(time)]")
    p.add_argument("--seed", type=int, help="global RNG seed [integer]; HK_SEED is applied before this flag")
    p.add_argument("--T", type=float, help="final time [time]")
    p.add_argument("--init", help="initial condition name, e.g. uniform-random, point(0.5), gaussian(0.5, 20)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisyhk",
        description="Noisy bounded-confidence opinion dynamics on the unit circle.",
        epilog="Exit codes: 0 success, 1 runtime failure, 2 usage/config error.",
    )
    parser.add_argument("--version", action="version", version=f"noisyhk {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("sde", help="simulate the N-agent stochastic system",
                       description="Euler-Maruyama simulation; writes trajectory.csv and summary.json.")
    _common(p, SDE_PRESETS)
    _model_flags(p)
    p.add_argument("--h", type=float, help="time step [time] (default 0.01)")
    p.add_argument("--record-stride", dest="record_stride", type=int,
                   help="record every n-th step [steps] (default 100)")
    p.set_defaults(func=cmd_sde)

    p = sub.add_parser("pde", help="integrate the mean-field density equation",
                       description="Pseudo-spectral semi-implicit solver; writes diagnostics.csv, density.csv, "
                                   "summary.json.")
    _common(p, PDE_PRESETS)
    _model_flags(p, with_N=False)
    p.add_argument("--m", type=int, help="highest retained Fourier mode [count] (default 128)")
    p.add_argument("--grid", type=int, help="collocation points [count, power of two] (default: from m)")
    p.add_argument("--h", dest="pde_h", type=float, help="time step [time] (default 0.001)")
    p.add_argument("--record-every", dest="record_every", type=float,
                   help="diagnostics interval [time] (default 1)")
    p.add_argument("--snapshot-every", dest="snapshot_every", type=float,
                   help="density snapshot interval [time] (default: initial and final only)")
    p.set_defaults(func=cmd_pde)

    p = sub.add_parser("stability", help="dispersion relation, critical curves and phase zones",
                       description="Linear stability tables for the disordered state.")
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    p.add_argument("--gamma", help="noise ratio(s) gamma = sigma^2/(4R^3) [dimensionless], comma list (default 0)")
    p.add_argument("--table-s", dest="table_s", metavar="A:B:STEP",
                   help="tabulate f_gamma(s) for s in [A, B] [dimensionless wavenumber 2 pi k R]")
    p.add_argument("--zones", action="store_true", help="tabulate both critical noise curves over --R")
    p.add_argument("--classify", action="store_true", help="classify the point (--R, --sigma)")
    p.add_argument("--R", help="confidence radius [length]; a number, or A:B:STEP with --zones")
    p.add_argument("--sigma", help="noise amplitude [length / sqrt(time)]")
    p.add_argument("--d", type=int, default=1, help="spatial dimension for the disordered critical curve [count]")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("steady-state", help="small-noise cluster profile and its fixed-point residual",
                       description="Evaluates the Gaussian-core/plateau profile and the residual of the integral "
                                   "steady-state equation.")
    _common(p)
    p.add_argument("--R", type=float, help="confidence radius [length] (default 0.1)")
    p.add_argument("--sigmas", help="noise amplitudes [length / sqrt(time)], comma list (default 0.04,0.02,0.01)")
    p.add_argument("--n", type=int, help="analysis grid intervals on [-1/2, 1/2] [count, even] (default 2048)")
    p.add_argument("--centers", help="cluster centers for a multi-cluster profile [length], comma list")
    p.set_defaults(func=cmd_steady_state)

    p = sub.add_parser("sweep", help="(R, sigma) phase-diagram sweep",
                       description="Runs one simulation per (R, sigma, replicate) cell; writes phase_diagram.csv, "
                                   "its JSON sidecar and transitions.json.")
    p.add_argument("--config", metavar="PATH", help="strict JSON config with a 'version' field")
    p.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    p.add_argument("--preset", dest="sweep_preset", choices=sorted(SWEEP_PRESETS),
                   help="ci: 5x5 desk grid; transition: sigma scan at R=0.05; pd: full-scale overnight grid")
    p.add_argument("--engine", choices=["sde", "pde"], help="simulator per cell")
    p.add_argument("--R-grid", dest="R_grid", help="R values [length]: START:STOP:COUNT or comma list")
    p.add_argument("--sigma-grid", dest="sigma_grid",
                   help="sigma values [length / sqrt(time)]: START:STOP:COUNT or comma list")
    p.add_argument("--T", type=float, help="run length per cell [time]")
    p.add_argument("--N", type=int, help="agents per cell [count]")
    p.add_argument("--replicates", type=int, help="independent runs per cell [count]")
    p.add_argument("--seed", type=int, help="global seed [integer]; per-cell seeds derive from it")
    p.add_argument("--jobs", type=int, default=1, help="worker processes [count] (default 1)")
    p.add_argument("--plot", action="store_true", help="also write phase_diagram.svg")
    p.add_argument("--timing", action="store_true",
                   help="record wall_ms [milliseconds]; output is then not byte-reproducible")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="render a CSV produced by this tool as SVG",
                       description="heatmap: phase-diagram CSV; lines: first column vs the rest; "
                                   "trajectory: t,x0,x1,... CSV.")
    p.add_argument("--input", required=True, metavar="CSV", help="input table")
    p.add_argument("--kind", required=True, choices=["heatmap", "lines", "trajectory"], help="plot type")
    p.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    p.add_argument("--output", metavar="NAME", help="SVG file name inside --out (default: <kind>.svg)")
    p.add_argument("--title", help="figure title")
    p.add_argument("--log-time", dest="log_time", action="store_true",
                   help="trajectory: logarithmic time axis (linear near t = 0)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, ClustersInteractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BlowUpError, UnstableStepError, NoUnstableModeError, FloatingPointError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        # bad initializer names and similar slip past schema checks
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
