"""Static, byte-reproducible SVG figures from the CSV tables this package writes."""

from __future__ import annotations

import csv
import hashlib
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .sweep import COLUMNS as PHASE_COLUMNS  # noqa: E402

KINDS = ("heatmap", "lines", "trajectory")
FIGSIZE = (6.4, 4.8)


class SchemaError(ValueError):
    pass


def _read(path):
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def _numeric_columns(header, body):
    cols = {}
    for j, name in enumerate(header):
        try:
            cols[name] = np.array([float(r[j]) for r in body])
        except (ValueError, IndexError):
            continue
    return cols


def _heatmap(ax, header, body):
    if header != PHASE_COLUMNS:
        raise SchemaError("heatmap needs a phase-diagram CSV (R,sigma,replicate,...)")
    cols = _numeric_columns(header, body)
    Rs = np.unique(cols["R"])
    ss = np.unique(cols["sigma"])
    Q = np.full((ss.size, Rs.size), np.nan)
    for i, R in enumerate(Rs):
        for j, s in enumerate(ss):
            sel = (cols["R"] == R) & (cols["sigma"] == s) & (cols["failed"] == 0)
            if sel.any():
                Q[j, i] = cols["Q_mean"][sel].mean()
    mesh = ax.pcolormesh(_edges(Rs), _edges(ss), Q, vmin=0.0, vmax=1.0, cmap="viridis", shading="flat")
    ax.figure.colorbar(mesh, ax=ax, label="Q")
    ax.set_xlabel("R")
    ax.set_ylabel("sigma")


def _edges(v):
    if v.size == 1:
        return np.array([v[0] - 0.5, v[0] + 0.5]) if v[0] == 0 else np.array([0.5 * v[0], 1.5 * v[0]])
    mid = 0.5 * (v[1:] + v[:-1])
    return np.concatenate([[2 * v[0] - mid[0]], mid, [2 * v[-1] - mid[-1]]])


def _lines(ax, header, body):
    cols = _numeric_columns(header, body)
    if len(header) < 2 or header[0] not in cols or len(cols) < 2:
        raise SchemaError("lines needs a numeric first column and at least one numeric series")
    x = cols[header[0]]
    for name in header[1:]:
        if name in cols:
            ax.plot(x, cols[name], label=name, linewidth=1.2)
    ax.axhline(0.0, color="0.6", linewidth=0.6)
    ax.set_xlabel(header[0])
    ax.legend(fontsize=8)


def _trajectory(ax, header, body, log_time=False):
    if not header or header[0] != "t" or header[1:] != [f"x{i}" for i in range(len(header) - 1)] or len(header) < 2:
        raise SchemaError("trajectory needs a CSV with header t,x0,x1,...")
    data = np.array([[float(v) for v in r] for r in body])
    t, x = data[:, 0], data[:, 1:]
    # points rather than lines: agents wrap around the circle
    ax.scatter(np.repeat(t, x.shape[1]), x.ravel(), s=0.5, c="k", marker=".", linewidths=0)
    if log_time:
        ax.set_xscale("symlog", linthresh=1.0)
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.set_ylim(0, 1)


def render_svg(input_csv, kind: str, output, title: str | None = None, log_time: bool = False,
               config_hash: str | None = None) -> str:
    """Render ``input_csv`` as ``kind`` into ``output`` and return the SVG text."""
    if kind not in KINDS:
        raise SchemaError(f"unknown plot kind {kind!r}; choose from {KINDS}")
    header, body = _read(input_csv)
    if not body:
        raise SchemaError(f"{input_csv}: no data rows")
    with plt.rc_context({"svg.hashsalt": "noisyhk", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        try:
            if kind == "heatmap":
                _heatmap(ax, header, body)
            elif kind == "lines":
                _lines(ax, header, body)
            else:
                _trajectory(ax, header, body, log_time)
            if title:
                ax.set_title(title)
            buf = io.StringIO()
            fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        finally:
            plt.close(fig)
    svg = buf.getvalue()
    if config_hash is None:
        config_hash = hashlib.sha256(Path(input_csv).read_bytes()).hexdigest()[:16]
    head, sep, rest = svg.partition("?>")
    svg = f"{head}{sep}\n<!-- noisyhk {kind}; config-hash {config_hash} -->{rest}" if sep else svg
    Path(output).write_text(svg)
    return svg
