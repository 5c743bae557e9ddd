"""Render figures from vorflow's public file formats.

Reads only the versioned CSV and legacy-VTK files, never the solver's
in-process API, so figures can be regenerated from archived run outputs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.collections import PolyCollection

DIAG_SCHEMA = "vorflow-diagnostics-v1"
CONV_SCHEMA = "vorflow-convergence-v1"
FIGURE_KINDS = ("convergence", "dambreak", "bubble", "field", "schlieren")


class MissingInput(Exception):
    """Input file absent or carries no data rows."""


class SchemaMismatch(Exception):
    """Input file exists but is not the expected versioned format."""


@dataclass
class FigureSpec:
    kind: str
    input_path: str
    output_path: str
    ref_path: str | None = None
    field: str = "density"
    options: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"choose from {', '.join(FIGURE_KINDS)}")


# -- input parsing ------------------------------------------------------------------


def read_csv_with_schema(path, schema: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"input file {path} does not exist")
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# schema:"):
        raise SchemaMismatch(f"{path}: missing schema comment line")
    if schema not in lines[0]:
        raise SchemaMismatch(f"{path}: expected schema {schema}, got {lines[0]!r}")
    if len(lines) < 3:
        raise MissingInput(f"{path}: header only, no data rows")
    header = lines[1].split(",")
    data = np.array([ln.split(",") for ln in lines[2:]], dtype=float)
    return {c: data[:, k] for k, c in enumerate(header)}


def read_reference_curve(path) -> dict:
    """Plain two-column CSV (with # comments) shipping digitized data."""
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"reference file {path} does not exist")
    rows = []
    header = None
    with open(path) as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            if header is None:
                header = ln.split(",")
                continue
            rows.append([float(x) for x in ln.split(",")])
    if header is None or not rows:
        raise MissingInput(f"{path}: no data rows")
    data = np.array(rows)
    return {c: data[:, k] for k, c in enumerate(header)}


def read_vtk_polydata(path):
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"snapshot {path} does not exist")
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# vtk DataFile"):
        raise SchemaMismatch(f"{path}: not a legacy VTK file")
    points = None
    polys = None
    ncells = 0
    cell_data = {}
    k = 0
    while k < len(lines):
        ln = lines[k]
        if ln.startswith("POINTS"):
            nv = int(ln.split()[1])
            points = np.array([lines[k + 1 + j].split() for j in range(nv)],
                              dtype=float)[:, :2]
            k += nv + 1
        elif ln.startswith("POLYGONS"):
            ncells = int(ln.split()[1])
            polys = [np.array(lines[k + 1 + j].split()[1:], dtype=int)
                     for j in range(ncells)]
            k += ncells + 1
        elif ln.startswith("SCALARS"):
            name = ln.split()[1]
            cell_data[name] = np.array(lines[k + 2:k + 2 + ncells], dtype=float)
            k += ncells + 2
        else:
            k += 1
    if points is None or polys is None or not cell_data:
        raise SchemaMismatch(f"{path}: incomplete polydata")
    return points, polys, cell_data


def _require(columns, data, path):
    missing = [c for c in columns if c not in data]
    if missing:
        raise SchemaMismatch(f"{path}: missing columns {missing}")


# -- renderers ----------------------------------------------------------------------


def render(spec: FigureSpec) -> str:
    """Produce the figure and return the output path."""
    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig = _RENDERERS[spec.kind](spec)
    fig.savefig(out, dpi=spec.options.get("dpi", 150))
    plt.close(fig)
    return str(out)


def _render_convergence(spec: FigureSpec):
    data = read_csv_with_schema(spec.input_path, CONV_SCHEMA)
    _require(["h", "err_v_l2", "err_p_l2"], data, spec.input_path)
    h = data["h"]
    fig, ax = plt.subplots(figsize=(5, 4))
    for col, label, marker in (("err_v_l2", "velocity", "o"),
                               ("err_p_l2", "pressure", "s")):
        err = data[col]
        ax.loglog(h, err, marker=marker, label=_with_order(label, h, err))
    ref = err[-1] * (h / h[-1])
    ax.loglog(h, ref, "k--", lw=0.8, label="first order")
    ax.set_xlabel("h")
    ax.set_ylabel(r"$L^2$ error")
    ax.legend()
    ax.set_title("Stretching-patch convergence")
    fig.tight_layout()
    return fig


def _with_order(label, h, err):
    if len(h) < 2:
        return label
    slope = np.polyfit(np.log(h), np.log(err), 1)[0]
    return f"{label} (order {slope:.2f})"


def _render_dambreak(spec: FigureSpec):
    data = read_csv_with_schema(spec.input_path, DIAG_SCHEMA)
    _require(["T", "X", "H"], data, spec.input_path)
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    axes[0].plot(data["T"], data["X"], label="simulation")
    axes[1].plot(data["T"], data["H"], label="simulation")
    if spec.ref_path:
        ref = read_reference_curve(spec.ref_path)
        if "T" in ref and "X" in ref:
            axes[0].plot(ref["T"], ref["X"], "ko", ms=4, mfc="none",
                         label="experiment (digitized)")
        if "T" in ref and "H" in ref:
            axes[1].plot(ref["T"], ref["H"], "ko", ms=4, mfc="none",
                         label="experiment (digitized)")
    axes[0].set_xlabel("T")
    axes[0].set_ylabel("wavefront X")
    axes[1].set_xlabel("T")
    axes[1].set_ylabel("column height H")
    for ax in axes:
        ax.legend()
    fig.tight_layout()
    return fig


def _render_bubble(spec: FigureSpec):
    data = read_csv_with_schema(spec.input_path, DIAG_SCHEMA)
    _require(["time", "y_centroid", "v_rise"], data, spec.input_path)
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    axes[0].plot(data["time"], data["y_centroid"])
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("bubble centroid y")
    axes[1].plot(data["time"], data["v_rise"])
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("rise velocity")
    if spec.ref_path:
        ref = read_reference_curve(spec.ref_path)
        if "time" in ref and "y_centroid" in ref:
            axes[0].plot(ref["time"], ref["y_centroid"], "k--", label="reference")
            axes[0].legend()
    fig.tight_layout()
    return fig


def _render_field(spec: FigureSpec, cmap="viridis", norm=None):
    points, polys, cell_data = read_vtk_polydata(spec.input_path)
    name = spec.field
    if name not in cell_data:
        raise SchemaMismatch(f"{spec.input_path}: no cell field {name!r}; "
                             f"has {sorted(cell_data)}")
    verts = [points[p] for p in polys]
    fig, ax = plt.subplots(figsize=(6, 5))
    coll = PolyCollection(verts, array=cell_data[name], cmap=cmap, norm=norm,
                          edgecolors="none")
    ax.add_collection(coll)
    ax.autoscale()
    ax.set_aspect("equal")
    fig.colorbar(coll, ax=ax, label=name)
    fig.tight_layout()
    return fig


def _render_schlieren(spec: FigureSpec):
    spec.field = "schlieren"
    points, polys, cell_data = read_vtk_polydata(spec.input_path)
    if "schlieren" not in cell_data:
        raise SchemaMismatch(f"{spec.input_path}: snapshot lacks a schlieren field")
    s = cell_data["schlieren"]
    # exponential shading brings out weak density-gradient structures
    smax = s.max() if s.max() > 0 else 1.0
    shade = np.exp(-3.0 * s / smax)
    verts = [points[p] for p in polys]
    fig, ax = plt.subplots(figsize=(6, 6))
    coll = PolyCollection(verts, array=shade, cmap="gray", edgecolors="none")
    ax.add_collection(coll)
    ax.autoscale()
    ax.set_aspect("equal")
    ax.set_axis_off()
    fig.tight_layout()
    return fig


_RENDERERS = {
    "convergence": _render_convergence,
    "dambreak": _render_dambreak,
    "bubble": _render_bubble,
    "field": _render_field,
    "schlieren": _render_schlieren,
}
