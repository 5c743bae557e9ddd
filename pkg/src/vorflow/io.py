"""File formats: diagnostics CSV, legacy-VTK polydata snapshots, run configs.

Both formats are versioned and round-trip exactly: floats are written with
repr precision so a re-read reproduces the in-memory values bit for bit.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .voronoi import Mesh

CSV_SCHEMA = "vorflow-diagnostics-v1"
VTK_HEADER = "# vtk DataFile Version 3.0"

BASE_COLUMNS = ["time", "dt", "mass_phase0", "mass_phase1", "momentum_x",
                "momentum_y", "energy_total", "q_mesh", "n_remaps"]


class DiagnosticsWriter:
    """Appends one row per step; column set is fixed by the first row."""

    def __init__(self, path):
        self.path = Path(path)
        self.columns = None
        self._fh = None

    def write(self, record: dict) -> None:
        if self._fh is None:
            self.columns = list(record.keys())
            self._fh = open(self.path, "w")
            self._fh.write(f"# schema: {CSV_SCHEMA}\n")
            self._fh.write(",".join(self.columns) + "\n")
        vals = [record[c] for c in self.columns]
        self._fh.write(",".join(_fmt(v) for v in vals) + "\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.flush()
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def read_diagnostics(path) -> dict:
    """Diagnostics CSV as {column: array}; validates the schema line."""
    path = Path(path)
    with open(path) as fh:
        first = fh.readline().strip()
        if not first.startswith("# schema:") or CSV_SCHEMA not in first:
            raise ValueError(f"{path} is not a {CSV_SCHEMA} file")
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        return {c: np.zeros(0) for c in header}
    return {c: data[:, k] for k, c in enumerate(header)}


# -- snapshots (legacy VTK polydata) ---------------------------------------------


def write_snapshot(path, mesh: Mesh, fields: dict, title: str = "vorflow snapshot") -> None:
    """Cell polygons plus per-cell scalar fields in ASCII legacy VTK."""
    path = Path(path)
    n = mesh.n_cells
    counts = np.diff(mesh.poly_off)
    with open(path, "w") as fh:
        fh.write(f"{VTK_HEADER}\n{title}\nASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {len(mesh.poly_xy)} double\n")
        for x, y in mesh.poly_xy:
            fh.write(f"{float(x)!r} {float(y)!r} 0.0\n")
        total = n + int(counts.sum())
        fh.write(f"POLYGONS {n} {total}\n")
        for i in range(n):
            idx = range(mesh.poly_off[i], mesh.poly_off[i + 1])
            fh.write(f"{counts[i]} " + " ".join(str(k) for k in idx) + "\n")
        fh.write(f"CELL_DATA {n}\n")
        for name, values in fields.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for v in np.asarray(values, dtype=float):
                fh.write(f"{float(v)!r}\n")


@dataclass
class Snapshot:
    points: np.ndarray          # (V, 2)
    polygons: list              # list of index arrays
    cell_data: dict             # name -> (N,) array

    def cell_areas(self) -> np.ndarray:
        out = np.empty(len(self.polygons))
        for k, poly in enumerate(self.polygons):
            xy = self.points[poly]
            x, y = xy[:, 0], xy[:, 1]
            out[k] = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        return out


def read_snapshot(path) -> Snapshot:
    path = Path(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# vtk DataFile"):
        raise ValueError(f"{path} is not a legacy VTK file")
    k = 0
    points = polygons = None
    cell_data: dict = {}
    ncells = 0
    while k < len(lines):
        line = lines[k]
        if line.startswith("POINTS"):
            nv = int(line.split()[1])
            rows = [lines[k + 1 + j].split() for j in range(nv)]
            points = np.array(rows, dtype=float)[:, :2]
            k += nv + 1
        elif line.startswith("POLYGONS"):
            ncells = int(line.split()[1])
            polygons = []
            for j in range(ncells):
                parts = lines[k + 1 + j].split()
                polygons.append(np.array(parts[1:], dtype=np.int64))
            k += ncells + 1
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            vals = np.array(lines[k + 2:k + 2 + ncells], dtype=float)
            cell_data[name] = vals
            k += ncells + 2
        else:
            k += 1
    if points is None or polygons is None:
        raise ValueError(f"{path}: incomplete polydata")
    return Snapshot(points=points, polygons=polygons, cell_data=cell_data)


# -- run configuration --------------------------------------------------------------


@dataclass
class RunConfig:
    """Parsed run configuration with scenario defaults filled in."""

    scenario: str
    resolution: int
    t_end: float | None = None
    jitter: float = 0.05
    seed: int = 0
    out_dir: str = "out"
    snapshot_every: int = 0          # steps between snapshots; 0 disables
    controls: dict = field(default_factory=dict)


def parse_config(path) -> RunConfig:
    """INI-style config; a minimal file is

        [run]
        scenario = dam_break
        resolution = 40
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    cp = configparser.ConfigParser()
    cp.read(path)
    if "run" not in cp or "scenario" not in cp["run"]:
        raise ValueError(f"{path}: missing [run] section with a scenario key")
    run = cp["run"]
    cfg = RunConfig(
        scenario=run.get("scenario"),
        resolution=run.getint("resolution", 10),
        t_end=run.getfloat("t_end", None),
        jitter=run.getfloat("jitter", 0.05),
        seed=run.getint("seed", 0),
    )
    if cfg.resolution < 4:
        raise ValueError("resolution must be at least 4")
    if "output" in cp:
        cfg.out_dir = cp["output"].get("dir", cfg.out_dir)
        cfg.snapshot_every = cp["output"].getint("snapshot_every", 0)
        if cfg.snapshot_every < 0:
            raise ValueError("snapshot_every must be non-negative")
    if "controls" in cp:
        floats = {"cfl", "v_ref", "dt_fixed", "dt_max", "cg_tol", "fp_tol",
                  "capillary_safety", "q_threshold"}
        ints = {"cg_maxiter", "fp_maxiter"}
        strs = {"viscous_mode", "pressure_precond"}
        bools = {"use_artificial_viscosity"}
        for key, raw in cp["controls"].items():
            if key in floats:
                cfg.controls[key] = float(raw)
            elif key in ints:
                cfg.controls[key] = int(raw)
            elif key in bools:
                cfg.controls[key] = cp["controls"].getboolean(key)
            elif key in strs:
                cfg.controls[key] = raw
            else:
                raise ValueError(f"unknown control option {key!r}")
    return cfg
