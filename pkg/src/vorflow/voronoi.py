"""Bounded Voronoi tessellation of a convex domain.

The mesh is rebuilt from scratch whenever seeds move.  Facet data is stored
once per ordered pair (cell, neighbor) in CSR layout; the geometry of the
two sides of every interior facet is symmetrized bitwise, which makes every
pairwise-antisymmetric flux cancel exactly in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _clip
from .errors import DuplicateSeeds, MeshError, SeedOutsideDomain
from .geometry import BC, DomainPolygon, polygon_centroid

_DUP_REL = 1e-12      # duplicate-seed tolerance, relative to domain diameter
_EPS_REL = 1e-12      # vertex/facet length epsilon, relative to domain diameter


@dataclass(frozen=True)
class Mesh:
    """Immutable tessellation snapshot.

    Facet arrays are CSR over cells: facets of cell i live in
    ``slice(f_off[i], f_off[i+1])``.  ``f_nbr`` holds the neighbor cell index
    (wrapped to the parent for periodic images) or ``-1 - edge`` for a facet
    on domain edge ``edge``.  ``f_down = m - x_i`` and ``f_doth = m - x_j``
    are stored explicitly with the two sides swapped bitwise, so dual-form
    facet sums cancel exactly across a facet pair.
    """

    domain: DomainPolygon
    seeds: np.ndarray          # (N, 2)
    volume: np.ndarray         # (N,)
    centroid: np.ndarray       # (N, 2) unweighted polygon centroids
    h: np.ndarray              # (N,) cell diameters
    poly_off: np.ndarray       # (N+1,)
    poly_xy: np.ndarray        # (V, 2) CCW vertices
    f_off: np.ndarray          # (N+1,)
    f_cell: np.ndarray         # (F,) owning cell (repeat of arange)
    f_nbr: np.ndarray          # (F,) neighbor index or -1-edge
    f_area: np.ndarray         # (F,) |Gamma|
    f_r: np.ndarray            # (F,) seed separation (mirror distance on walls)
    f_w: np.ndarray            # (F,) area / r
    f_n: np.ndarray            # (F, 2) unit normal, outward
    f_mid: np.ndarray          # (F, 2) facet centroid
    f_down: np.ndarray         # (F, 2) mid - own seed
    f_doth: np.ndarray         # (F, 2) mid - other seed (image/mirror aware)
    f_other: np.ndarray        # (F, 2) other seed position (image/mirror aware)
    ext_pts: np.ndarray        # (Ne, 2) seeds plus periodic images
    ext_parent: np.ndarray     # (Ne,)
    ext_shift: np.ndarray      # (Ne, 2) image shift vectors
    spacing: float             # sqrt(|domain| / N)

    @property
    def n_cells(self) -> int:
        return len(self.seeds)

    @property
    def wall_mask(self) -> np.ndarray:
        return self.f_nbr < 0

    @property
    def wall_edge(self) -> np.ndarray:
        """Domain edge index per facet (-1 on interior facets)."""
        return np.where(self.f_nbr < 0, -1 - self.f_nbr, -1)

    @property
    def interior_cells(self) -> np.ndarray:
        """Mask of cells with no facet on the domain boundary."""
        nwall = np.bincount(self.f_cell[self.wall_mask], minlength=self.n_cells)
        return nwall == 0

    def neighbors(self, i: int) -> np.ndarray:
        f = self.f_nbr[self.f_off[i]:self.f_off[i + 1]]
        return f[f >= 0]

    def cell_polygon(self, i: int) -> np.ndarray:
        return self.poly_xy[self.poly_off[i]:self.poly_off[i + 1]]

    def perimeter(self) -> np.ndarray:
        return np.bincount(self.f_cell, weights=self.f_area, minlength=self.n_cells)


def build_mesh(seeds, domain: DomainPolygon, validate: bool = True) -> Mesh:
    """Tessellate ``domain`` with the given generating seeds.

    Raises DuplicateSeeds / SeedOutsideDomain on inadmissible input and
    MeshError if construction breaks an internal invariant.
    """
    pts = np.ascontiguousarray(np.asarray(seeds, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("seeds must be an (N, 2) array")
    n = len(pts)
    if n == 0:
        raise ValueError("need at least one seed")
    diam = domain.diameter
    inside = domain.contains(pts, tol=1e-14 * diam)
    if not np.all(inside):
        bad = int(np.flatnonzero(~inside)[0])
        raise SeedOutsideDomain(f"seed {bad} at {pts[bad]} is not strictly inside the domain")

    ext_pts, ext_parent, ext_shift = _extended_points(pts, domain)
    init_px, init_py, init_lab = _initial_polygon(domain)

    area = domain.area
    gbin = 2.0 * np.sqrt(area / n)
    ex0, ex1 = ext_pts[:, 0].min(), ext_pts[:, 0].max()
    ey0, ey1 = ext_pts[:, 1].min(), ext_pts[:, 1].max()
    pad = 1e-9 * diam + 1e-300
    gx0, gy0 = ex0 - pad, ey0 - pad
    gnx = max(1, int(np.ceil((ex1 - gx0) / gbin)) + 1)
    gny = max(1, int(np.ceil((ey1 - gy0) / gbin)) + 1)
    head, nxt = _clip.build_grid(ext_pts[:, 0].copy(), ext_pts[:, 1].copy(),
                                 gx0, gy0, gbin, gnx, gny)

    maxf = 48
    out_nv = np.zeros(n, dtype=np.int64)
    out_vx = np.empty((n, _clip.MAXV))
    out_vy = np.empty((n, _clip.MAXV))
    out_nf = np.zeros(n, dtype=np.int64)
    out_flab = np.empty((n, maxf), dtype=np.int64)
    out_flen = np.zeros((n, maxf))
    out_fmx = np.zeros((n, maxf))
    out_fmy = np.zeros((n, maxf))
    out_vol = np.zeros(n)
    out_diam = np.zeros(n)
    out_status = np.zeros(n, dtype=np.int64)
    out_dup = np.full(n, -1, dtype=np.int64)

    min_sep = _DUP_REL * diam
    eps_len = _EPS_REL * diam
    _clip.build_cells(ext_pts[:, 0].copy(), ext_pts[:, 1].copy(), n,
                      init_px, init_py, init_lab,
                      head, nxt, gx0, gy0, gbin, gnx, gny,
                      min_sep * min_sep, eps_len, maxf,
                      out_nv, out_vx, out_vy,
                      out_nf, out_flab, out_flen, out_fmx, out_fmy,
                      out_vol, out_diam, out_status, out_dup)

    if np.any(out_status == _clip.STATUS_DUP):
        i = int(np.flatnonzero(out_status == _clip.STATUS_DUP)[0])
        j = int(ext_parent[out_dup[i]])
        raise DuplicateSeeds(f"seeds {i} and {j} closer than {min_sep:g}")
    if np.any(out_status != _clip.STATUS_OK):
        i = int(np.flatnonzero(out_status != _clip.STATUS_OK)[0])
        raise MeshError(f"cell {i} failed with status {int(out_status[i])}")

    # -- compact polygons ----------------------------------------------------
    poly_off = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(out_nv, out=poly_off[1:])
    vmask = np.arange(_clip.MAXV)[None, :] < out_nv[:, None]
    poly_xy = np.stack([out_vx[vmask], out_vy[vmask]], axis=1)

    # -- compact facets ------------------------------------------------------
    fmask = np.arange(maxf)[None, :] < out_nf[:, None]
    fcell = np.repeat(np.arange(n, dtype=np.int64), out_nf)
    flab = out_flab[fmask]
    flen = out_flen[fmask]
    fmid = np.stack([out_fmx[fmask], out_fmy[fmask]], axis=1)

    wall = flab < -0.5
    interior = ~wall
    F = len(flab)
    f_nbr = np.empty(F, dtype=np.int64)
    f_area = flen.copy()
    f_mid = fmid.copy()
    f_r = np.empty(F)
    f_n = np.empty((F, 2))
    f_down = np.empty((F, 2))
    f_doth = np.empty((F, 2))
    f_other = np.empty((F, 2))
    keep = np.ones(F, dtype=bool)

    # wall facets: mirror the seed across the domain edge
    if np.any(wall):
        edges = (-1 - flab[wall]).astype(np.int64)
        if np.any(domain.bc[edges] == BC.PERIODIC):
            raise MeshError("facet left on a periodic pseudo-edge")
        v0 = domain.vertices[edges]
        ne = domain.edge_normals()[edges]
        xi = pts[fcell[wall]]
        d = np.einsum("ij,ij->i", xi - v0, ne)          # negative inside
        mirror = xi - 2.0 * d[:, None] * ne
        f_nbr[wall] = flab[wall]
        f_other[wall] = mirror
        f_r[wall] = 2.0 * np.abs(d)
        f_n[wall] = ne
        f_down[wall] = fmid[wall] - xi
        f_doth[wall] = fmid[wall] - mirror

    # interior facets: pair the two sides and copy geometry bitwise
    if np.any(interior):
        idx = np.flatnonzero(interior)
        e = flab[idx]
        ci = fcell[idx]
        cj = ext_parent[e]
        code = _shift_code(ext_shift[e], domain)
        canon = (ci < cj) | ((ci == cj) & ((code[:, 0] > 0) | ((code[:, 0] == 0) & (code[:, 1] > 0))))
        ki = np.where(canon, ci, cj)
        kj = np.where(canon, cj, ci)
        kc = np.where(canon[:, None], code, -code)
        key = ((ki * n + kj) * 3 + (kc[:, 0] + 1)) * 3 + (kc[:, 1] + 1)
        order = np.argsort(key, kind="stable")
        sk = key[order]
        starts = np.flatnonzero(np.r_[True, sk[1:] != sk[:-1]])
        lens = np.diff(np.r_[starts, len(sk)])
        if np.any(lens > 2):
            raise MeshError("more than two facets matched one seed pair")
        # orphans: one-sided slivers, drop them
        orphan = order[starts[lens == 1]]
        keep[idx[orphan]] = False
        two = starts[lens == 2]
        a = order[two]
        b = order[two + 1]
        ca = canon[a]
        if not np.all(ca ^ canon[b]):
            raise MeshError("facet pair with inconsistent orientation")
        cidx = np.where(ca, a, b)      # canonical side, local to idx
        qidx = np.where(ca, b, a)
        fc = idx[cidx]
        fq = idx[qidx]
        own = pts[fcell[fc]]
        oth = ext_pts[flab[fc]]
        svec = ext_shift[flab[fc]]
        dvec = oth - own
        r = np.hypot(dvec[:, 0], dvec[:, 1])
        nvec = dvec / r[:, None]
        f_nbr[fc] = ext_parent[flab[fc]]
        f_nbr[fq] = fcell[fc]
        f_other[fc] = oth
        f_other[fq] = own - svec
        f_area[fq] = f_area[fc]
        f_mid[fq] = f_mid[fc] - svec
        f_r[fc] = r
        f_r[fq] = r
        f_n[fc] = nvec
        f_n[fq] = -nvec
        f_down[fc] = f_mid[fc] - own
        f_doth[fc] = f_mid[fc] - oth
        f_down[fq] = f_doth[fc]
        f_doth[fq] = f_down[fc]

    if not np.all(keep):
        (fcell, f_nbr, f_area, f_r, f_mid, f_n, f_down, f_doth, f_other) = (
            a[keep] for a in (fcell, f_nbr, f_area, f_r, f_mid, f_n, f_down, f_doth, f_other))
    f_off = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(fcell, minlength=n), out=f_off[1:])
    f_w = f_area / f_r

    centroids = _polygon_centroids(poly_off, poly_xy, out_vol)

    mesh = Mesh(domain=domain, seeds=pts, volume=out_vol, centroid=centroids,
                h=out_diam, poly_off=poly_off, poly_xy=poly_xy,
                f_off=f_off, f_cell=fcell, f_nbr=f_nbr, f_area=f_area,
                f_r=f_r, f_w=f_w, f_n=f_n, f_mid=f_mid,
                f_down=f_down, f_doth=f_doth, f_other=f_other,
                ext_pts=ext_pts, ext_parent=ext_parent, ext_shift=ext_shift,
                spacing=float(np.sqrt(area / n)))
    for arr in (mesh.seeds, mesh.volume, mesh.poly_xy, mesh.f_area, mesh.f_n,
                mesh.f_down, mesh.f_doth):
        arr.flags.writeable = False

    if validate:
        total = float(np.sum(out_vol))
        if abs(total - area) > 1e-10 * area:
            raise MeshError(f"cell volumes sum to {total!r}, domain area {area!r}")
    return mesh


def _shift_code(shifts: np.ndarray, domain: DomainPolygon) -> np.ndarray:
    """Integer periodic image code (-1, 0, +1) per axis from shift vectors."""
    x0, x1, y0, y1 = domain.bounds()
    lx, ly = x1 - x0, y1 - y0
    code = np.zeros((len(shifts), 2), dtype=np.int64)
    if lx > 0:
        code[:, 0] = np.rint(shifts[:, 0] / lx).astype(np.int64)
    if ly > 0:
        code[:, 1] = np.rint(shifts[:, 1] / ly).astype(np.int64)
    return code


def _extended_points(pts: np.ndarray, domain: DomainPolygon):
    """Seeds plus periodic image copies (images only act as clip candidates)."""
    n = len(pts)
    parent = np.arange(n, dtype=np.int64)
    shift = np.zeros((n, 2))
    x0, x1, y0, y1 = domain.bounds()
    xs = [0.0]
    ys = [0.0]
    if domain.periodic_x:
        xs = [0.0, -(x1 - x0), (x1 - x0)]
    if domain.periodic_y:
        ys = [0.0, -(y1 - y0), (y1 - y0)]
    chunks_p = [pts]
    chunks_par = [parent]
    chunks_sh = [shift]
    for dx in xs:
        for dy in ys:
            if dx == 0.0 and dy == 0.0:
                continue
            chunks_p.append(pts + np.array([dx, dy]))
            chunks_par.append(parent)
            chunks_sh.append(np.tile([dx, dy], (n, 1)))
    return (np.ascontiguousarray(np.vstack(chunks_p)),
            np.concatenate(chunks_par),
            np.vstack(chunks_sh))


def _initial_polygon(domain: DomainPolygon):
    """Domain polygon, with periodic sides pushed out by 3/4 period so the
    self-image bisectors (at half a period) do the clipping instead."""
    verts = domain.vertices.copy()
    x0, x1, y0, y1 = domain.bounds()
    if domain.periodic_x:
        lx = x1 - x0
        verts[:, 0] = np.where(verts[:, 0] == x0, x0 - 0.75 * lx, x1 + 0.75 * lx)
    if domain.periodic_y:
        ly = y1 - y0
        verts[:, 1] = np.where(verts[:, 1] == y0, y0 - 0.75 * ly, y1 + 0.75 * ly)
    labels = -1 - np.arange(len(verts), dtype=np.int64)
    return (np.ascontiguousarray(verts[:, 0]), np.ascontiguousarray(verts[:, 1]), labels)


def _polygon_centroids(poly_off, poly_xy, vol):
    n = len(poly_off) - 1
    counts = np.diff(poly_off)
    cell = np.repeat(np.arange(n), counts)
    x = poly_xy[:, 0]
    y = poly_xy[:, 1]
    # next vertex within each cell's ring
    nxt = np.arange(len(x)) + 1
    ends = poly_off[1:] - 1
    nxt[ends] = poly_off[:-1]
    w = x * y[nxt] - x[nxt] * y
    cx = np.bincount(cell, weights=(x + x[nxt]) * w, minlength=n)
    cy = np.bincount(cell, weights=(y + y[nxt]) * w, minlength=n)
    return np.stack([cx, cy], axis=1) / (6.0 * vol[:, None])


# -- quality ------------------------------------------------------------------

@dataclass(frozen=True)
class QualityReport:
    q_cell: np.ndarray
    q_mesh: float


def cell_quality(mesh: Mesh) -> QualityReport:
    """Per-cell min/max neighbor-distance ratio; 1.0 on regular lattices."""
    n = mesh.n_cells
    interior = mesh.f_nbr >= 0
    counts = np.bincount(mesh.f_cell[interior], minlength=n)
    rmin = np.full(n, np.inf)
    rmax = np.zeros(n)
    np.minimum.at(rmin, mesh.f_cell[interior], mesh.f_r[interior])
    np.maximum.at(rmax, mesh.f_cell[interior], mesh.f_r[interior])
    q = np.ones(n)
    has = counts > 0
    q[has] = rmin[has] / rmax[has]
    return QualityReport(q_cell=q, q_mesh=float(q.min()))


# -- weighted centroids --------------------------------------------------------

def _triangle_fan(mesh: Mesh, cells: np.ndarray):
    """Simplex split of the selected cells: fan around the vertex average.

    Returns (tri_cell, areas, qpts) where qpts has shape (T, 3, 2) holding
    the edge-midpoint quadrature points of each triangle.
    """
    counts = np.diff(mesh.poly_off)[cells]
    vstart = mesh.poly_off[cells]
    tri_cell = np.repeat(np.arange(len(cells)), counts)
    base = np.repeat(vstart, counts)
    local = np.arange(len(tri_cell)) - np.repeat(np.cumsum(counts) - counts, counts)
    v0 = mesh.poly_xy[base + local]
    nxt = np.where(local + 1 < np.repeat(counts, counts), local + 1, 0)
    v1 = mesh.poly_xy[base + nxt]
    # vertex average per selected cell
    sums = np.zeros((len(cells), 2))
    np.add.at(sums, tri_cell, v0)
    apex = sums / counts[:, None]
    a = apex[tri_cell]
    areas = 0.5 * np.abs((v0[:, 0] - a[:, 0]) * (v1[:, 1] - a[:, 1])
                         - (v1[:, 0] - a[:, 0]) * (v0[:, 1] - a[:, 1]))
    qpts = np.stack([0.5 * (a + v0), 0.5 * (v0 + v1), 0.5 * (v1 + a)], axis=1)
    return tri_cell, areas, qpts


def weighted_centroids(mesh: Mesh, weight_fn, cells=None) -> np.ndarray:
    """Weight-averaged centroids ``(int w x) / (int w)`` of the given cells.

    Integrals use the 3-point edge-midpoint rule per fan triangle (exact for
    quadratics).  Degenerate weights fall back to the plain centroid.
    """
    if cells is None:
        cells = np.arange(mesh.n_cells)
    cells = np.asarray(cells, dtype=np.int64)
    if len(cells) == 0:
        return np.zeros((0, 2))
    tri_cell, areas, qpts = _triangle_fan(mesh, cells)
    flat = qpts.reshape(-1, 2)
    w = np.asarray(weight_fn(flat), dtype=float).reshape(len(areas), 3)
    wa = areas / 3.0
    m0 = np.bincount(tri_cell, weights=wa * w.sum(axis=1), minlength=len(cells))
    m1x = np.bincount(tri_cell, weights=wa * np.sum(w * qpts[:, :, 0], axis=1),
                      minlength=len(cells))
    m1y = np.bincount(tri_cell, weights=wa * np.sum(w * qpts[:, :, 1], axis=1),
                      minlength=len(cells))
    wmax = np.zeros(len(cells))
    np.maximum.at(wmax, tri_cell, w.max(axis=1))
    out = np.empty((len(cells), 2))
    good = m0 > 1e-14 * mesh.volume[cells] * wmax
    out[good, 0] = m1x[good] / m0[good]
    out[good, 1] = m1y[good] / m0[good]
    out[~good] = mesh.centroid[cells[~good]]
    return out


def weighted_centroid(mesh: Mesh, cell: int, weight_fn) -> np.ndarray:
    """Single-cell convenience wrapper around :func:`weighted_centroids`."""
    return weighted_centroids(mesh, weight_fn, cells=np.array([cell]))[0]
