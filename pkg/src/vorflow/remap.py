"""Mesh-quality repair.

When the cell-quality ratio degrades, every seed is moved once to its
color-weighted cell centroid (one Lloyd pass) and mass, momentum and total
energy are transferred with an explicit upwind-diffusive flux restricted to
same-phase neighbor pairs.  The flux is pairwise antisymmetric on the stored
facet geometry, so per-phase totals are conserved to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import NegativeMass
from .state import FluidState, smoothed_color
from .voronoi import Mesh, QualityReport, weighted_centroids

Q_THRESHOLD = 0.3


def needs_remap(quality: QualityReport, threshold: float = Q_THRESHOLD) -> bool:
    """Strictly below threshold triggers a repair."""
    return quality.q_mesh < threshold


def lloyd_positions(mesh: Mesh, C: np.ndarray, H: float) -> np.ndarray:
    """One color-weighted Lloyd iteration.

    Cells whose kernel neighborhood is single-phase take their plain
    centroid (the weight is constant there); interface cells weight the
    centroid with the smoothed color of their own phase, which pulls seeds
    back to their side of the interface instead of across it.
    """
    x_new = mesh.centroid.copy()
    tree = cKDTree(mesh.ext_pts)
    groups = tree.query_ball_point(mesh.seeds, H + mesh.h)
    cf = np.asarray(C)
    mixed = np.fromiter(
        (np.any(cf[mesh.ext_parent[g]] != cf[i]) for i, g in enumerate(groups)),
        dtype=bool, count=mesh.n_cells)
    for phase in (0, 1):
        cells = np.flatnonzero(mixed & (cf == phase))
        if len(cells) == 0:
            continue
        if phase == 1:
            def weight(pts):
                return smoothed_color(pts, mesh, cf, H)
        else:
            def weight(pts):
                return 1.0 - smoothed_color(pts, mesh, cf, H)
        x_new[cells] = weighted_centroids(mesh, weight, cells)
    return x_new


def rusanov_flux(mesh: Mesh, C: np.ndarray, dx: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Per-cell conservative transfer of a density-like field under the seed
    displacements dx; the sum runs over same-phase neighbors only."""
    inter = ~mesh.wall_mask
    fc = mesh.f_cell[inter]
    fn = mesh.f_nbr[inter]
    same = np.asarray(C)[fc] == np.asarray(C)[fn]
    fc, fn = fc[same], fn[same]
    w = mesh.f_w[inter][same]
    down = mesh.f_down[inter][same]
    doth = mesh.f_doth[inter][same]
    r = mesh.f_r[inter][same]
    adv = phi[fc] * np.einsum("ij,ij->i", dx[fc], down) \
        - phi[fn] * np.einsum("ij,ij->i", dx[fn], doth)
    speed = np.maximum(np.hypot(dx[fc][:, 0], dx[fc][:, 1]),
                       np.hypot(dx[fn][:, 0], dx[fn][:, 1]))
    diff = 0.5 * r * speed * (phi[fc] - phi[fn])
    return np.bincount(fc, weights=w * (adv - diff), minlength=mesh.n_cells)


def rusanov_remap(state: FluidState, mesh: Mesh, dx: np.ndarray):
    """Updated (M, U, E) extensive fields; geometry is the pre-remap mesh."""
    rho = state.rho
    M_new = state.M + rusanov_flux(mesh, state.C, dx, rho)
    if np.any(M_new <= 0.0):
        i = int(np.argmin(M_new))
        raise NegativeMass(
            f"remap drove cell {i} to mass {M_new[i]:g} (|dx| = "
            f"{np.hypot(*dx[i]):g}, h = {mesh.h[i]:g})")
    U_new = state.M[:, None] * state.v + np.stack(
        [rusanov_flux(mesh, state.C, dx, rho * state.v[:, 0]),
         rusanov_flux(mesh, state.C, dx, rho * state.v[:, 1])], axis=1)
    E_new = state.M * state.e + rusanov_flux(mesh, state.C, dx, rho * state.e)
    return M_new, U_new, E_new


def apply_remap(state: FluidState, mesh: Mesh, dx: np.ndarray, max_halvings: int = 3):
    """Flux transfer with a shortened move when a cell would be overdrawn.

    Returns (M, U, E, dx_used)."""
    for attempt in range(max_halvings + 1):
        try:
            M, U, E = rusanov_remap(state, mesh, dx)
            return M, U, E, dx
        except NegativeMass:
            if attempt == max_halvings:
                raise
            dx = 0.5 * dx


@dataclass
class RemapReport:
    triggered: bool
    q_before: float = np.nan
    q_after: float = np.nan
    max_dx: float = 0.0
    totals_before: np.ndarray = None    # type: ignore[assignment]
    totals_after: np.ndarray = None     # type: ignore[assignment]


def phase_totals(state: FluidState) -> np.ndarray:
    """(2, 4) array of per-phase mass, momentum and energy totals."""
    out = np.zeros((2, 4))
    for phase in (0, 1):
        m = state.C == phase
        out[phase, 0] = np.sum(state.M[m])
        out[phase, 1:3] = np.sum(state.M[m, None] * state.v[m], axis=0)
        out[phase, 3] = np.sum(state.M[m] * state.e[m])
    return out


def maybe_remap(sim, force: bool = False) -> RemapReport:
    """Run one Lloyd + flux remap pass if the mesh quality requires it."""
    if not force and sim.q_mesh >= sim.controls.q_threshold:
        return RemapReport(triggered=False, q_before=sim.q_mesh, q_after=sim.q_mesh)
    st = sim.state
    mesh = sim.mesh
    q_before = sim.q_mesh
    before = phase_totals(st)
    x_new = lloyd_positions(mesh, st.C, sim.H)
    M_new, U_new, E_new, dx = apply_remap(st, mesh, x_new - st.x)
    x_new = st.x + dx
    st.M = M_new
    st.v = U_new / M_new[:, None]
    st.e = E_new / M_new
    from .stepper import _wrap_periodic
    st.x = _wrap_periodic(x_new, sim.domain_fn(sim.t))
    sim.rebuild()
    return RemapReport(triggered=True, q_before=q_before, q_after=sim.q_mesh,
                       max_dx=float(np.max(np.hypot(dx[:, 0], dx[:, 1]))),
                       totals_before=before, totals_after=phase_totals(st))
