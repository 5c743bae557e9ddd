"""Discrete differential operators on the Voronoi mesh.

Two families exist.  The primal gradient/divergence are pointwise consistent
and reproduce linear fields exactly on interior cells.  The dual (starred)
operators are their summation-by-parts adjoints; they are what the volume
rate, the continuity equation and the viscous dissipation pair with, and the
combination is what makes the scheme conservative.

Boundary facets are closed with mirror ghosts.  A per-facet "other side"
value array can be passed to any operator; helpers below build these arrays
for the common ghost rules (scalar Neumann, hydrostatic pressure, reflected
velocity, mirrored tensor).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BC, DomainPolygon
from .voronoi import Mesh


@dataclass
class GhostPolicy:
    """Boundary-condition realization per domain edge.

    kind[e] selects the velocity reflection (free-slip or no-slip) for the
    facets on edge e; wall_velocity[e] is the wall's own velocity, so moving
    pistons are free-slip walls with a nonzero normal velocity.
    """

    kind: np.ndarray
    wall_velocity: np.ndarray

    @classmethod
    def from_domain(cls, domain: DomainPolygon) -> "GhostPolicy":
        return cls(kind=domain.bc.copy(), wall_velocity=domain.wall_velocity.copy())


# -- ghost value builders -------------------------------------------------------


def ghost_scalar(mesh: Mesh, f: np.ndarray, rho: np.ndarray | None = None,
                 g: np.ndarray | None = None) -> np.ndarray:
    """Per-facet other-side scalar: neighbor value inside, Neumann mirror on
    walls, optionally with the hydrostatic increment rho_i g.(x_g - x_i)."""
    other = f[np.maximum(mesh.f_nbr, 0)]
    w = mesh.wall_mask
    if np.any(w):
        fi = f[mesh.f_cell[w]]
        if g is not None and rho is not None and (g[0] != 0.0 or g[1] != 0.0):
            dx = mesh.f_down[w] - mesh.f_doth[w]      # x_ghost - x_i, exactly
            fi = fi + rho[mesh.f_cell[w]] * (dx @ np.asarray(g, dtype=float))
        other[w] = fi
    return other


def ghost_velocity(mesh: Mesh, v: np.ndarray, policy: GhostPolicy,
                   force_slip: bool = False) -> np.ndarray:
    """Per-facet other-side velocity.

    Free-slip reflects the wall-relative normal component; no-slip reflects
    the full wall-relative velocity.  ``force_slip`` applies the free-slip
    (impermeability) rule on every wall, which is what the pressure step sees.
    """
    other = v[np.maximum(mesh.f_nbr, 0)]
    w = mesh.wall_mask
    if np.any(w):
        e = mesh.wall_edge[w]
        vi = v[mesh.f_cell[w]]
        nrm = mesh.f_n[w]
        vw = policy.wall_velocity[e]
        vrel = vi - vw
        slip = vi - 2.0 * np.einsum("ij,ij->i", vrel, nrm)[:, None] * nrm
        if force_slip:
            gv = slip
        else:
            noslip = 2.0 * vw - vi
            gv = np.where((policy.kind[e] == BC.NO_SLIP)[:, None], noslip, slip)
        other[w] = gv
    return other


def ghost_tensor(mesh: Mesh, T: np.ndarray, policy: GhostPolicy) -> np.ndarray:
    """Per-facet other-side 2x2 tensor: mirror transform R T R on free-slip
    walls, plain copy on no-slip walls (the stress of the mirrored flow)."""
    other = T[np.maximum(mesh.f_nbr, 0)]
    w = mesh.wall_mask
    if np.any(w):
        e = mesh.wall_edge[w]
        nrm = mesh.f_n[w]
        eye = np.eye(2)[None, :, :]
        R = eye - 2.0 * nrm[:, :, None] * nrm[:, None, :]
        Ti = T[mesh.f_cell[w]]
        rtr = np.einsum("fab,fbc,fcd->fad", R, Ti, R)
        gv = np.where((policy.kind[e] == BC.NO_SLIP)[:, None, None], Ti, rtr)
        other[w] = gv
    return other


# -- primal operators -----------------------------------------------------------


def gradient(mesh: Mesh, f: np.ndarray, other: np.ndarray | None = None) -> np.ndarray:
    """Primal gradient: -(1/V) sum w (f_i - f_j)(m - x_i); linear-exact inside."""
    if other is None:
        other = ghost_scalar(mesh, f)
    n = mesh.n_cells
    coef = mesh.f_w * (f[mesh.f_cell] - other)
    gx = np.bincount(mesh.f_cell, weights=coef * mesh.f_down[:, 0], minlength=n)
    gy = np.bincount(mesh.f_cell, weights=coef * mesh.f_down[:, 1], minlength=n)
    return np.stack([gx, gy], axis=1) / -mesh.volume[:, None]


def divergence(mesh: Mesh, v: np.ndarray, other: np.ndarray | None = None) -> np.ndarray:
    """Primal divergence of a vector field (trace of the stacked gradient)."""
    if other is None:
        other = v[np.maximum(mesh.f_nbr, 0)]
        w = mesh.wall_mask
        if np.any(w):
            other[w] = v[mesh.f_cell[w]]
    n = mesh.n_cells
    dv = v[mesh.f_cell] - other
    coef = mesh.f_w * np.einsum("ij,ij->i", dv, mesh.f_down)
    return np.bincount(mesh.f_cell, weights=coef, minlength=n) / -mesh.volume


def velocity_gradient(mesh: Mesh, v: np.ndarray, other: np.ndarray | None = None) -> np.ndarray:
    """Stacked primal gradients of the components: out[i, a, b] = <d v_a / d x_b>."""
    if other is None:
        other = v[np.maximum(mesh.f_nbr, 0)]
        w = mesh.wall_mask
        if np.any(w):
            other[w] = v[mesh.f_cell[w]]
    n = mesh.n_cells
    dv = v[mesh.f_cell] - other
    out = np.empty((n, 2, 2))
    for a in range(2):
        for b in range(2):
            out[:, a, b] = np.bincount(
                mesh.f_cell, weights=mesh.f_w * dv[:, a] * mesh.f_down[:, b], minlength=n)
    return out / -mesh.volume[:, None, None]


def tensor_divergence(mesh: Mesh, T: np.ndarray, other: np.ndarray | None = None) -> np.ndarray:
    """Primal divergence of a 2x2 tensor field: out[i, a] = <d T_ab / d x_b>."""
    if other is None:
        other = T[np.maximum(mesh.f_nbr, 0)]
        w = mesh.wall_mask
        if np.any(w):
            other[w] = T[mesh.f_cell[w]]
    n = mesh.n_cells
    dT = T[mesh.f_cell] - other
    out = np.empty((n, 2))
    for a in range(2):
        coef = mesh.f_w * (dT[:, a, 0] * mesh.f_down[:, 0] + dT[:, a, 1] * mesh.f_down[:, 1])
        out[:, a] = np.bincount(mesh.f_cell, weights=coef, minlength=n)
    return out / -mesh.volume[:, None]


# -- dual (starred) operators ----------------------------------------------------


def _dual_weights(mesh: Mesh, have_other: bool) -> np.ndarray:
    """Facet weights for the starred sums.  The paper's dual operators run
    over Voronoi neighbors only; wall facets participate only when an
    explicit ghost closure is supplied."""
    if have_other or not np.any(mesh.wall_mask):
        return mesh.f_w
    w = mesh.f_w.copy()
    w[mesh.wall_mask] = 0.0
    return w


def dual_gradient(mesh: Mesh, f: np.ndarray, other: np.ndarray | None = None) -> np.ndarray:
    """Dual gradient: (1/V) sum w [f_i (m - x_i) - f_j (m - x_j)]."""
    w = _dual_weights(mesh, other is not None)
    if other is None:
        other = f[np.maximum(mesh.f_nbr, 0)]
    n = mesh.n_cells
    fi = f[mesh.f_cell]
    gx = np.bincount(mesh.f_cell,
                     weights=w * (fi * mesh.f_down[:, 0] - other * mesh.f_doth[:, 0]),
                     minlength=n)
    gy = np.bincount(mesh.f_cell,
                     weights=w * (fi * mesh.f_down[:, 1] - other * mesh.f_doth[:, 1]),
                     minlength=n)
    return np.stack([gx, gy], axis=1) / mesh.volume[:, None]


def dual_divergence(mesh: Mesh, v: np.ndarray, other: np.ndarray | None = None) -> np.ndarray:
    """Dual divergence; paired with seed motion it is the exact volume rate."""
    w = _dual_weights(mesh, other is not None)
    if other is None:
        other = v[np.maximum(mesh.f_nbr, 0)]
    n = mesh.n_cells
    vi = v[mesh.f_cell]
    coef = w * (np.einsum("ij,ij->i", vi, mesh.f_down)
                - np.einsum("ij,ij->i", other, mesh.f_doth))
    return np.bincount(mesh.f_cell, weights=coef, minlength=n) / mesh.volume


def dual_velocity_gradient(mesh: Mesh, v: np.ndarray,
                           other: np.ndarray | None = None) -> np.ndarray:
    """Stacked dual gradients: out[i, a, b] = <d* v_a / d x_b>."""
    w = _dual_weights(mesh, other is not None)
    if other is None:
        other = v[np.maximum(mesh.f_nbr, 0)]
    n = mesh.n_cells
    vi = v[mesh.f_cell]
    out = np.empty((n, 2, 2))
    for a in range(2):
        for b in range(2):
            out[:, a, b] = np.bincount(
                mesh.f_cell,
                weights=w * (vi[:, a] * mesh.f_down[:, b] - other[:, a] * mesh.f_doth[:, b]),
                minlength=n)
    return out / mesh.volume[:, None, None]


def strain_rate(mesh: Mesh, v: np.ndarray, other: np.ndarray | None = None) -> np.ndarray:
    """Symmetric part of the dual velocity gradient (feeds the viscous stress;
    this is the gradient the dissipation identity squares)."""
    G = dual_velocity_gradient(mesh, v, other)
    return 0.5 * (G + np.transpose(G, (0, 2, 1)))
