"""Physical state arrays, materials, and the interface machinery.

The per-cell payload is kept as struct-of-arrays.  The color function is
exactly 0 or 1 per cell (sharp interface); interface normals come from a
kernel-smoothed color gradient evaluated SPH-style over nearby cells, and
feed the surface-tension stress S = sigma |grad C|(I - n x n).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import NonPhysicalState
from .voronoi import Mesh

WENDLAND_NORM = 7.0 / np.pi     # quintic Wendland normalization in 2D


@dataclass(frozen=True)
class Material:
    """Equation of state plus viscosity for one phase.

    eos is one of "ideal" (needs gamma), "tait" (weakly compressible, needs
    rho0 and c0) or "incompressible" (infinite sound speed; pressure carried
    from the semi-implicit solver instead of an EOS).
    """

    eos: str
    gamma: float = 1.4
    rho0: float = 1000.0
    c0: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        if self.eos not in ("ideal", "tait", "incompressible"):
            raise ValueError(f"unknown EOS {self.eos!r}")
        if self.eos == "ideal" and self.gamma <= 1.0:
            raise ValueError("ideal gas needs gamma > 1")
        if self.eos == "tait" and self.c0 <= 0.0:
            raise ValueError("tait EOS needs c0 > 0")
        if self.mu < 0.0:
            raise ValueError("viscosity must be non-negative")

    @property
    def compressible(self) -> bool:
        return self.eos != "incompressible"


def eos_eval(material: Material, rho, eps):
    """Pressure and sound speed from density and specific internal energy.

    Incompressible cells return p = 0 (placeholder; the solver carries their
    pressure) and c = inf, which zeroes the compressibility term of the
    pressure equation.
    """
    rho = np.asarray(rho, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if np.any(rho <= 0.0):
        raise NonPhysicalState("non-positive density")
    if material.eos == "ideal":
        p = (material.gamma - 1.0) * rho * eps
        if np.any(p <= 0.0):
            raise NonPhysicalState("ideal-gas pressure must stay positive")
        return p, np.sqrt(material.gamma * p / rho)
    if material.eos == "tait":
        p = material.c0 ** 2 * (rho - material.rho0)
        return p, np.full_like(rho, material.c0)
    return np.zeros_like(rho), np.full_like(rho, np.inf)


# -- Wendland quintic kernel (2D) -----------------------------------------------


def wendland(r, H: float):
    """w_H(r) = (7/pi H^2)(1 - r/H)^4 (1 + 4 r/H) for r < H, else 0."""
    q = np.asarray(r, dtype=float) / H
    out = np.zeros_like(q)
    m = q < 1.0
    qm = q[m]
    out[m] = (WENDLAND_NORM / H ** 2) * (1.0 - qm) ** 4 * (1.0 + 4.0 * qm)
    return out


def wendland_grad(dx, H: float):
    """Analytic radial gradient of w_H evaluated at offsets dx (..., 2)."""
    dx = np.asarray(dx, dtype=float)
    r = np.hypot(dx[..., 0], dx[..., 1])
    q = r / H
    coef = np.zeros_like(q)
    m = q < 1.0
    coef[m] = -(20.0 * WENDLAND_NORM / H ** 4) * (1.0 - q[m]) ** 3
    return coef[..., None] * dx


# -- smoothed color field ---------------------------------------------------------


def color_gradient(mesh: Mesh, C: np.ndarray, H: float) -> np.ndarray:
    """(grad C^H)_i = sum_j |w_j| (C_j - C_i) grad w_H(x_i - x_j).

    The C_i offset makes the sum vanish identically in single-phase regions
    and flip sign exactly under C -> 1 - C; it differs from the raw SPH sum
    by C_i * sum_j |w_j| grad w_H, which is a discretization of zero.
    """
    cf = np.asarray(C, dtype=float)
    ii, ee = _neighbor_pairs(mesh, H)
    if len(ii) == 0:
        return np.zeros((mesh.n_cells, 2))
    par = mesh.ext_parent[ee]
    dx = mesh.seeds[ii] - mesh.ext_pts[ee]
    gw = wendland_grad(dx, H)
    coef = mesh.volume[par] * (cf[par] - cf[ii])
    out = np.zeros((mesh.n_cells, 2))
    out[:, 0] = np.bincount(ii, weights=coef * gw[:, 0], minlength=mesh.n_cells)
    out[:, 1] = np.bincount(ii, weights=coef * gw[:, 1], minlength=mesh.n_cells)
    return out


def smoothed_color(points: np.ndarray, mesh: Mesh, C: np.ndarray, H: float) -> np.ndarray:
    """C^H at arbitrary points: sum_j |w_j| C_j w_H(y - x_j) over nearby cells."""
    pts = np.atleast_2d(points)
    tree = cKDTree(mesh.ext_pts)
    groups = tree.query_ball_point(pts, H)
    counts = np.fromiter((len(g) for g in groups), dtype=np.int64, count=len(groups))
    if counts.sum() == 0:
        return np.zeros(len(pts))
    ee = np.fromiter((j for g in groups for j in g), dtype=np.int64, count=counts.sum())
    ii = np.repeat(np.arange(len(pts)), counts)
    par = mesh.ext_parent[ee]
    r = np.hypot(*(pts[ii] - mesh.ext_pts[ee]).T)
    w = wendland(r, H)
    return np.bincount(ii, weights=mesh.volume[par] * np.asarray(C, float)[par] * w,
                       minlength=len(pts))


def _neighbor_pairs(mesh: Mesh, H: float):
    """(cell, ext-point) index pairs with |x_i - x_e| < H (self excluded)."""
    tree = cKDTree(mesh.ext_pts)
    groups = tree.query_ball_point(mesh.seeds, H)
    counts = np.fromiter((len(g) for g in groups), dtype=np.int64, count=len(groups))
    ee = np.fromiter((j for g in groups for j in g), dtype=np.int64,
                     count=counts.sum()) if counts.sum() else np.zeros(0, np.int64)
    ii = np.repeat(np.arange(mesh.n_cells), counts)
    keep = ee != ii  # identical index means the zero-offset self entry
    return ii[keep], ee[keep]


# -- stresses ----------------------------------------------------------------------


def surface_stress(grad_c: np.ndarray, sigma: float, guard: float) -> np.ndarray:
    """S = sigma |g| (I - n x n) with n = g/|g|; zero tensor below the guard
    magnitude (no interface in range)."""
    g = np.atleast_2d(grad_c)
    mag = np.hypot(g[:, 0], g[:, 1])
    out = np.zeros((len(g), 2, 2))
    m = mag > guard
    if np.any(m):
        n = g[m] / mag[m][:, None]
        eye = np.eye(2)[None, :, :]
        out[m] = sigma * mag[m][:, None, None] * (eye - n[:, :, None] * n[:, None, :])
    return out if grad_c.ndim == 2 else out[0]


def artificial_viscosity(rho: np.ndarray, D: np.ndarray, dr: np.ndarray) -> np.ndarray:
    """Compression-switched bulk viscosity: -(dr)^2 rho tr(D) where tr(D) < 0."""
    tr = D[:, 0, 0] + D[:, 1, 1]
    return np.where(tr < 0.0, -(np.asarray(dr) ** 2) * rho * tr, 0.0)


# -- bulk state ---------------------------------------------------------------------


@dataclass
class FluidState:
    """Struct-of-arrays cell payload.  M is fixed between remaps; rho, p, c
    and grad_c are derived caches refreshed after every mesh rebuild."""

    x: np.ndarray          # (N, 2) seed positions
    rho: np.ndarray        # (N,)
    v: np.ndarray          # (N, 2)
    e: np.ndarray          # (N,) specific total energy
    C: np.ndarray          # (N,) phase color, exactly 0 or 1
    M: np.ndarray          # (N,) cell mass
    p: np.ndarray          # (N,)
    c: np.ndarray          # (N,) sound speed (inf on incompressible cells)
    grad_c: np.ndarray     # (N, 2) smoothed color gradient
    mu: np.ndarray = field(default=None)  # type: ignore[assignment]

    def copy(self) -> "FluidState":
        return FluidState(**{k: v.copy() for k, v in self.__dict__.items()})


def phase_viscosity(C: np.ndarray, materials) -> np.ndarray:
    return np.where(C == 0, materials[0].mu, materials[1].mu)


def internal_energy(state: FluidState, gravity: np.ndarray, sigma: float) -> np.ndarray:
    """eps = e - v^2/2 + g.x - sigma |grad C^H| (kinetic, potential and
    tensile shares removed from the total)."""
    ke = 0.5 * np.einsum("ij,ij->i", state.v, state.v)
    eps = state.e - ke + state.x @ np.asarray(gravity, float)
    if sigma != 0.0:
        eps = eps - sigma * np.hypot(state.grad_c[:, 0], state.grad_c[:, 1])
    return eps


def refresh_thermo(state: FluidState, mesh: Mesh, materials, gravity, sigma: float,
                   H: float) -> None:
    """Recompute density, color gradient, pressure and sound speed in place.

    Pressure of incompressible cells is left untouched (carried from the
    semi-implicit solve)."""
    state.rho = state.M / mesh.volume
    if sigma != 0.0:
        state.grad_c = color_gradient(mesh, state.C, H)
    eps = internal_energy(state, gravity, sigma)
    for phase, mat in enumerate(materials):
        m = state.C == phase
        if not np.any(m):
            continue
        if mat.compressible:
            p, c = eos_eval(mat, state.rho[m], eps[m])
            state.p[m] = p
            state.c[m] = c
        else:
            state.c[m] = np.inf
    state.mu = phase_viscosity(state.C, materials)
