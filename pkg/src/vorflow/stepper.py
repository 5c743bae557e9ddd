"""Operator-split time marching.

Every step applies the irreversible (viscous) map on the frozen mesh, then
the reversible map: seeds move with their velocity, the mesh is rebuilt,
density follows from the fixed cell masses, and a semi-implicit pressure
solve couples pressure and velocity so the acoustic time-step restriction
disappears.  The composed-operator pressure equation is sparsified to the
facet stencil with a deferred correction iterated to a fixed point; each
inner system is symmetric positive (semi-)definite and solved by Jacobi
preconditioned conjugate gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import SingularSystem, SolverDiverged
from .geometry import DomainPolygon
from .operators import (GhostPolicy, dual_divergence, dual_velocity_gradient,
                        ghost_scalar, ghost_tensor, ghost_velocity, gradient,
                        tensor_divergence)
from .state import (FluidState, artificial_viscosity, refresh_thermo,
                    surface_stress)
from .voronoi import Mesh, build_mesh, cell_quality


@dataclass
class StepControls:
    cfl: float = 0.4
    v_ref: float = 1.0
    dt_fixed: float | None = None
    dt_max: float = np.inf
    viscous_mode: str = "explicit"        # "explicit" | "implicit" | "none"
    cg_tol: float = 1e-10
    cg_maxiter: int = 4000
    fp_tol: float = 1e-6
    fp_maxiter: int = 30
    use_artificial_viscosity: bool = False
    capillary_safety: float = 0.8
    q_threshold: float = 0.3
    pressure_precond: str = "auto"        # "auto" | "jacobi" | "amg"


# -- time step -----------------------------------------------------------------


def compute_dt(state: FluidState, mesh: Mesh, controls: StepControls,
               sigma: float = 0.0, policy: GhostPolicy | None = None) -> float:
    """CFL-adaptive step: acoustic where the sound speed is finite, a pure
    velocity CFL (with floor v_ref) on incompressible cells, plus explicit
    viscous and capillary bounds where they apply."""
    if controls.dt_fixed is not None:
        return float(controls.dt_fixed)
    speed = np.hypot(state.v[:, 0], state.v[:, 1])
    fin = np.isfinite(state.c)
    denom = np.where(fin, speed + np.where(fin, state.c, 0.0),
                     np.maximum(speed, controls.v_ref))
    dt = controls.cfl * float(np.min(mesh.h / denom))
    if controls.viscous_mode == "explicit":
        mu = state.mu
        if controls.use_artificial_viscosity:
            other = (ghost_velocity(mesh, state.v, policy) if policy is not None
                     else None)
            G = dual_velocity_gradient(mesh, state.v, other)
            D = 0.5 * (G + np.transpose(G, (0, 2, 1)))
            av = artificial_viscosity(state.rho, D, mesh.h)
            av[~np.isfinite(state.c)] = 0.0
            mu = mu + av
        if np.any(mu > 0.0):
            # diffusion couples across facets: a heavy neighbor's stress acts
            # on a light cell, so the bound pairs max(mu) with min(rho)
            nbr = np.maximum(mesh.f_nbr, 0)
            own = mesh.f_cell
            mu_f = np.where(mesh.wall_mask, mu[own], np.maximum(mu[own], mu[nbr]))
            rho_f = np.where(mesh.wall_mask, state.rho[own],
                             np.minimum(state.rho[own], state.rho[nbr]))
            act = mu_f > 0.0
            if np.any(act):
                dt = min(dt, 0.25 * float(np.min(
                    rho_f[act] * mesh.f_r[act] ** 2 / mu_f[act])))
    if sigma > 0.0:
        dt = min(dt, controls.capillary_safety * float(np.min(
            np.sqrt(state.rho * mesh.h ** 3 / (2.0 * np.pi * sigma)))))
    return min(dt, controls.dt_max)


# -- irreversible (viscous) substep ----------------------------------------------


def _effective_mu(state: FluidState, mesh: Mesh, policy: GhostPolicy,
                  controls: StepControls) -> np.ndarray:
    mu = state.mu
    if controls.use_artificial_viscosity:
        other = ghost_velocity(mesh, state.v, policy)
        G = dual_velocity_gradient(mesh, state.v, other)
        D = 0.5 * (G + np.transpose(G, (0, 2, 1)))
        av = artificial_viscosity(state.rho, D, mesh.h)
        av[~np.isfinite(state.c)] = 0.0   # shock capturing is for gas cells
        mu = mu + av
    return mu


def _viscous_force(mesh: Mesh, policy: GhostPolicy, v: np.ndarray, mu: np.ndarray,
                   wall_velocity_on: bool = True):
    """div(mu D) and the field pieces it was built from."""
    pol = policy if wall_velocity_on else GhostPolicy(
        kind=policy.kind, wall_velocity=np.zeros_like(policy.wall_velocity))
    other_v = ghost_velocity(mesh, v, pol)
    G = dual_velocity_gradient(mesh, v, other_v)
    D = 0.5 * (G + np.transpose(G, (0, 2, 1)))
    T = mu[:, None, None] * D
    divT = tensor_divergence(mesh, T, ghost_tensor(mesh, T, pol))
    return divT, G, T


def irreversible_step_explicit(state: FluidState, mesh: Mesh, policy: GhostPolicy,
                               dt: float, controls: StepControls) -> None:
    """Forward-Euler viscous update; positions, color and density unchanged."""
    mu = _effective_mu(state, mesh, policy, controls)
    if not np.any(mu > 0.0):
        return
    divT, G, T = _viscous_force(mesh, policy, state.v, mu)
    work = np.einsum("ij,ij->i", divT, state.v)
    diss = np.einsum("iab,iab->i", T, G)
    state.e = state.e + dt * (2.0 / state.rho) * (work + diss)
    state.v = state.v + dt * (2.0 / state.rho)[:, None] * divT


def irreversible_step_implicit(state: FluidState, mesh: Mesh, policy: GhostPolicy,
                               dt: float, controls: StepControls) -> int:
    """Backward-Euler viscous update via matrix-free conjugate gradients.

    The operator M v / dt - 2 |w| div(mu D(v)) is applied by materializing
    the strain field of the trial velocity on every call.  Energy is then
    updated explicitly with the converged velocity.
    """
    mu = _effective_mu(state, mesh, policy, controls)
    if not np.any(mu > 0.0):
        return 0
    n = mesh.n_cells
    Mdt = (state.M / dt)[:, None]

    def apply_linear(vflat):
        v = vflat.reshape(n, 2)
        divT, _, _ = _viscous_force(mesh, policy, v, mu, wall_velocity_on=False)
        return (Mdt * v - 2.0 * mesh.volume[:, None] * divT).ravel()

    divT0, _, _ = _viscous_force(mesh, policy, np.zeros((n, 2)), mu)
    offset = (-2.0 * mesh.volume[:, None] * divT0).ravel()
    rhs = (Mdt * state.v).ravel() - offset
    x0 = state.v.ravel().copy()
    precond = (dt / state.M).repeat(2)  # mass term dominates the diagonal
    vflat, iters, ok = pcg(apply_linear, rhs, x0, controls.cg_tol,
                           controls.cg_maxiter, precond)
    if not ok:
        raise SolverDiverged(f"implicit viscous CG stalled after {iters} iterations")
    v1 = vflat.reshape(n, 2)
    divT, G, T = _viscous_force(mesh, policy, v1, mu)
    work = np.einsum("ij,ij->i", divT, v1)
    diss = np.einsum("iab,iab->i", T, G)
    state.e = state.e + dt * (2.0 / state.rho) * (work + diss)
    state.v = v1
    return iters


# -- reversible substep -----------------------------------------------------------


def predict_velocity(state: FluidState, mesh: Mesh, policy: GhostPolicy, dt: float,
                     gravity: np.ndarray, sigma: float):
    """Explicit prediction: surface tension and gravity kicks only."""
    if sigma > 0.0:
        guard = 1e-8 / mesh.spacing
        S = surface_stress(state.grad_c, sigma, guard)
        divS = tensor_divergence(mesh, S, ghost_tensor(mesh, S, policy))
    else:
        divS = np.zeros_like(state.v)
    vt = state.v + dt * (divS / state.rho[:, None] + np.asarray(gravity, float))
    return vt, divS


@dataclass
class PressureSystem:
    """Sparsified Helmholtz system: compressibility diagonal plus the
    facet-difference Laplacian, with the wide-stencil remainder moved to the
    right-hand side as a deferred correction."""

    matrix: sp.csr_matrix
    diag0: np.ndarray
    rhs_base: np.ndarray
    singular: bool
    mesh: Mesh
    rho: np.ndarray
    gravity: np.ndarray

    def corr(self, p_dagger: np.ndarray) -> np.ndarray:
        """Deferred wide-stencil remainder evaluated at the last iterate."""
        mesh = self.mesh
        gp = gradient(mesh, p_dagger,
                      ghost_scalar(mesh, p_dagger, self.rho, self.gravity))
        G = gp / self.rho[:, None]
        inter = ~mesh.wall_mask
        fc = mesh.f_cell[inter]
        Gd = G[fc] - G[np.maximum(mesh.f_nbr[inter], 0)]
        mid = 0.5 * (mesh.f_down[inter] + mesh.f_doth[inter])  # m - (x_i+x_j)/2
        corr = mesh.f_w[inter] * np.einsum("ij,ij->i", Gd, mid)
        return np.bincount(fc, weights=corr, minlength=mesh.n_cells)

    def rhs(self, p_dagger: np.ndarray) -> np.ndarray:
        out = self.rhs_base + self.corr(p_dagger)
        if self.singular:
            out = out - out.mean()
        return out


def build_pressure_system(state: FluidState, mesh: Mesh, policy: GhostPolicy,
                          vt: np.ndarray, dt: float,
                          gravity: np.ndarray) -> PressureSystem:
    n = mesh.n_cells
    rho = state.rho
    cinv2 = np.where(np.isfinite(state.c), 1.0 / np.maximum(state.c, 1e-300) ** 2, 0.0)
    diag0 = mesh.volume * cinv2 / (dt * dt * rho)

    inter = ~mesh.wall_mask
    fc = mesh.f_cell[inter]
    fn = mesh.f_nbr[inter]
    wt = mesh.f_w[inter] * 0.5 * (1.0 / rho[fc] + 1.0 / rho[fn])
    rowsum = np.bincount(fc, weights=wt, minlength=n)
    A = sp.csr_matrix((np.r_[diag0 + rowsum, -wt],
                       (np.r_[np.arange(n), fc], np.r_[np.arange(n), fn])),
                      shape=(n, n))

    # Wall facets carry no pressure coupling: the slip-reflected gradient
    # ghost cancels through the mirror geometry, so the wall signal enters
    # only via div* of the predicted velocity below.
    div_vt = dual_divergence(mesh, vt, ghost_velocity(mesh, vt, policy, force_slip=True))
    rhs = diag0 * state.p - (mesh.volume / dt) * div_vt
    singular = not np.any(diag0 > 0.0)
    return PressureSystem(matrix=A, diag0=diag0, rhs_base=rhs, singular=singular,
                          mesh=mesh, rho=rho, gravity=np.asarray(gravity, float))


def pressure_solve(state: FluidState, mesh: Mesh, policy: GhostPolicy,
                   vt: np.ndarray, dt: float, controls: StepControls,
                   gravity: np.ndarray):
    """Outer fixed point on the deferred correction, inner PCG per iterate.

    Returns (p_tilde, outer_iterations, total_cg_iterations)."""
    sys = build_pressure_system(state, mesh, policy, vt, dt, gravity)
    A = sys.matrix
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise SingularSystem("pressure matrix has an empty row")
    precond = _pressure_preconditioner(A, controls, sys.singular)
    project = (lambda z: z - z.mean()) if sys.singular else None
    gauge = float(np.mean(state.p)) if sys.singular else 0.0

    def solve_inner(b, x0):
        nonlocal cg_total
        p_new, iters, ok = pcg(A, b, x0, controls.cg_tol, controls.cg_maxiter,
                               precond, project)
        cg_total += iters
        if not ok:
            raise SolverDiverged(f"pressure CG stalled after {iters} iterations")
        if sys.singular:
            p_new = p_new - p_new.mean() + gauge
        return p_new

    # Fixed point on the affine deferred-correction map, with Anderson
    # mixing over a short history.  Plain iteration is Richardson and slows
    # down badly at strong density contrast; the mixed update converges at
    # Krylov speed while the stopping test stays the plain fixed-point
    # residual |phi(p) - p|.
    depth = 4
    p_dag = state.p.copy()
    if sys.singular:
        p_dag = p_dag - p_dag.mean() + gauge
    phi_prev = None
    hist_dp = []
    hist_df = []
    f_prev = None
    cg_total = 0
    for outer in range(1, controls.fp_maxiter + 1):
        phi = solve_inner(sys.rhs(p_dag), phi_prev if phi_prev is not None else p_dag)
        f = phi - p_dag
        scale = max(float(np.max(np.abs(phi))), 1e-300)
        if float(np.max(np.abs(f))) <= controls.fp_tol * scale:
            return phi, outer, cg_total
        if f_prev is not None:
            hist_dp.append(p_dag - p_prev)
            hist_df.append(f - f_prev)
            if len(hist_dp) > depth:
                hist_dp.pop(0)
                hist_df.pop(0)
        p_prev = p_dag
        f_prev = f
        phi_prev = phi
        if hist_df:
            dF = np.stack(hist_df, axis=1)
            gamma, *_ = np.linalg.lstsq(dF, f, rcond=1e-12)
            if np.all(np.abs(gamma) < 1e6):
                dP = np.stack(hist_dp, axis=1)
                p_dag = phi - (dP + dF) @ gamma
            else:
                p_dag = phi
        else:
            p_dag = phi
        if sys.singular:
            p_dag = p_dag - p_dag.mean() + gauge
    raise SolverDiverged(
        f"pressure fixed point did not converge in {controls.fp_maxiter} iterations")


def _pressure_preconditioner(A: sp.csr_matrix, controls: StepControls, singular: bool):
    """Algebraic multigrid V-cycle above a size cutoff, plain Jacobi below.

    The pressure Laplacian carries the full density contrast, where Jacobi
    alone needs thousands of iterations; smoothed aggregation takes the count
    down to tens and its setup amortizes over the fixed-point loop."""
    choice = controls.pressure_precond
    n = A.shape[0]
    if choice == "auto":
        choice = "amg" if n > 1024 else "jacobi"
    if choice == "amg":
        import pyamg

        # pyamg estimates spectral radii with random start vectors from the
        # global RNG; pin it so identical runs stay bit-identical
        rng_state = np.random.get_state()
        np.random.seed(20260810)
        try:
            ml = pyamg.smoothed_aggregation_solver(
                A.tocsr(), B=np.ones((n, 1)), max_coarse=64)
        finally:
            np.random.set_state(rng_state)
        M = ml.aspreconditioner(cycle="V")
        return lambda r: M @ r
    return 1.0 / A.diagonal()


def pcg(A, b, x0, rtol: float, maxiter: int, precond, project=None):
    """Preconditioned conjugate gradients; A is a CSR matrix or a callable
    matvec, precond either an inverse-diagonal array or a callable.
    Deterministic, returns (x, iterations, converged)."""
    matvec = A.dot if hasattr(A, "dot") else A
    psolve = precond if callable(precond) else (lambda r: precond * r)
    x = np.array(x0, dtype=float, copy=True)
    r = b - matvec(x)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(x), 0, True
    if float(np.linalg.norm(r)) <= rtol * bnorm:
        return x, 0, True
    z = psolve(r)
    if project is not None:
        z = project(z)
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, maxiter + 1):
        Ap = matvec(p)
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if float(np.linalg.norm(r)) <= rtol * bnorm:
            return x, k, True
        z = psolve(r)
        if project is not None:
            z = project(z)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter, False


# -- full step orchestration ---------------------------------------------------------


@dataclass
class Simulation:
    """Owns the state, mesh, and scenario-independent step logic."""

    materials: tuple
    gravity: np.ndarray
    sigma: float
    H: float
    controls: StepControls
    state: FluidState
    domain_fn: Callable[[float], DomainPolygon]
    t: float = 0.0
    mesh: Mesh = None                      # type: ignore[assignment]
    policy: GhostPolicy = None             # type: ignore[assignment]
    n_remaps: int = 0
    last_cg_viscous: int = 0
    last_cg_pressure: int = 0
    last_fp_iters: int = 0
    q_mesh: float = 1.0
    remapped_last_step: bool = False

    def __post_init__(self):
        self.gravity = np.asarray(self.gravity, dtype=float)
        if self.mesh is None:
            self.rebuild()

    # -- mesh/state consistency ----------------------------------------------

    def rebuild(self) -> None:
        domain = self.domain_fn(self.t)
        x = self.state.x
        inside = domain.contains(x, tol=1e-12 * domain.diameter)
        if not np.all(inside):
            x = _project_inside(x, domain, inside)
            self.state.x = x
        self.mesh = build_mesh(x, domain)
        self.policy = GhostPolicy.from_domain(domain)
        refresh_thermo(self.state, self.mesh, self.materials, self.gravity,
                       self.sigma, self.H)
        self.q_mesh = cell_quality(self.mesh).q_mesh

    # -- substeps ---------------------------------------------------------------

    def irreversible(self, dt: float) -> None:
        mode = self.controls.viscous_mode
        if mode == "none":
            return
        if mode == "implicit":
            self.last_cg_viscous = irreversible_step_implicit(
                self.state, self.mesh, self.policy, dt, self.controls)
        elif mode == "explicit":
            irreversible_step_explicit(self.state, self.mesh, self.policy, dt,
                                       self.controls)
        else:
            raise ValueError(f"unknown viscous mode {mode!r}")

    def reversible(self, dt: float) -> None:
        st = self.state
        x1 = st.x + dt * st.v
        self.t += dt
        domain = self.domain_fn(self.t)
        x1 = _wrap_periodic(x1, domain)
        st.x = x1
        self.rebuild()
        vt, divS = predict_velocity(st, self.mesh, self.policy, dt,
                                    self.gravity, self.sigma)
        p_t, self.last_fp_iters, cg = pressure_solve(
            st, self.mesh, self.policy, vt, dt, self.controls, self.gravity)
        self.last_cg_pressure = cg
        gp = gradient(self.mesh, p_t, ghost_scalar(self.mesh, p_t, st.rho, self.gravity))
        v1 = vt - dt * gp / st.rho[:, None]
        div_v1 = dual_divergence(self.mesh, v1,
                                 ghost_velocity(self.mesh, v1, self.policy,
                                                force_slip=True))
        work = (-np.einsum("ij,ij->i", gp, v1) - p_t * div_v1
                + np.einsum("ij,ij->i", divS, v1))
        st.e = st.e + dt * work / st.rho
        st.v = v1
        incomp = ~np.isfinite(st.c)
        st.p[incomp] = p_t[incomp]
        refresh_thermo(st, self.mesh, self.materials, self.gravity, self.sigma, self.H)

    def step(self) -> float:
        from .remap import maybe_remap
        if not (np.all(np.isfinite(self.state.v)) and np.all(np.isfinite(self.state.e))):
            raise SolverDiverged(f"non-finite state at t = {self.t:g}")
        dt = compute_dt(self.state, self.mesh, self.controls, self.sigma, self.policy)
        self.last_cg_viscous = 0
        self.irreversible(dt)
        self.reversible(dt)
        report = maybe_remap(self)
        self.remapped_last_step = report.triggered
        if report.triggered:
            self.n_remaps += 1
        if not (np.all(np.isfinite(self.state.v)) and np.all(np.isfinite(self.state.e))):
            raise SolverDiverged(f"non-finite state at t = {self.t:g}")
        return dt

    def run(self, t_end: float, on_step=None) -> None:
        while self.t < t_end - 1e-12 * max(t_end, 1.0):
            dt_cap = t_end - self.t
            saved = self.controls.dt_max
            self.controls.dt_max = min(saved, dt_cap)
            try:
                dt = self.step()
            finally:
                self.controls.dt_max = saved
            if on_step is not None:
                on_step(self, dt)


def _wrap_periodic(x: np.ndarray, domain: DomainPolygon) -> np.ndarray:
    if not (domain.periodic_x or domain.periodic_y):
        return x
    x0, x1, y0, y1 = domain.bounds()
    out = x.copy()
    if domain.periodic_x:
        out[:, 0] = x0 + np.mod(out[:, 0] - x0, x1 - x0)
    if domain.periodic_y:
        out[:, 1] = y0 + np.mod(out[:, 1] - y0, y1 - y0)
    return out


def _project_inside(x: np.ndarray, domain: DomainPolygon, inside: np.ndarray) -> np.ndarray:
    """Nudge stray seeds back inside (moving walls can overrun a seed by a
    rounding-level margin in one step)."""
    out = x.copy()
    nrm = domain.edge_normals()
    verts = domain.vertices
    margin = 1e-9 * domain.diameter
    for i in np.flatnonzero(~inside):
        p = out[i]
        for k in range(len(verts)):
            d = float((p - verts[k]) @ nrm[k])
            if d > -margin:
                p = p - (d + margin) * nrm[k]
        out[i] = p
    return out
