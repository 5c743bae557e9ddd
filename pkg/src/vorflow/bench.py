"""Benchmark scenarios, analytic oracles and observable extraction.

Each scenario fixes the domain, boundary conditions, materials, initial
fields and solver mode of one validation case; ``resolution`` sets the
number of seeds per scenario-specific reference length.  Observables are
the scalar time-series each case is judged by (wavefront position, bubble
centroid and rise speed, error norms against the semi-analytic patch
solution, schlieren magnitude).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import UnknownScenario, VorflowError
from .geometry import BC, DomainPolygon, rectangle
from .operators import gradient
from .state import FluidState, Material, color_gradient, internal_energy
from .stepper import Simulation, StepControls
from .voronoi import build_mesh

WATER = 1000.0
AIR = 1.25


class InvalidMach(VorflowError):
    """Shock strength below sonic."""


# -- semi-analytic circular patch oracle ------------------------------------------


@dataclass
class PatchOracle:
    """Deformation history of the elliptic patch.

    a, b are the semi-axes, xi the strain rate; the initial unit circle with
    v = (-x, y)/2 evolves with a*b = 1 exactly.
    """

    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    xi: np.ndarray
    rho: float = WATER
    _dense: object = field(default=None, repr=False)

    def state_at(self, t: float):
        a, b, xi = self._dense(t)
        return float(a), float(b), float(xi)

    def velocity(self, pts: np.ndarray, t: float) -> np.ndarray:
        _, _, xi = self.state_at(t)
        return np.stack([-xi * pts[:, 0], xi * pts[:, 1]], axis=1)

    def pressure(self, pts: np.ndarray, t: float) -> np.ndarray:
        a, b, xi = self.state_at(t)
        amp = xi ** 2 * self.rho / (1.0 / a ** 2 + 1.0 / b ** 2)
        return -amp * ((pts[:, 0] / a) ** 2 + (pts[:, 1] / b) ** 2 - 1.0)

    def inside(self, pts: np.ndarray, t: float) -> np.ndarray:
        a, b, _ = self.state_at(t)
        return (pts[:, 0] / a) ** 2 + (pts[:, 1] / b) ** 2 < 1.0


def patch_oracle(t_end: float, tol: float = 1e-12, samples: int = 601) -> PatchOracle:
    """Integrate da/dt = -xi a, db/dt = xi b, dxi/dt = xi^2 (a^2-b^2)/(a^2+b^2)
    from a = b = 1, xi = 1/2 with adaptive error control."""

    def rhs(_, y):
        a, b, xi = y
        return [-xi * a, xi * b, xi ** 2 * (a ** 2 - b ** 2) / (a ** 2 + b ** 2)]

    tspan = max(t_end, 1e-12)
    sol = solve_ivp(rhs, (0.0, tspan), [1.0, 1.0, 0.5], method="RK45",
                    rtol=tol, atol=tol * 1e-2, dense_output=True)
    ts = np.linspace(0.0, tspan, samples)
    a, b, xi = sol.sol(ts)
    return PatchOracle(t=ts, a=a, b=b, xi=xi, _dense=sol.sol)


# -- Rankine-Hugoniot ---------------------------------------------------------------


def normal_shock_state(mach: float, gamma: float, pre: dict) -> dict:
    """Post-shock state (lab frame) for a normal shock moving at mach * c1
    into the quiescent pre state {rho, p}.  mach = 1 returns the pre state."""
    if mach < 1.0:
        raise InvalidMach(f"shock Mach number must be >= 1, got {mach}")
    rho1, p1 = float(pre["rho"]), float(pre["p"])
    c1 = np.sqrt(gamma * p1 / rho1)
    m2 = mach * mach
    p2 = p1 * (1.0 + 2.0 * gamma * (m2 - 1.0) / (gamma + 1.0))
    rho2 = rho1 * (gamma + 1.0) * m2 / ((gamma - 1.0) * m2 + 2.0)
    u2 = mach * c1 * (1.0 - rho1 / rho2)
    return {"rho": rho2, "p": p2, "u": u2, "v_shock": mach * c1}


# -- scenario definitions -------------------------------------------------------------


@dataclass
class Scenario:
    """Complete description of one benchmark configuration."""

    name: str
    description: str
    domain_fn: Callable[[float], DomainPolygon]
    lattice_box: tuple            # (x0, x1, y0, y1) seeded region at t = 0
    dx: float
    materials: tuple              # (phase-0, phase-1) materials
    region: Callable              # pts -> color (0/1)
    init_v: Callable              # (pts, C) -> (N, 2)
    init_p: Callable              # (pts, C) -> (N,)
    init_eps: Callable            # (pts, C) -> (N,)
    gravity: np.ndarray
    sigma: float
    t_end: float
    controls: StepControls
    jitter: float = 0.05
    t_start: float = 0.0
    oracle: object = None
    observe: Callable = None      # (Simulation) -> dict of scalars

SCENARIO_NAMES = ("circular_patch", "dam_break", "shock_bubble", "rotating_square",
                  "rising_bubble_1", "rising_bubble_2", "shock_column")


def build_scenario(name: str, resolution: int, jitter: float = 0.05) -> Scenario:
    """Paper-faithful configuration; resolution counts seeds per reference
    length (circle/bubble/column radius, meter, or square side)."""
    if name not in SCENARIO_NAMES:
        raise UnknownScenario(
            f"unknown scenario {name!r}; choose from {', '.join(SCENARIO_NAMES)}")
    if resolution < 4:
        raise ValueError("resolution must be at least 4")
    builder = globals()[f"_scn_{name}"]
    return builder(int(resolution), float(jitter))


def _scn_circular_patch(res: int, jitter: float) -> Scenario:
    dx = 1.0 / res
    water = Material(eos="incompressible", mu=0.0)
    air = Material(eos="incompressible", mu=0.0)
    oracle = patch_oracle(3.0)

    def region(pts):
        return (pts[:, 0] ** 2 + pts[:, 1] ** 2 < 1.0).astype(np.int64)

    def init_v(pts, C):
        v = 0.5 * np.stack([-pts[:, 0], pts[:, 1]], axis=1)
        v[C == 0] = 0.0
        return v

    def init_p(pts, C):
        p = oracle.pressure(pts, 0.0)
        p[C == 0] = 0.0
        return p

    dom = rectangle(-1.5, 1.5, -3.0, 3.0, bc=BC.FREE_SLIP)
    return Scenario(
        name="circular_patch",
        description="Stretching water disc in air (contrast 800), semi-analytic",
        domain_fn=lambda t: dom, lattice_box=(-1.5, 1.5, -3.0, 3.0), dx=dx,
        materials=(air, water), region=region, init_v=init_v, init_p=init_p,
        init_eps=lambda pts, C: np.zeros(len(pts)),
        gravity=np.zeros(2), sigma=0.0, t_end=3.0,
        controls=StepControls(viscous_mode="none", v_ref=0.5),
        jitter=jitter, oracle=oracle, observe=_observe_patch)


def _scn_dam_break(res: int, jitter: float) -> Scenario:
    dx = 1.0 / res
    water = Material(eos="incompressible", mu=8.9e-4)
    air = Material(eos="incompressible", mu=3.7e-5)
    g = np.array([0.0, -9.8])

    def region(pts):
        return ((pts[:, 0] < 1.0) & (pts[:, 1] < 2.0)).astype(np.int64)

    def init_p(pts, C):
        return np.where(C == 1, WATER * 9.8 * np.maximum(2.0 - pts[:, 1], 0.0), 0.0)

    dom = rectangle(0.0, 4.0, 0.0, 3.0, bc=BC.NO_SLIP)
    return Scenario(
        name="dam_break",
        description="Collapsing water column with gravity and no-slip walls",
        domain_fn=lambda t: dom, lattice_box=(0.0, 4.0, 0.0, 3.0), dx=dx,
        materials=(air, water), region=region,
        init_v=lambda pts, C: np.zeros((len(pts), 2)), init_p=init_p,
        init_eps=lambda pts, C: np.zeros(len(pts)),
        gravity=g, sigma=0.0, t_end=1.0,
        controls=StepControls(viscous_mode="explicit",
                              v_ref=float(np.sqrt(2.0 * 9.8 * 2.0))),
        jitter=jitter, observe=_observe_dam_break)


PISTON_SPEED = 124.824


def _scn_shock_bubble(res: int, jitter: float) -> Scenario:
    dx = 0.025 / res
    helium = Material(eos="ideal", gamma=1.648)
    air = Material(eos="ideal", gamma=1.4)

    def region(pts):
        return (((pts[:, 0] - 0.32) ** 2 + (pts[:, 1] - 0.089) ** 2)
                < 0.025 ** 2).astype(np.int64)

    def init_eps(pts, C):
        rho = np.where(C == 1, 0.182, 1.0)
        gam = np.where(C == 1, 1.648, 1.4)
        return 1e5 / ((gam - 1.0) * rho)

    def domain_fn(t):
        wv = np.zeros((4, 2))
        wv[1] = (-PISTON_SPEED, 0.0)
        return rectangle(0.0, 0.65 - PISTON_SPEED * max(t, 0.0), 0.0, 0.178,
                         bc=BC.FREE_SLIP, wall_velocity=wv)

    return Scenario(
        name="shock_bubble",
        description="Piston-driven shock hitting a helium bubble in air",
        domain_fn=domain_fn, lattice_box=(0.0, 0.65, 0.0, 0.178), dx=dx,
        materials=(air, helium), region=region,
        init_v=lambda pts, C: np.zeros((len(pts), 2)),
        init_p=lambda pts, C: np.full(len(pts), 1e5), init_eps=init_eps,
        gravity=np.zeros(2), sigma=0.0, t_end=1.0e-3,
        controls=StepControls(viscous_mode="explicit", use_artificial_viscosity=True,
                              v_ref=50.0),
        jitter=jitter, observe=_observe_schlieren)


def _scn_rotating_square(res: int, jitter: float) -> Scenario:
    dx = 1.0 / res
    water = Material(eos="incompressible", mu=0.0)
    air = Material(eos="incompressible", mu=0.0)

    def region(pts):
        return ((np.abs(pts[:, 0]) < 0.5) & (np.abs(pts[:, 1]) < 0.5)).astype(np.int64)

    def init_v(pts, C):
        v = np.stack([-pts[:, 1], pts[:, 0]], axis=1)
        v[C == 0] = 0.0
        return v

    dom = rectangle(-2.0, 2.0, -2.0, 2.0, bc=BC.FREE_SLIP)
    return Scenario(
        name="rotating_square",
        description="Rigidly rotating liquid square deforming into a star",
        domain_fn=lambda t: dom, lattice_box=(-2.0, 2.0, -2.0, 2.0), dx=dx,
        materials=(air, water), region=region, init_v=init_v,
        init_p=lambda pts, C: np.zeros(len(pts)),
        init_eps=lambda pts, C: np.zeros(len(pts)),
        gravity=np.zeros(2), sigma=0.0, t_end=1.8,
        controls=StepControls(viscous_mode="none", v_ref=0.7),
        jitter=jitter, observe=_observe_rotating_square)


def _scn_rising_bubble(res: int, jitter: float, setup: int) -> Scenario:
    dx = 0.25 / res
    if setup == 1:
        bubble = Material(eos="incompressible", mu=1.0)
        sigma = 24.5
        rho_b = 100.0
    else:
        bubble = Material(eos="incompressible", mu=0.1)
        sigma = 1.96
        rho_b = 1.0
    water = Material(eos="incompressible", mu=10.0)
    g = np.array([0.0, -0.98])

    def region(pts):
        return (((pts[:, 0] - 0.5) ** 2 + (pts[:, 1] - 0.5) ** 2)
                < 0.25 ** 2).astype(np.int64)

    def init_p(pts, C):
        return WATER * 0.98 * (2.0 - pts[:, 1])

    dom = rectangle(0.0, 1.0, 0.0, 2.0,
                    bc=[BC.NO_SLIP, BC.FREE_SLIP, BC.NO_SLIP, BC.FREE_SLIP])
    return Scenario(
        name=f"rising_bubble_{setup}",
        description=f"Buoyant air bubble in viscous water, setup {setup}",
        domain_fn=lambda t: dom, lattice_box=(0.0, 1.0, 0.0, 2.0), dx=dx,
        materials=(water, bubble), region=region,
        init_v=lambda pts, C: np.zeros((len(pts), 2)), init_p=init_p,
        init_eps=lambda pts, C: np.zeros(len(pts)),
        gravity=g, sigma=sigma, t_end=3.0,
        controls=StepControls(viscous_mode="implicit", v_ref=0.5),
        jitter=jitter, observe=_observe_bubble)


def _scn_rising_bubble_1(res: int, jitter: float) -> Scenario:
    return _scn_rising_bubble(res, jitter, 1)


def _scn_rising_bubble_2(res: int, jitter: float) -> Scenario:
    return _scn_rising_bubble(res, jitter, 2)


def _scn_shock_column(res: int, jitter: float) -> Scenario:
    dx = 0.0032 / res
    water = Material(eos="incompressible", mu=0.0)
    air = Material(eos="ideal", gamma=1.4)
    shock = normal_shock_state(1.3, 1.4, {"rho": 1.18, "p": 1e5})
    x_shock = -0.0032 - 1e-6 * shock["v_shock"]

    def region(pts):
        return (pts[:, 0] ** 2 + pts[:, 1] ** 2 < 0.0032 ** 2).astype(np.int64)

    def init_v(pts, C):
        v = np.zeros((len(pts), 2))
        post = (C == 0) & (pts[:, 0] < x_shock)
        v[post, 0] = shock["u"]
        return v

    def init_p(pts, C):
        p = np.full(len(pts), 1e5)
        p[(C == 0) & (pts[:, 0] < x_shock)] = shock["p"]
        return p

    def init_eps(pts, C):
        rho = np.where((C == 0) & (pts[:, 0] < x_shock), shock["rho"], 1.18)
        p = init_p(pts, C)
        eps = p / (0.4 * rho)
        eps[C == 1] = 0.0
        return eps

    dom = rectangle(-0.02, 0.02, -0.02, 0.02, bc=BC.FREE_SLIP)
    return Scenario(
        name="shock_column",
        description="Mach 1.3 air shock impacting a water column",
        domain_fn=lambda t: dom, lattice_box=(-0.02, 0.02, -0.02, 0.02), dx=dx,
        materials=(air, water), region=region, init_v=init_v, init_p=init_p,
        init_eps=init_eps, gravity=np.zeros(2), sigma=0.072, t_end=40e-6,
        t_start=-1e-6,
        controls=StepControls(viscous_mode="explicit", use_artificial_viscosity=True,
                              v_ref=50.0),
        jitter=jitter, observe=_observe_schlieren)


# -- densities per scenario (piecewise by color) ---------------------------------------

_PHASE_RHO = {
    "circular_patch": (AIR, WATER),
    "dam_break": (AIR, WATER),
    "shock_bubble": (1.0, 0.182),
    "rotating_square": (AIR, WATER),
    "rising_bubble_1": (WATER, 100.0),
    "rising_bubble_2": (WATER, 1.0),
    "shock_column": (1.18, 998.2),
}


def init_rho(scn: Scenario, pts: np.ndarray, C: np.ndarray) -> np.ndarray:
    rho0, rho1 = _PHASE_RHO[scn.name]
    rho = np.where(C == 1, rho1, rho0)
    if scn.name == "shock_column":
        shock = normal_shock_state(1.3, 1.4, {"rho": 1.18, "p": 1e5})
        x_shock = -0.0032 - 1e-6 * shock["v_shock"]
        rho[(C == 0) & (pts[:, 0] < x_shock)] = shock["rho"]
    return rho


# -- simulation assembly -----------------------------------------------------------------


def lattice_seeds(scn: Scenario, rng: np.random.Generator) -> np.ndarray:
    x0, x1, y0, y1 = scn.lattice_box
    nx = max(4, int(round((x1 - x0) / scn.dx)))
    ny = max(4, int(round((y1 - y0) / scn.dx)))
    ddx, ddy = (x1 - x0) / nx, (y1 - y0) / ny
    xs = x0 + (np.arange(nx) + 0.5) * ddx
    ys = y0 + (np.arange(ny) + 0.5) * ddy
    xx, yy = np.meshgrid(xs, ys)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    if scn.jitter > 0.0:
        pts = pts + rng.uniform(-scn.jitter, scn.jitter, pts.shape) * np.array([ddx, ddy])
    return pts


def init_simulation(scn: Scenario, seed: int = 0, overrides: dict | None = None) -> Simulation:
    """Seed the lattice, assign phases and fields, and build a ready Simulation."""
    rng = np.random.default_rng(seed)
    pts = lattice_seeds(scn, rng)
    C = scn.region(pts)
    mesh = build_mesh(pts, scn.domain_fn(scn.t_start))
    rho = init_rho(scn, pts, C)
    v = scn.init_v(pts, C)
    p = scn.init_p(pts, C)
    eps = scn.init_eps(pts, C)
    H = 3.0 * scn.dx
    grad_c = color_gradient(mesh, C, H) if scn.sigma > 0.0 else np.zeros_like(pts)
    e = (eps + 0.5 * np.einsum("ij,ij->i", v, v) - pts @ scn.gravity
         + scn.sigma * np.hypot(grad_c[:, 0], grad_c[:, 1]))
    state = FluidState(x=pts, rho=rho, v=v, e=e, C=C, M=rho * mesh.volume,
                       p=p, c=np.zeros(len(pts)), grad_c=grad_c)
    controls = scn.controls
    if overrides:
        for key, val in overrides.items():
            if not hasattr(controls, key):
                raise ValueError(f"unknown control {key!r}")
            setattr(controls, key, val)
    sim = Simulation(materials=scn.materials, gravity=scn.gravity, sigma=scn.sigma,
                     H=H, controls=controls, state=state, domain_fn=scn.domain_fn,
                     t=scn.t_start)
    return sim


# -- observables ----------------------------------------------------------------------


def _water_extent(sim: Simulation, axis: int) -> float:
    """Supremum of a coordinate over the tracked-phase cell polygons."""
    mesh = sim.mesh
    cellC = np.asarray(sim.state.C)
    counts = np.diff(mesh.poly_off)
    per_vertex = np.repeat(cellC, counts)
    vals = mesh.poly_xy[per_vertex == 1, axis]
    return float(vals.max()) if len(vals) else np.nan


def _observe_dam_break(sim: Simulation) -> dict:
    a, b = 1.0, 2.0
    T = np.sqrt(2.0 * 9.8 * sim.t ** 2 / b)
    return {"T": T,
            "X": _water_extent(sim, 0) / a,
            "H": _water_extent(sim, 1) / b}


def _observe_patch(sim: Simulation, oracle: PatchOracle) -> dict:
    st = sim.state
    orc = oracle
    w = st.C == 1
    vol = sim.mesh.volume[w]
    vex = orc.velocity(st.x[w], sim.t)
    dv2 = np.einsum("ij,ij->i", st.v[w] - vex, st.v[w] - vex)
    err_v = float(np.sqrt(np.sum(vol * dv2) / np.sum(vol)))
    pex = orc.pressure(st.x[w], sim.t)
    dp = st.p[w] - pex
    dp = dp - np.sum(vol * dp) / np.sum(vol)     # pressure is gauge-free
    err_p = float(np.sqrt(np.sum(vol * dp ** 2) / np.sum(vol)))
    a, b, xi = orc.state_at(sim.t)
    return {"err_v_l2": err_v, "err_p_l2": err_p, "a": a, "b": b, "xi": xi}


def _observe_bubble(sim: Simulation) -> dict:
    st = sim.state
    w = st.C == 1
    mass = np.sum(st.M[w])
    return {"y_centroid": float(np.sum(st.M[w] * st.x[w, 1]) / mass),
            "v_rise": float(np.sum(st.M[w] * st.v[w, 1]) / mass),
            "bubble_volume": float(np.sum(sim.mesh.volume[w]))}


def _observe_rotating_square(sim: Simulation) -> dict:
    st = sim.state
    w = st.C == 1
    r = np.hypot(st.x[w, 0], st.x[w, 1])
    return {"max_radius": float(r.max()),
            "kinetic": float(0.5 * np.sum(st.M[w] * np.einsum("ij,ij->i",
                                                              st.v[w], st.v[w])))}


def _observe_schlieren(sim: Simulation) -> dict:
    s = schlieren(sim)
    w = sim.state.C == 1
    mass = np.sum(sim.state.M[w])
    return {"schlieren_max": float(s.max()),
            "column_x": float(np.sum(sim.state.M[w] * sim.state.x[w, 0]) / mass)}


def schlieren(sim: Simulation) -> np.ndarray:
    """|grad rho| per cell (zero-Neumann closure)."""
    g = gradient(sim.mesh, sim.state.rho)
    return np.hypot(g[:, 0], g[:, 1])


def observables(scn: Scenario, sim: Simulation) -> dict:
    """Scenario-specific scalar record at the current time."""
    if scn.observe is None:
        return {}
    if scn.observe is _observe_patch:
        return _observe_patch(sim, scn.oracle)
    return scn.observe(sim)
