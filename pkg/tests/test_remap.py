import numpy as np
import pytest

from vorflow.errors import NegativeMass
from vorflow.remap import (lloyd_positions, needs_remap, phase_totals,
                           rusanov_flux, rusanov_remap)
from vorflow.state import FluidState
from vorflow.voronoi import QualityReport, build_mesh, cell_quality

from conftest import lattice


def two_phase_state(pts, mesh, split=0.5, rho=(1.0, 1000.0)):
    n = len(pts)
    C = (pts[:, 0] > split).astype(np.int64)
    dens = np.where(C == 1, rho[1], rho[0]).astype(float)
    rng = np.random.default_rng(2)
    v = 0.1 * rng.standard_normal((n, 2))
    e = 1.0 + 0.2 * rng.standard_normal(n)
    return FluidState(x=pts.copy(), rho=dens, v=v, e=e, C=C,
                      M=dens * mesh.volume, p=np.zeros(n),
                      c=np.full(n, np.inf), grad_c=np.zeros((n, 2)))


class TestNeedsRemap:
    def test_threshold(self):
        mk = lambda q: QualityReport(q_cell=np.array([q]), q_mesh=q)
        assert not needs_remap(mk(1.0))
        assert needs_remap(mk(0.29))
        assert not needs_remap(mk(0.3))     # strict inequality at the threshold


class TestLloyd:
    def test_single_phase_lattice_is_noop(self, unit_square):
        pts = lattice(10, 10, jitter=0.0)
        mesh = build_mesh(pts, unit_square)
        x_new = lloyd_positions(mesh, np.zeros(len(pts), dtype=np.int64), H=0.3)
        assert np.abs(x_new - pts).max() <= 1e-13

    def test_single_phase_equals_unweighted(self, unit_square):
        pts = lattice(12, 12, jitter=0.3, seed=4)
        mesh = build_mesh(pts, unit_square)
        for c in (0, 1):
            C = np.full(len(pts), c, dtype=np.int64)
            x_new = lloyd_positions(mesh, C, H=0.25)
            assert np.array_equal(x_new, mesh.centroid)

    def test_interface_cell_pulled_toward_own_phase(self, unit_square):
        pts = lattice(16, 16, jitter=0.2, seed=9)
        mesh = build_mesh(pts, unit_square)
        C = (pts[:, 0] > 0.5).astype(np.int64)
        H = 3.0 / 16
        x_new = lloyd_positions(mesh, C, H)
        band = np.abs(pts[:, 0] - 0.5) < 1.0 / 16
        assert np.any(band)
        # phase-1 cells shift right of their unweighted centroid, phase-0 left
        shift = x_new[band, 0] - mesh.centroid[band, 0]
        sign = np.where(C[band] == 1, 1.0, -1.0)
        assert np.all(shift * sign > -1e-12)
        assert np.any(shift * sign > 1e-6)


class TestRusanovRemap:
    def test_zero_displacement_is_identity(self, unit_square):
        pts = lattice(12, 12, jitter=0.25, seed=1)
        mesh = build_mesh(pts, unit_square)
        st = two_phase_state(pts, mesh)
        M, U, E = rusanov_remap(st, mesh, np.zeros_like(pts))
        assert np.array_equal(M, st.M)
        assert np.allclose(U, st.M[:, None] * st.v)
        assert np.allclose(E, st.M * st.e)

    def test_per_phase_flux_sums_cancel(self, unit_square):
        pts = lattice(14, 14, jitter=0.25, seed=3)
        mesh = build_mesh(pts, unit_square)
        st = two_phase_state(pts, mesh)
        rng = np.random.default_rng(11)
        dx = 0.1 * mesh.spacing * rng.standard_normal(pts.shape)
        for phi in (st.rho, st.rho * st.v[:, 0], st.rho * st.e):
            F = rusanov_flux(mesh, st.C, dx, phi)
            scale = np.abs(F).sum() + 1e-30
            for phase in (0, 1):
                assert abs(F[st.C == phase].sum()) <= 1e-12 * scale

    def test_uniform_state_stays_uniform(self, unit_square):
        pts = lattice(16, 16, jitter=0.25, seed=5)
        mesh = build_mesh(pts, unit_square)
        n = len(pts)
        rho0, v0, e0 = 2.5, np.array([0.3, -0.1]), 1.7
        st = FluidState(x=pts.copy(), rho=np.full(n, rho0),
                        v=np.tile(v0, (n, 1)), e=np.full(n, e0),
                        C=np.zeros(n, dtype=np.int64), M=rho0 * mesh.volume,
                        p=np.zeros(n), c=np.full(n, np.inf),
                        grad_c=np.zeros((n, 2)))
        rng = np.random.default_rng(7)
        dx = 3e-6 * mesh.spacing * rng.standard_normal(pts.shape)
        M, U, E = rusanov_remap(st, mesh, dx)
        mesh2 = build_mesh(pts + dx, mesh.domain)
        rho2 = M / mesh2.volume
        assert np.abs(rho2 / rho0 - 1.0).max() <= 1e-10
        assert np.abs(U / M[:, None] - v0).max() <= 1e-10
        assert np.abs(E / M - e0).max() <= 1e-10

    def test_conservation_per_phase(self, unit_square):
        pts = lattice(16, 16, jitter=0.25, seed=6)
        mesh = build_mesh(pts, unit_square)
        st = two_phase_state(pts, mesh)
        rng = np.random.default_rng(13)
        dx = 0.15 * mesh.spacing * rng.standard_normal(pts.shape)
        M, U, E = rusanov_remap(st, mesh, dx)
        for phase in (0, 1):
            w = st.C == phase
            assert np.sum(M[w]) == pytest.approx(np.sum(st.M[w]), rel=1e-12)
            assert np.allclose(np.sum(U[w], axis=0),
                               np.sum(st.M[w, None] * st.v[w], axis=0), rtol=1e-11,
                               atol=1e-13 * np.abs(st.M[w, None] * st.v[w]).sum())
            assert np.sum(E[w]) == pytest.approx(np.sum(st.M[w] * st.e[w]), rel=1e-12)

    def test_color_multiset_invariant(self, unit_square):
        pts = lattice(10, 10, jitter=0.2, seed=2)
        mesh = build_mesh(pts, unit_square)
        st = two_phase_state(pts, mesh)
        C_before = st.C.copy()
        rusanov_remap(st, mesh, 0.05 * mesh.spacing * np.ones_like(pts))
        assert np.array_equal(st.C, C_before)

    def test_negative_mass_raises(self, unit_square):
        pts = lattice(8, 8, jitter=0.0)
        mesh = build_mesh(pts, unit_square)
        st = two_phase_state(pts, mesh, rho=(1.0, 1.0))
        dx = np.zeros_like(pts)
        dx[27] = (4.0 * mesh.spacing, 0.0)      # absurd displacement
        with pytest.raises(NegativeMass):
            rusanov_remap(st, mesh, dx)


class TestQualityImprovement:
    def test_lloyd_raises_quality_statistically(self, unit_square):
        wins = 0
        trials = 30
        for seed in range(trials):
            rng = np.random.default_rng(1000 + seed)
            pts = lattice(12, 12, jitter=0.45, seed=2000 + seed)
            mesh = build_mesh(pts, unit_square)
            q0 = cell_quality(mesh).q_mesh
            if q0 >= 0.3:
                wins += 1       # not degraded: counts as fine
                continue
            C = (pts[:, 0] > 0.5).astype(np.int64)
            x_new = lloyd_positions(mesh, C, H=3.0 / 12)
            mesh2 = build_mesh(x_new, unit_square)
            if cell_quality(mesh2).q_mesh > q0:
                wins += 1
        assert wins >= int(0.95 * trials)
