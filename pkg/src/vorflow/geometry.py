"""Convex domain polygons with per-edge boundary-condition tags."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class BC(IntEnum):
    FREE_SLIP = 0
    NO_SLIP = 1
    PERIODIC = 2


@dataclass(frozen=True)
class DomainPolygon:
    """Convex computational domain.

    vertices : (M, 2) float array, counterclockwise.
    bc       : (M,) BC tags; bc[k] belongs to edge vertices[k] -> vertices[k+1].
    wall_velocity : (M, 2) prescribed wall velocities (zero for static walls).
    """

    vertices: np.ndarray
    bc: np.ndarray
    wall_velocity: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise ValueError("domain needs at least 3 two-dimensional vertices")
        bc = np.asarray(self.bc, dtype=np.int64)
        if bc.shape != (len(verts),):
            raise ValueError("one boundary tag per edge required")
        wv = self.wall_velocity
        wv = np.zeros((len(verts), 2)) if wv is None else np.asarray(wv, dtype=float)
        if wv.shape != (len(verts), 2):
            raise ValueError("one wall velocity per edge required")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "bc", bc)
        object.__setattr__(self, "wall_velocity", wv)
        cross = _edge_cross(verts)
        if np.any(cross <= 0):
            raise ValueError("domain polygon must be convex and counterclockwise")
        if self.area <= 0:
            raise ValueError("degenerate domain polygon")
        if np.any(bc == BC.PERIODIC):
            self._check_periodic_rectangle()

    # -- derived geometry ----------------------------------------------------

    @property
    def area(self) -> float:
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def diameter(self) -> float:
        v = self.vertices
        d2 = np.sum((v[:, None, :] - v[None, :, :]) ** 2, axis=-1)
        return float(np.sqrt(d2.max()))

    def edge_normals(self) -> np.ndarray:
        """Outward unit normal per edge (CCW polygon)."""
        v = self.vertices
        t = np.roll(v, -1, axis=0) - v
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """True for points strictly inside (signed distance < -tol per edge)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.edge_normals()
        d = np.einsum("pkj,kj->pk", pts[:, None, :] - self.vertices[None, :, :], n)
        return np.all(d < -tol, axis=1)

    # -- periodic support ----------------------------------------------------

    @property
    def periodic_x(self) -> bool:
        return self._periodic_axis(0)

    @property
    def periodic_y(self) -> bool:
        return self._periodic_axis(1)

    def _periodic_axis(self, axis: int) -> bool:
        if not np.any(self.bc == BC.PERIODIC):
            return False
        n = self.edge_normals()
        per = self.bc == BC.PERIODIC
        return bool(np.any(per & (np.abs(n[:, axis]) > 0.5)))

    def bounds(self):
        v = self.vertices
        return v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max()

    def _check_periodic_rectangle(self):
        v = self.vertices
        if len(v) != 4:
            raise ValueError("periodic boundaries require an axis-aligned rectangle")
        x0, x1, y0, y1 = self.bounds()
        want = {(x0, y0), (x1, y0), (x1, y1), (x0, y1)}
        got = {(float(a), float(b)) for a, b in v}
        if want != got:
            raise ValueError("periodic boundaries require an axis-aligned rectangle")
        n = self.edge_normals()
        for axis in (0, 1):
            sides = np.abs(n[:, axis]) > 0.5
            tags = self.bc[sides]
            if np.any(tags == BC.PERIODIC) and not np.all(tags == BC.PERIODIC):
                raise ValueError("periodic tags must pair up on opposite edges")


def _edge_cross(verts: np.ndarray) -> np.ndarray:
    a = np.roll(verts, -1, axis=0) - verts
    b = np.roll(a, -1, axis=0)
    return a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]


def rectangle(x0, x1, y0, y1, bc=BC.FREE_SLIP, wall_velocity=None) -> DomainPolygon:
    """Axis-aligned rectangle; edges ordered bottom, right, top, left."""
    verts = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
    tags = np.full(4, int(bc), dtype=np.int64) if np.isscalar(bc) or isinstance(bc, BC) else np.asarray([int(b) for b in bc])
    return DomainPolygon(verts, tags, wall_velocity)


def polygon_area(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_centroid(xy: np.ndarray) -> np.ndarray:
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    w = x * yn - xn * y
    a = 0.5 * np.sum(w)
    cx = np.sum((x + xn) * w) / (6.0 * a)
    cy = np.sum((y + yn) * w) / (6.0 * a)
    return np.array([cx, cy])


def point_in_convex_polygon(p, xy: np.ndarray, tol: float = 0.0) -> bool:
    """Point inside a CCW convex polygon (boundary counts as inside for tol<=0)."""
    a = xy
    b = np.roll(xy, -1, axis=0)
    cross = (b[:, 0] - a[:, 0]) * (p[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[0] - a[:, 0])
    return bool(np.all(cross >= -tol))
