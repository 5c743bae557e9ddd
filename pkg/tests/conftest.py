import numpy as np
import pytest

from vorflow.geometry import BC, rectangle
from vorflow.voronoi import build_mesh


def lattice(nx, ny, box=(0.0, 1.0, 0.0, 1.0), jitter=0.3, seed=0):
    """Cell-centered lattice with uniform jitter (fraction of spacing)."""
    x0, x1, y0, y1 = box
    rng = np.random.default_rng(seed)
    dx, dy = (x1 - x0) / nx, (y1 - y0) / ny
    xx, yy = np.meshgrid(x0 + (np.arange(nx) + 0.5) * dx,
                         y0 + (np.arange(ny) + 0.5) * dy)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    if jitter:
        pts = pts + rng.uniform(-jitter, jitter, pts.shape) * np.array([dx, dy])
    return pts


@pytest.fixture(scope="session")
def unit_square():
    return rectangle(0.0, 1.0, 0.0, 1.0)


@pytest.fixture(scope="session")
def periodic_square():
    return rectangle(0.0, 1.0, 0.0, 1.0, bc=BC.PERIODIC)


@pytest.fixture(scope="session")
def jittered_mesh(unit_square):
    return build_mesh(lattice(32, 32, jitter=0.3, seed=0), unit_square)


@pytest.fixture(scope="session")
def periodic_mesh(periodic_square):
    return build_mesh(lattice(24, 24, jitter=0.3, seed=1), periodic_square)
