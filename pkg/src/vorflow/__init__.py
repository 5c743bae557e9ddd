"""vorflow: quasi-Lagrangian Voronoi solver for 2D two-phase flows."""

from .geometry import BC, DomainPolygon, rectangle
from .voronoi import Mesh, QualityReport, build_mesh, cell_quality, weighted_centroid

__all__ = [
    "BC",
    "DomainPolygon",
    "Mesh",
    "QualityReport",
    "build_mesh",
    "cell_quality",
    "rectangle",
    "weighted_centroid",
]

__version__ = "0.1.0"
