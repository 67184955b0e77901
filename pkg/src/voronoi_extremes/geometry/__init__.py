"""Planar Delaunay triangulation and its Voronoi dual."""

from .delaunay import Triangulation, triangulate
from .voronoi import (
    CellTable,
    VoronoiCell,
    cell_table,
    circumcenter,
    circumcenters,
    is_interior,
    voronoi_cells,
    write_tessellation_csv,
)

__all__ = [
    "CellTable",
    "Triangulation",
    "VoronoiCell",
    "cell_table",
    "circumcenter",
    "circumcenters",
    "is_interior",
    "triangulate",
    "voronoi_cells",
    "write_tessellation_csv",
]
