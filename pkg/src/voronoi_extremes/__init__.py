"""Extreme generator-to-vertex distances of Poisson Voronoi cells."""

__version__ = "0.1.0"
