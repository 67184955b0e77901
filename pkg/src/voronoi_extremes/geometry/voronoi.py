"""Voronoi dual of a Delaunay triangulation and interior-cell classification."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from ..errors import DegenerateTriangleError
from .delaunay import Triangulation

# relative area below which a triangle has no usable circumcenter
AREA_EPS = 1e-14
# consecutive Voronoi vertices closer than this (relative to the radius) are merged
DEDUP_RTOL = 1e-9


@dataclass(frozen=True)
class VoronoiCell:
    generator_index: int
    vertices: np.ndarray
    neighbor_indices: tuple[int, ...]
    interior: bool


def circumcenter(a, b, c) -> tuple[float, float]:
    """Circumcenter of a single triangle; raises on (near-)degenerate input."""
    centers, _ = circumcenters(np.array([[a, b, c]], dtype=float))
    return float(centers[0, 0]), float(centers[0, 1])


def circumcenters(corners: np.ndarray, strict: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized circumcenters and circumradii for an (m, 3, 2) corner array.

    Coordinates are taken relative to the first corner before solving, which
    keeps the result accurate for small triangles far from the origin. With
    ``strict=False`` near-degenerate triangles get an infinite center and
    radius instead of raising, so they simply fail any containment test.
    """
    corners = np.asarray(corners, dtype=float)
    a = corners[:, 0]
    b = corners[:, 1] - a
    c = corners[:, 2] - a
    d = 2.0 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    scale = np.maximum(np.einsum("ij,ij->i", b, b), np.einsum("ij,ij->i", c, c))
    bad = np.abs(d) <= AREA_EPS * scale
    if strict and np.any(bad):
        raise DegenerateTriangleError(
            f"{int(bad.sum())} triangle(s) with near-zero area have no circumcenter")
    d = np.where(bad, 1.0, d)
    b2 = np.einsum("ij,ij->i", b, b)
    c2 = np.einsum("ij,ij->i", c, c)
    ux = (c[:, 1] * b2 - b[:, 1] * c2) / d
    uy = (b[:, 0] * c2 - c[:, 0] * b2) / d
    centers = np.column_stack([a[:, 0] + ux, a[:, 1] + uy])
    radii = np.hypot(ux, uy)
    if np.any(bad):
        centers[bad] = np.inf
        radii[bad] = np.inf
    return centers, radii


def triangle_circumcenters(tri: Triangulation) -> tuple[np.ndarray, np.ndarray]:
    return circumcenters(tri.points[tri.triangles], strict=False)


@njit(cache=True)
def _rings(triangles, neighbors, vertex_triangle, n):
    """Incident triangles of every vertex in counterclockwise order (CSR).

    For hull vertices the ring starts at the triangle following the hull edge
    clockwise-most, so it is an open fan rather than a cycle.
    """
    degree = np.zeros(n, np.int64)
    for t in range(triangles.shape[0]):
        for k in range(3):
            degree[triangles[t, k]] += 1
    offsets = np.zeros(n + 1, np.int64)
    for v in range(n):
        offsets[v + 1] = offsets[v] + degree[v]
    ring = np.empty(offsets[n], np.int64)
    for v in range(n):
        t = vertex_triangle[v]
        if t < 0:
            continue
        # rewind clockwise to the hull, if any
        start = t
        cur = t
        while True:
            i = 0
            while triangles[cur, i] != v:
                i += 1
            prev = neighbors[cur, (i + 2) % 3]
            if prev < 0:
                start = cur
                break
            cur = prev
            if cur == t:
                start = t
                break
        cur = start
        pos = offsets[v]
        while pos < offsets[v + 1]:
            ring[pos] = cur
            pos += 1
            i = 0
            while triangles[cur, i] != v:
                i += 1
            cur = neighbors[cur, (i + 1) % 3]
            if cur < 0 or cur == start:
                break
    return offsets, ring


def vertex_rings(tri: Triangulation) -> tuple[np.ndarray, np.ndarray]:
    return _rings(tri.triangles, tri.neighbors, tri.vertex_triangle, tri.n_points)


@njit(cache=True)
def _dedup_mask(offsets, ring, centers, radii, closed):
    keep = np.ones(ring.shape[0], np.bool_)
    n = offsets.shape[0] - 1
    for v in range(n):
        lo = offsets[v]
        hi = offsets[v + 1]
        if hi <= lo:
            continue
        last = lo
        for k in range(lo + 1, hi):
            t = ring[k]
            s = ring[last]
            if abs(centers[t, 0] - centers[s, 0]) + abs(centers[t, 1] - centers[s, 1]) \
                    <= DEDUP_RTOL * radii[t]:
                keep[k] = False
            else:
                last = k
        if closed[v] and last != lo:
            t = ring[last]
            s = ring[lo]
            if abs(centers[t, 0] - centers[s, 0]) + abs(centers[t, 1] - centers[s, 1]) \
                    <= DEDUP_RTOL * radii[t]:
                keep[last] = False
    return keep


def disks_inside(centers: np.ndarray, radii: np.ndarray, side: float) -> np.ndarray:
    """Whether each circumdisk lies inside the square window [0, side]^2."""
    return ((centers[:, 0] - radii >= 0.0) & (centers[:, 0] + radii <= side)
            & (centers[:, 1] - radii >= 0.0) & (centers[:, 1] + radii <= side))


@dataclass(frozen=True)
class CellTable:
    """Flat per-cell view of a tessellation used by the simulation driver.

    ``ring``/``offsets`` list each generator's incident triangles in
    counterclockwise order; ``keep`` masks out coincident Voronoi vertices;
    ``interior`` is the validity flag of every cell. ``incomplete`` counts
    generators inside the guarded inner window whose cell still failed the
    circumdisk test (expected to be zero for a sensible guard).
    """

    offsets: np.ndarray
    ring: np.ndarray
    keep: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    interior: np.ndarray
    incomplete: int = 0


def in_inner_window(points: np.ndarray, side: float, guard: float) -> np.ndarray:
    return ((points[:, 0] >= guard) & (points[:, 0] <= side - guard)
            & (points[:, 1] >= guard) & (points[:, 1] <= side - guard))


def cell_table(tri: Triangulation, side: float | None = None, guard: float = 0.0) -> CellTable:
    """Cell table for a window [0, side]^2.

    A cell is interior when its generator is off the hull and every incident
    circumdisk lies inside the window. A positive ``guard`` additionally
    requires the generator to lie in [guard, side - guard]^2, which makes the
    selection independent of the cell's own size.
    """
    centers, radii = triangle_circumcenters(tri)
    offsets, ring = vertex_rings(tri)
    closed = ~tri.hull_flags
    keep = _dedup_mask(offsets, ring, centers, radii, closed)
    interior = closed.copy()
    if side is not None:
        tri_ok = disks_inside(centers, radii, side)
        ok_in_ring = tri_ok[ring].astype(np.int64)
        counts = np.add.reduceat(ok_in_ring, offsets[:-1]) if ring.size else np.zeros(0)
        degree = np.diff(offsets)
        all_ok = np.where(degree > 0, counts == degree, False)
        interior &= all_ok
    incomplete = 0
    if side is not None and guard > 0:
        inner = in_inner_window(tri.points, side, guard)
        incomplete = int(np.count_nonzero(inner & ~interior))
        interior &= inner
    return CellTable(offsets=offsets, ring=ring, keep=keep, centers=centers,
                     radii=radii, interior=interior, incomplete=incomplete)


def voronoi_cells(tri: Triangulation, side: float | None = None,
                  guard: float = 0.0) -> list[VoronoiCell]:
    """One cell per generator.

    Without ``side`` the interior flag only excludes hull generators; with a
    window side length it applies the full circumdisk-containment test (and
    the optional guard, see ``cell_table``).
    """
    table = cell_table(tri, side, guard)
    cells = []
    tris = tri.triangles
    for v in range(tri.n_points):
        lo, hi = table.offsets[v], table.offsets[v + 1]
        ring = table.ring[lo:hi]
        verts = table.centers[ring[table.keep[lo:hi]]]
        nbrs = set()
        for t in ring:
            nbrs.update(int(w) for w in tris[t] if w != v)
        cells.append(VoronoiCell(generator_index=v, vertices=verts,
                                 neighbor_indices=tuple(sorted(nbrs)),
                                 interior=bool(table.interior[v])))
    return cells


def is_interior(cell: VoronoiCell, tri: Triangulation, side: float, guard: float = 0.0) -> bool:
    v = cell.generator_index
    if tri.hull_flags[v]:
        return False
    if guard > 0 and not in_inner_window(tri.points[v:v + 1], side, guard)[0]:
        return False
    incident = np.nonzero((tri.triangles == v).any(axis=1))[0]
    centers, radii = circumcenters(tri.points[tri.triangles[incident]], strict=False)
    return bool(disks_inside(centers, radii, side).all())


def write_tessellation_csv(tri: Triangulation, out_dir, side: float | None = None,
                           guard: float = 0.0) -> list[Path]:
    """Debug dump of one window: points, triangles and cell vertex lists."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = voronoi_cells(tri, side, guard)
    paths = [out_dir / "points.csv", out_dir / "triangles.csv", out_dir / "cells.csv"]
    with open(paths[0], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "x", "y", "hull"])
        for i, (x, y) in enumerate(tri.points):
            w.writerow([i, f"{x:.9g}", f"{y:.9g}", int(tri.hull_flags[i])])
    with open(paths[1], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["triangle", "v0", "v1", "v2"])
        for t, (a, b, c) in enumerate(tri.triangles):
            w.writerow([t, a, b, c])
    with open(paths[2], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["generator", "interior", "order", "x", "y"])
        for cell in cells:
            for k, (x, y) in enumerate(cell.vertices):
                w.writerow([cell.generator_index, int(cell.interior), k, f"{x:.9g}", f"{y:.9g}"])
    return paths
