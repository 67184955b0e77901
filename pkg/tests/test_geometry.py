import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voronoi_extremes.errors import DegenerateInputError, DegenerateTriangleError
from voronoi_extremes.geometry import (
    cell_table,
    circumcenter,
    circumcenters,
    is_interior,
    triangulate,
    voronoi_cells,
    write_tessellation_csv,
)
from voronoi_extremes.geometry.predicates import incircle, orient2d


# ------------------------------------------------------------------ oracles

def orient_oracle(a, b, c):
    a, b, c = [tuple(map(Fraction, p)) for p in (a, b, c)]
    det = (a[0] - c[0]) * (b[1] - c[1]) - (a[1] - c[1]) * (b[0] - c[0])
    return (det > 0) - (det < 0)


def incircle_oracle(a, b, c, d):
    rows = []
    for p in (a, b, c):
        x = Fraction(p[0]) - Fraction(d[0])
        y = Fraction(p[1]) - Fraction(d[1])
        rows.append((x, y, x * x + y * y))
    (a1, a2, a3), (b1, b2, b3), (c1, c2, c3) = rows
    det = a3 * (b1 * c2 - b2 * c1) + b3 * (c1 * a2 - c2 * a1) + c3 * (a1 * b2 - a2 * b1)
    return (det > 0) - (det < 0)


def brute_force_empty_circle(tri):
    """Indices of (triangle, point) pairs with the point strictly inside the circumdisk."""
    pts = tri.points
    bad = []
    for t, (i, j, k) in enumerate(tri.triangles):
        a, b, c = pts[i], pts[j], pts[k]
        for p in range(len(pts)):
            if p in (i, j, k):
                continue
            if incircle_oracle(a, b, c, pts[p]) > 0:
                bad.append((t, p))
    return bad


def hull_size(points):
    from scipy.spatial import ConvexHull

    hull = ConvexHull(points, qhull_options="Qc")
    # coplanar (collinear-on-edge) points count as hull vertices here
    return len(set(hull.vertices) | set(hull.coplanar[:, 0]))


# ---------------------------------------------------------------- predicates

def test_orient2d_signs():
    assert orient2d(0.0, 0.0, 1.0, 0.0, 0.0, 1.0) == 1
    assert orient2d(0.0, 0.0, 0.0, 1.0, 1.0, 0.0) == -1
    assert orient2d(0.0, 0.0, 1.0, 1.0, 2.0, 2.0) == 0


def test_predicates_near_degenerate_match_exact_rationals():
    rng = np.random.default_rng(5)
    for _ in range(300):
        # points on a line through two random points, nudged by a few ulps
        p, q = rng.random(2), rng.random(2)
        t = rng.random()
        r = p + t * (q - p)
        r = r + rng.integers(-2, 3, size=2) * np.spacing(r)
        assert orient2d(*p, *q, *r) == orient_oracle(p, q, r)


def test_incircle_cocircular_and_perturbed():
    a, b, c, d = (0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)
    assert incircle(*a, *b, *c, *d) == 0
    assert incircle(*a, *b, *c, 0.0, 1.0 - 2 ** -52) == 1
    assert incircle(*a, *b, *c, 0.0, 1.0 + 2 ** -52) == -1
    rng = np.random.default_rng(8)
    for _ in range(300):
        ang = rng.uniform(0, 2 * math.pi, 4)
        cx, cy, r = rng.random(3) + 0.5
        pts = [(cx + r * math.cos(t), cy + r * math.sin(t)) for t in sorted(ang[:3])]
        d = (cx + r * math.cos(ang[3]), cy + r * math.sin(ang[3]))
        assert incircle(*pts[0], *pts[1], *pts[2], *d) == incircle_oracle(*pts, d)


# ---------------------------------------------------------------- delaunay

def test_three_points_one_triangle():
    tri = triangulate([(0, 0), (1, 0), (0, 1)])
    assert tri.n_triangles == 1
    assert sorted(tri.triangles[0]) == [0, 1, 2]
    assert tri.hull_flags.all()


def test_unit_square_follows_tie_rule():
    tri = triangulate([(0, 0), (1, 0), (1, 1), (0, 1)])
    assert tri.n_triangles == 2
    shared = set(tri.triangles[0]) & set(tri.triangles[1])
    # both diagonals are Delaunay; the lexicographically smaller pair (0, 2) wins
    assert shared == {0, 2}


@pytest.mark.parametrize("pts", [
    [(0, 0), (1, 1)],
    [(0, 0), (1, 1), (2, 2), (3, 3)],
    [(0, 0), (1, 0), (0, 0)],
])
def test_degenerate_input(pts):
    with pytest.raises(DegenerateInputError):
        triangulate(pts)


def test_random_200_empty_circumcircle_brute_force():
    pts = np.random.default_rng(2024).random((200, 2))
    tri = triangulate(pts)
    assert brute_force_empty_circle(tri) == []


def test_triangles_are_ccw_and_neighbors_consistent():
    pts = np.random.default_rng(1).random((500, 2))
    tri = triangulate(pts)
    P = tri.points[tri.triangles]
    area2 = ((P[:, 1, 0] - P[:, 0, 0]) * (P[:, 2, 1] - P[:, 0, 1])
             - (P[:, 1, 1] - P[:, 0, 1]) * (P[:, 2, 0] - P[:, 0, 0]))
    assert np.all(area2 > 0)
    for t in range(tri.n_triangles):
        for k in range(3):
            u = tri.neighbors[t, k]
            edge = {tri.triangles[t, (k + 1) % 3], tri.triangles[t, (k + 2) % 3]}
            if u < 0:
                continue
            assert t in tri.neighbors[u]
            assert edge <= set(tri.triangles[u])


def test_euler_identity_and_hull():
    rng = np.random.default_rng(9)
    for n in (3, 10, 57, 300, 2000):
        pts = rng.random((n, 2))
        tri = triangulate(pts)
        h = int(tri.hull_flags.sum())
        assert h == hull_size(pts)
        assert tri.n_triangles == 2 * n - 2 - h


def test_collinear_hull_points_are_hull():
    g = np.array([(x, y) for y in range(3) for x in range(3)], dtype=float)
    tri = triangulate(g)
    assert tri.hull_flags.sum() == 8
    assert not tri.hull_flags[4]
    assert tri.n_triangles == 2 * 9 - 2 - 8


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 60), st.integers(0, 2 ** 32 - 1))
def test_empty_circle_property_on_lattice_like_sets(n, seed):
    # integer lattice points produce many exact cocircular ties
    rng = np.random.default_rng(seed)
    pts = np.unique(rng.integers(0, 6, size=(n, 2)), axis=0).astype(float)
    if len(pts) < 3 or np.linalg.matrix_rank(pts - pts[0]) < 2:
        return
    tri = triangulate(pts)
    assert brute_force_empty_circle(tri) == []
    assert tri.n_triangles == 2 * len(pts) - 2 - int(tri.hull_flags.sum())


def test_triangulation_is_immutable():
    tri = triangulate(np.random.default_rng(0).random((20, 2)))
    with pytest.raises(ValueError):
        tri.triangles[0, 0] = 5


def test_large_window_far_from_origin():
    # coordinates around 1e5 stress relative precision of the predicates
    pts = 1e5 + np.random.default_rng(4).random((3000, 2)) * 10
    tri = triangulate(pts)
    assert tri.n_triangles == 2 * 3000 - 2 - int(tri.hull_flags.sum())


# -------------------------------------------------------------- circumcenter

def test_circumcenter_right_triangle():
    assert circumcenter((0, 0), (1, 0), (0, 1)) == pytest.approx((0.5, 0.5), abs=1e-15)


def test_circumcenter_equilateral():
    c = circumcenter((0, 0), (1, 0), (0.5, math.sqrt(3) / 2))
    assert c == pytest.approx((0.5, math.sqrt(3) / 6), abs=1e-15)


def test_circumcenter_equidistance_random():
    corners = np.random.default_rng(12).random((10_000, 3, 2))
    centers, radii = circumcenters(corners)
    d = np.linalg.norm(corners - centers[:, None, :], axis=2)
    assert np.max(np.abs(d - radii[:, None]) / radii[:, None]) <= 1e-10


def test_circumcenter_degenerate():
    with pytest.raises(DegenerateTriangleError):
        circumcenter((0, 0), (1, 1), (2, 2))
    centers, radii = circumcenters(np.array([[(0, 0), (1, 1), (2, 2)]], float), strict=False)
    assert np.isinf(radii[0])


# ------------------------------------------------------------------- voronoi

def _grid3(offset=0.0):
    return np.array([(x + offset, y + offset) for y in range(3) for x in range(3)], dtype=float)


def test_grid_center_cell_is_square():
    tri = triangulate(_grid3())
    cells = voronoi_cells(tri)
    center = cells[4]
    assert center.interior
    assert len(center.vertices) == 4
    expected = {(0.5, 0.5), (1.5, 0.5), (1.5, 1.5), (0.5, 1.5)}
    got = {tuple(np.round(v, 12)) for v in center.vertices}
    assert got == expected
    # edge-adjacent grid points always share a Voronoi edge with the center
    assert {1, 3, 5, 7} <= set(center.neighbor_indices)


def test_hull_generators_not_interior():
    tri = triangulate(np.random.default_rng(6).random((100, 2)))
    for cell in voronoi_cells(tri, side=1.0):
        if tri.hull_flags[cell.generator_index]:
            assert not cell.interior


def test_interior_vertices_equidistant_to_three_generators():
    pts = np.random.default_rng(7).random((2000, 2)) * 40
    tri = triangulate(pts)
    for cell in voronoi_cells(tri, side=40.0):
        if not cell.interior:
            continue
        g = pts[cell.generator_index]
        nb = pts[list(cell.neighbor_indices)]
        for v in cell.vertices:
            r = np.linalg.norm(v - g)
            d = np.linalg.norm(nb - v, axis=1)
            assert np.sum(np.abs(d - r) <= 1e-9 * r) >= 2


def test_duality_consecutive_vertices_share_a_neighbor():
    pts = np.random.default_rng(17).random((800, 2)) * 25
    tri = triangulate(pts)
    for cell in voronoi_cells(tri, side=25.0):
        if not cell.interior:
            continue
        g = pts[cell.generator_index]
        nb = np.array(cell.neighbor_indices)
        m = len(cell.vertices)
        assert m >= 3
        for i in range(m):
            v, w = cell.vertices[i], cell.vertices[(i + 1) % m]
            rv, rw = np.linalg.norm(v - g), np.linalg.norm(w - g)
            dv = np.abs(np.linalg.norm(pts[nb] - v, axis=1) - rv) <= 1e-9 * rv
            dw = np.abs(np.linalg.norm(pts[nb] - w, axis=1) - rw) <= 1e-9 * rw
            assert np.any(dv & dw)


def test_is_interior_examples():
    tri = triangulate(_grid3(offset=10.0))
    cells = voronoi_cells(tri)
    assert is_interior(cells[4], tri, side=22.0)
    assert not is_interior(cells[0], tri, side=22.0)
    # same configuration hugging the window corner: circumdisks cross the edge
    tri2 = triangulate(_grid3(offset=0.2))
    assert not is_interior(voronoi_cells(tri2)[4], tri2, side=2.5)


def test_cell_table_agrees_with_is_interior():
    pts = np.random.default_rng(3).random((1500, 2)) * 30
    tri = triangulate(pts)
    table = cell_table(tri, 30.0)
    cells = voronoi_cells(tri)
    flags = np.array([is_interior(c, tri, 30.0) for c in cells])
    assert np.array_equal(flags, table.interior)


def test_guard_restricts_interior():
    pts = np.random.default_rng(3).random((1500, 2)) * 30
    tri = triangulate(pts)
    plain = cell_table(tri, 30.0)
    guarded = cell_table(tri, 30.0, guard=3.0)
    assert np.all(guarded.interior <= plain.interior)
    inner = np.all((pts >= 3.0) & (pts <= 27.0), axis=1)
    assert not np.any(guarded.interior & ~inner)
    assert guarded.incomplete == int(np.count_nonzero(inner & ~plain.interior))


def test_mean_vertex_count_near_six_small():
    pts = np.random.default_rng(21).random((20_000, 2)) * math.sqrt(20_000)
    tri = triangulate(pts)
    table = cell_table(tri, math.sqrt(20_000))
    kept = np.add.reduceat(table.keep.astype(int), table.offsets[:-1])
    assert abs(kept[table.interior].mean() - 6.0) < 0.1


def test_tessellation_csv_dump(tmp_path):
    tri = triangulate(_grid3(offset=10.0))
    paths = write_tessellation_csv(tri, tmp_path, side=22.0)
    assert [p.name for p in paths] == ["points.csv", "triangles.csv", "cells.csv"]
    lines = paths[2].read_text().splitlines()
    assert lines[0] == "generator,interior,order,x,y"
    center_rows = [ln for ln in lines[1:] if ln.startswith("4,")]
    assert len(center_rows) == 4 and all(r.split(",")[1] == "1" for r in center_rows)
    assert b"\r" not in paths[0].read_bytes()
