"""Incremental Delaunay triangulation (Bowyer-Watson with ghost triangles).

Points are inserted along a Hilbert curve; each insertion locates the point by
a visibility walk from the previously created triangle, carves out the cavity
of triangles whose circumdisk contains it, and re-fans the cavity boundary to
the new vertex. The hull is closed by "ghost" triangles that share a symbolic
vertex at infinity, which keeps outside-the-hull insertions on the same code
path as interior ones.

Cocircular ties are broken deterministically: a cocircular neighbour joins
the cavity only if that replaces the shared diagonal with one whose sorted
index pair is lexicographically smaller.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..errors import DegenerateInputError, GeometryError
from .predicates import incircle, orient2d

_OK = 0
_ERR_COLLINEAR = 1
_ERR_DUPLICATE = 2
_ERR_WALK = 3
_ERR_ORIENT = 4

_MESSAGES = {
    _ERR_COLLINEAR: "all points are collinear",
    _ERR_DUPLICATE: "duplicate points",
    _ERR_WALK: "point location walk did not terminate",
    _ERR_ORIENT: "cavity retriangulation produced a non-positive triangle",
}


@njit(cache=True)
def _hilbert_keys(pts, order_bits=16):
    n = pts.shape[0]
    keys = np.empty(n, np.int64)
    xmin = pts[:, 0].min()
    ymin = pts[:, 1].min()
    span = max(pts[:, 0].max() - xmin, pts[:, 1].max() - ymin)
    if span <= 0.0:
        span = 1.0
    side = 1 << order_bits
    scale = (side - 1) / span
    for i in range(n):
        x = int((pts[i, 0] - xmin) * scale)
        y = int((pts[i, 1] - ymin) * scale)
        d = 0
        s = side >> 1
        while s > 0:
            rx = 1 if (x & s) > 0 else 0
            ry = 1 if (y & s) > 0 else 0
            d += s * s * ((3 * rx) ^ ry)
            if ry == 0:
                if rx == 1:
                    x = side - 1 - x
                    y = side - 1 - y
                x, y = y, x
            s >>= 1
        keys[i] = d
    return keys


@njit(cache=True)
def _orient_idx(pts, a, b, c):
    return orient2d(pts[a, 0], pts[a, 1], pts[b, 0], pts[b, 1], pts[c, 0], pts[c, 1])


@njit(cache=True)
def _set_opposite(tri, nbr, t, vertex, value):
    for k in range(3):
        if tri[t, k] == vertex:
            nbr[t, k] = value
            return


@njit(cache=True)
def _strictly_between(pts, u, v, p):
    # p is known to be collinear with u, v
    if pts[u, 0] != pts[v, 0]:
        lo = min(pts[u, 0], pts[v, 0])
        hi = max(pts[u, 0], pts[v, 0])
        return lo < pts[p, 0] < hi
    lo = min(pts[u, 1], pts[v, 1])
    hi = max(pts[u, 1], pts[v, 1])
    return lo < pts[p, 1] < hi


@njit(cache=True)
def _pair_less(p, q, x, y):
    a0 = min(p, q)
    a1 = max(p, q)
    b0 = min(x, y)
    b1 = max(x, y)
    return a0 < b0 or (a0 == b0 and a1 < b1)


@njit(cache=True)
def _in_conflict(pts, tri, ghost, u, x, y, p):
    a = tri[u, 0]
    b = tri[u, 1]
    c = tri[u, 2]
    if c == ghost:
        o = _orient_idx(pts, a, b, p)
        if o > 0:
            return True
        if o < 0:
            return False
        return _strictly_between(pts, a, b, p)
    s = incircle(pts[a, 0], pts[a, 1], pts[b, 0], pts[b, 1],
                 pts[c, 0], pts[c, 1], pts[p, 0], pts[p, 1])
    if s > 0:
        return True
    if s < 0:
        return False
    apex = a
    if apex == x or apex == y:
        apex = b
        if apex == x or apex == y:
            apex = c
    return _pair_less(p, apex, x, y)


@njit(cache=True)
def _new_triangle(tri, nbr, alive, free, nfree, nt, v0, v1, v2, ghost):
    # canonical storage keeps the ghost vertex in slot 2
    if v0 == ghost:
        v0, v1, v2 = v1, v2, v0
    elif v1 == ghost:
        v0, v1, v2 = v2, v0, v1
    if nfree > 0:
        nfree -= 1
        t = free[nfree]
    else:
        t = nt
        nt += 1
    tri[t, 0] = v0
    tri[t, 1] = v1
    tri[t, 2] = v2
    nbr[t, 0] = -1
    nbr[t, 1] = -1
    nbr[t, 2] = -1
    alive[t] = True
    return t, nfree, nt


@njit(cache=True)
def _build(pts, order):
    n = pts.shape[0]
    ghost = n
    cap = 2 * n + 16
    tri = np.full((cap, 3), -1, np.int64)
    nbr = np.full((cap, 3), -1, np.int64)
    alive = np.zeros(cap, np.bool_)
    free = np.empty(cap, np.int64)
    nfree = 0
    nt = 0
    in_cavity = np.zeros(cap, np.int64)
    rejected = np.zeros(cap, np.int64)
    start_of = np.full(n + 1, -1, np.int64)
    end_of = np.full(n + 1, -1, np.int64)

    # seed triangle: first point, first distinct point, first non-collinear point
    i0 = order[0]
    j1 = -1
    for j in range(1, n):
        q = order[j]
        if pts[q, 0] != pts[i0, 0] or pts[q, 1] != pts[i0, 1]:
            j1 = j
            break
    if j1 < 0:
        return tri[:0], nbr[:0], alive[:0], _ERR_DUPLICATE
    i1 = order[j1]
    j2 = -1
    for j in range(j1 + 1, n):
        if _orient_idx(pts, i0, i1, order[j]) != 0:
            j2 = j
            break
    if j2 < 0:
        return tri[:0], nbr[:0], alive[:0], _ERR_COLLINEAR
    i2 = order[j2]
    if _orient_idx(pts, i0, i1, i2) < 0:
        i1, i2 = i2, i1

    t0, nfree, nt = _new_triangle(tri, nbr, alive, free, nfree, nt, i0, i1, i2, ghost)
    g01, nfree, nt = _new_triangle(tri, nbr, alive, free, nfree, nt, i1, i0, ghost, ghost)
    g12, nfree, nt = _new_triangle(tri, nbr, alive, free, nfree, nt, i2, i1, ghost, ghost)
    g20, nfree, nt = _new_triangle(tri, nbr, alive, free, nfree, nt, i0, i2, ghost, ghost)
    nbr[t0, 0] = g12
    nbr[t0, 1] = g20
    nbr[t0, 2] = g01
    # ghost (u, v, G): slot 2 faces the solid side, slots 0/1 face neighbouring ghosts
    nbr[g01, 2] = t0
    nbr[g01, 0] = g20
    nbr[g01, 1] = g12
    nbr[g12, 2] = t0
    nbr[g12, 0] = g01
    nbr[g12, 1] = g20
    nbr[g20, 2] = t0
    nbr[g20, 0] = g12
    nbr[g20, 1] = g01

    stack = np.empty(cap, np.int64)
    b_from = np.empty(cap, np.int64)
    b_to = np.empty(cap, np.int64)
    b_out = np.empty(cap, np.int64)
    b_new = np.empty(cap, np.int64)
    last = t0
    stamp = 0

    for j in range(1, n):
        if j == j1 or j == j2:
            continue
        p = order[j]
        px = pts[p, 0]
        py = pts[p, 1]

        # visibility walk
        t = last
        if tri[t, 2] == ghost:
            t = nbr[t, 2]
        steps = 0
        while True:
            if tri[t, 2] == ghost:
                break
            moved = False
            zeros = 0
            for kk in range(3):
                i = (kk + steps) % 3
                e0 = tri[t, (i + 1) % 3]
                e1 = tri[t, (i + 2) % 3]
                o = orient2d(pts[e0, 0], pts[e0, 1], pts[e1, 0], pts[e1, 1], px, py)
                if o < 0:
                    t = nbr[t, i]
                    moved = True
                    break
                if o == 0:
                    zeros += 1
            if not moved:
                if zeros >= 2:
                    return tri[:0], nbr[:0], alive[:0], _ERR_DUPLICATE
                break
            steps += 1
            if steps > 4 * n + 100:
                return tri[:0], nbr[:0], alive[:0], _ERR_WALK

        # cavity search
        stamp += 1
        nstack = 1
        stack[0] = t
        in_cavity[t] = stamp
        nb = 0
        while nstack > 0:
            nstack -= 1
            c = stack[nstack]
            for i in range(3):
                u = nbr[c, i]
                x = tri[c, (i + 1) % 3]
                y = tri[c, (i + 2) % 3]
                if in_cavity[u] == stamp:
                    continue
                if rejected[u] != stamp and _in_conflict(pts, tri, ghost, u, x, y, p):
                    in_cavity[u] = stamp
                    stack[nstack] = u
                    nstack += 1
                    continue
                rejected[u] = stamp
                b_from[nb] = x
                b_to[nb] = y
                b_out[nb] = u
                nb += 1
            alive[c] = False
            free[nfree] = c
            nfree += 1

        # re-fan the cavity boundary around p
        for k in range(nb):
            x = b_from[k]
            y = b_to[k]
            if x != ghost and y != ghost and _orient_idx(pts, x, y, p) <= 0:
                return tri[:0], nbr[:0], alive[:0], _ERR_ORIENT
            tn, nfree, nt = _new_triangle(tri, nbr, alive, free, nfree, nt, x, y, p, ghost)
            b_new[k] = tn
            start_of[x] = tn
            end_of[y] = tn
            u = b_out[k]
            _set_opposite(tri, nbr, tn, p, u)
            for kk in range(3):
                w = tri[u, kk]
                if w != x and w != y:
                    nbr[u, kk] = tn
                    break
        for k in range(nb):
            x = b_from[k]
            y = b_to[k]
            tn = b_new[k]
            _set_opposite(tri, nbr, tn, x, start_of[y])
            _set_opposite(tri, nbr, tn, y, end_of[x])
            if tri[tn, 2] != ghost:
                last = tn
        for k in range(nb):
            start_of[b_from[k]] = -1
            end_of[b_to[k]] = -1

    return tri[:nt], nbr[:nt], alive[:nt], _OK


@njit(cache=True)
def _compact(tri, nbr, alive, n):
    ghost = n
    nt = tri.shape[0]
    remap = np.full(nt, -1, np.int64)
    count = 0
    for t in range(nt):
        if alive[t] and tri[t, 2] != ghost:
            remap[t] = count
            count += 1
    out_tri = np.empty((count, 3), np.int64)
    out_nbr = np.empty((count, 3), np.int64)
    hull = np.zeros(n, np.bool_)
    vert_tri = np.full(n, -1, np.int64)
    for t in range(nt):
        r = remap[t]
        if r < 0:
            continue
        for k in range(3):
            out_tri[r, k] = tri[t, k]
            m = nbr[t, k]
            out_nbr[r, k] = remap[m]
            if vert_tri[tri[t, k]] < 0:
                vert_tri[tri[t, k]] = r
    return out_tri, out_nbr, hull, vert_tri, remap


@dataclass(frozen=True)
class Triangulation:
    """Delaunay triangulation of a planar point set.

    ``triangles[t]`` holds counterclockwise vertex indices, ``neighbors[t, k]``
    the triangle across the edge opposite ``triangles[t, k]`` (-1 on the hull).
    """

    points: np.ndarray
    triangles: np.ndarray
    neighbors: np.ndarray
    hull_flags: np.ndarray
    vertex_triangle: np.ndarray = field(repr=False)

    @property
    def n_points(self) -> int:
        return int(self.points.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @property
    def n_hull(self) -> int:
        return int(self.hull_flags.sum())


def triangulate(points) -> Triangulation:
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateInputError("points must have shape (n, 2)")
    if pts.shape[0] < 3:
        raise DegenerateInputError(f"need at least 3 points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise DegenerateInputError("non-finite coordinates")
    keys = _hilbert_keys(pts)
    order = np.argsort(keys, kind="stable")
    raw_tri, raw_nbr, raw_alive, status = _build(pts, order)
    if status != _OK:
        cls = DegenerateInputError if status in (_ERR_COLLINEAR, _ERR_DUPLICATE) else GeometryError
        raise cls(_MESSAGES[status])
    n = pts.shape[0]
    tri, nbr, hull, vert_tri, _ = _compact(raw_tri, raw_nbr, raw_alive, n)
    hull_edges = nbr < 0
    if hull_edges.any():
        t_idx, k_idx = np.nonzero(hull_edges)
        hull[tri[t_idx, (k_idx + 1) % 3]] = True
        hull[tri[t_idx, (k_idx + 2) % 3]] = True
    for arr in (tri, nbr, hull, vert_tri, pts):
        arr.setflags(write=False)
    return Triangulation(points=pts, triangles=tri, neighbors=nbr, hull_flags=hull,
                         vertex_triangle=vert_tri)
