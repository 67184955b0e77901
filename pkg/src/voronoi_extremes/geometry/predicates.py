"""Orientation and in-circle predicates with exact fallback.

A floating-point evaluation is accepted when its magnitude exceeds a forward
error bound (Shewchuk's stage-A bounds). Otherwise the determinant is
recomputed exactly with floating-point expansion arithmetic, so the returned
sign is always correct for double-precision inputs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_EPS = 2.0 ** -53
_SPLITTER = 134217729.0  # 2^27 + 1
CCW_ERRBOUND = (3.0 + 16.0 * _EPS) * _EPS
ICC_ERRBOUND = (10.0 + 96.0 * _EPS) * _EPS


@njit(cache=True)
def _two_sum(a, b):
    x = a + b
    bv = x - a
    av = x - bv
    return x, (a - av) + (b - bv)


@njit(cache=True)
def _two_diff(a, b):
    x = a - b
    bv = a - x
    av = x + bv
    return x, (a - av) + (bv - b)


@njit(cache=True)
def _split(a):
    c = _SPLITTER * a
    big = c - a
    hi = c - big
    return hi, a - hi


@njit(cache=True)
def _two_product(a, b):
    x = a * b
    ahi, alo = _split(a)
    bhi, blo = _split(b)
    err = x - ahi * bhi - alo * bhi - ahi * blo
    return x, alo * blo - err


@njit(cache=True)
def _grow(e, b):
    # e + b as a nonoverlapping expansion with zero components removed
    h = np.empty(e.shape[0] + 1)
    k = 0
    q = b
    for i in range(e.shape[0]):
        q, hh = _two_sum(q, e[i])
        if hh != 0.0:
            h[k] = hh
            k += 1
    if q != 0.0 or k == 0:
        h[k] = q
        k += 1
    return h[:k]


@njit(cache=True)
def expansion_sum(e, f):
    h = e
    for i in range(f.shape[0]):
        h = _grow(h, f[i])
    return h


@njit(cache=True)
def scale_expansion(e, b):
    h = np.empty(2 * e.shape[0] + 1)
    k = 0
    q, hh = _two_product(e[0], b)
    if hh != 0.0:
        h[k] = hh
        k += 1
    for i in range(1, e.shape[0]):
        p1, p0 = _two_product(e[i], b)
        s, hh = _two_sum(q, p0)
        if hh != 0.0:
            h[k] = hh
            k += 1
        q, hh = _two_sum(p1, s)  # fast-two-sum is valid here; two_sum is safe
        if hh != 0.0:
            h[k] = hh
            k += 1
    if q != 0.0 or k == 0:
        h[k] = q
        k += 1
    return h[:k]


@njit(cache=True)
def expansion_product(e, f):
    h = np.zeros(1)
    for i in range(f.shape[0]):
        h = expansion_sum(h, scale_expansion(e, f[i]))
    return h


@njit(cache=True)
def expansion_sign(e):
    # components are ordered by increasing magnitude; the last nonzero one dominates
    for i in range(e.shape[0] - 1, -1, -1):
        if e[i] > 0.0:
            return 1
        if e[i] < 0.0:
            return -1
    return 0


@njit(cache=True)
def _diff2(a, b):
    x, y = _two_diff(a, b)
    out = np.empty(2)
    out[0] = y
    out[1] = x
    return out


@njit(cache=True)
def orient2d_exact(ax, ay, bx, by, cx, cy):
    acx = _diff2(ax, cx)
    acy = _diff2(ay, cy)
    bcx = _diff2(bx, cx)
    bcy = _diff2(by, cy)
    det = expansion_sum(expansion_product(acx, bcy), -expansion_product(acy, bcx))
    return expansion_sign(det)


@njit(cache=True)
def orient2d(ax, ay, bx, by, cx, cy):
    """Sign of twice the signed area of (a, b, c): +1 counterclockwise."""
    detleft = (ax - cx) * (by - cy)
    detright = (ay - cy) * (bx - cx)
    det = detleft - detright
    bound = CCW_ERRBOUND * (abs(detleft) + abs(detright))
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return orient2d_exact(ax, ay, bx, by, cx, cy)


@njit(cache=True)
def incircle_exact(ax, ay, bx, by, cx, cy, dx, dy):
    adx = _diff2(ax, dx)
    ady = _diff2(ay, dy)
    bdx = _diff2(bx, dx)
    bdy = _diff2(by, dy)
    cdx = _diff2(cx, dx)
    cdy = _diff2(cy, dy)
    alift = expansion_sum(expansion_product(adx, adx), expansion_product(ady, ady))
    blift = expansion_sum(expansion_product(bdx, bdx), expansion_product(bdy, bdy))
    clift = expansion_sum(expansion_product(cdx, cdx), expansion_product(cdy, cdy))
    bc = expansion_sum(expansion_product(bdx, cdy), -expansion_product(bdy, cdx))
    ca = expansion_sum(expansion_product(cdx, ady), -expansion_product(cdy, adx))
    ab = expansion_sum(expansion_product(adx, bdy), -expansion_product(ady, bdx))
    det = expansion_sum(
        expansion_sum(expansion_product(alift, bc), expansion_product(blift, ca)),
        expansion_product(clift, ab),
    )
    return expansion_sign(det)


@njit(cache=True)
def incircle(ax, ay, bx, by, cx, cy, dx, dy):
    """+1 if d lies strictly inside the circle through counterclockwise a, b, c."""
    adx = ax - dx
    bdx = bx - dx
    cdx = cx - dx
    ady = ay - dy
    bdy = by - dy
    cdy = cy - dy

    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    alift = adx * adx + ady * ady
    cdxady = cdx * ady
    adxcdy = adx * cdy
    blift = bdx * bdx + bdy * bdy
    adxbdy = adx * bdy
    bdxady = bdx * ady
    clift = cdx * cdx + cdy * cdy

    det = (alift * (bdxcdy - cdxbdy)
           + blift * (cdxady - adxcdy)
           + clift * (adxbdy - bdxady))
    permanent = ((abs(bdxcdy) + abs(cdxbdy)) * alift
                 + (abs(cdxady) + abs(adxcdy)) * blift
                 + (abs(adxbdy) + abs(bdxady)) * clift)
    bound = ICC_ERRBOUND * permanent
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return incircle_exact(ax, ay, bx, by, cx, cy, dx, dy)
