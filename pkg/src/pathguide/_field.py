"""Compiled trilinear queries on a signed distance grid.

Voxel centers sit at ``lower + (index + 0.5) * vs``. Continuous indices are
clamped to the grid so the outer half-voxel shell extrapolates the border
cells flatly along the clamped axis; points outside ``[lower, upper]`` get ``oob`` and zero gradient.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _axis(x, lower, vs, n):
    u = (x - lower) / vs - 0.5
    clamped = u < 0.0 or u > n - 1
    if u < 0.0:
        u = 0.0
    elif u > n - 1:
        u = float(n - 1)
    lo = min(int(np.floor(u)), max(n - 2, 0))
    return lo, min(lo + 1, n - 1), u - lo, clamped


@njit(cache=True)
def _outside(lower, upper, x, y, z):
    return x < lower[0] or x > upper[0] or y < lower[1] or y > upper[1] or z < lower[2] or z > upper[2]


@njit(cache=True)
def _interp(esdf, lower, vs, upper, oob, x, y, z, want_grad, grad):
    if _outside(lower, upper, x, y, z):
        if want_grad:
            grad[0] = 0.0
            grad[1] = 0.0
            grad[2] = 0.0
        return oob
    n0, n1, n2 = esdf.shape
    x0, x1, fx, cx = _axis(x, lower[0], vs, n0)
    y0, y1, fy, cy = _axis(y, lower[1], vs, n1)
    z0, z1, fz, cz = _axis(z, lower[2], vs, n2)
    c000 = esdf[x0, y0, z0]
    c100 = esdf[x1, y0, z0]
    c010 = esdf[x0, y1, z0]
    c110 = esdf[x1, y1, z0]
    c001 = esdf[x0, y0, z1]
    c101 = esdf[x1, y0, z1]
    c011 = esdf[x0, y1, z1]
    c111 = esdf[x1, y1, z1]
    c00 = c000 + (c100 - c000) * fx
    c10 = c010 + (c110 - c010) * fx
    c01 = c001 + (c101 - c001) * fx
    c11 = c011 + (c111 - c011) * fx
    c0 = c00 + (c10 - c00) * fy
    c1 = c01 + (c11 - c01) * fy
    if want_grad:
        # the border shell extrapolates flatly, so a clamped axis has no slope
        gx = (1 - fz) * ((1 - fy) * (c100 - c000) + fy * (c110 - c010)) + fz * (
            (1 - fy) * (c101 - c001) + fy * (c111 - c011)
        )
        grad[0] = 0.0 if cx else gx / vs
        grad[1] = 0.0 if cy else ((c10 - c00) * (1 - fz) + (c11 - c01) * fz) / vs
        grad[2] = 0.0 if cz else (c1 - c0) / vs
    return c0 + (c1 - c0) * fz


@njit(cache=True)
def distances(esdf, lower, vs, upper, oob, points):
    out = np.empty(points.shape[0])
    dummy = np.empty(3)
    for k in range(points.shape[0]):
        out[k] = _interp(esdf, lower, vs, upper, oob, points[k, 0], points[k, 1], points[k, 2], False, dummy)
    return out


@njit(cache=True)
def distances_and_gradients(esdf, lower, vs, upper, oob, points):
    out = np.empty(points.shape[0])
    grad = np.empty((points.shape[0], 3))
    for k in range(points.shape[0]):
        out[k] = _interp(esdf, lower, vs, upper, oob, points[k, 0], points[k, 1], points[k, 2], True, grad[k])
    return out, grad


@njit(cache=True)
def _swap(a, b):
    # lexicographic endpoint order keeps visibility symmetric bit for bit
    for ax in range(3):
        if a[ax] != b[ax]:
            return a[ax] > b[ax]
    return False


@njit(cache=True)
def first_blocked(esdf, lower, vs, upper, oob, a, b, margin, stop_early):
    """Per segment ``a[k] -> b[k]``: whether it is blocked, and the first hit from ``a``.

    Samples are spaced at most ``vs / 2`` apart along the canonically ordered
    segment, so the sample set does not depend on direction. With
    ``stop_early`` the scan ends at the first blocked segment.
    """
    m = max(a.shape[0], b.shape[0])
    step = vs / 2
    hit = np.zeros(m, dtype=np.bool_)
    points = np.zeros((m, 3))
    dummy = np.empty(3)
    for k in range(m):
        pa = a[k if a.shape[0] > 1 else 0]
        pb = b[k if b.shape[0] > 1 else 0]
        backwards = _swap(pa, pb)
        lo, hi = (pb, pa) if backwards else (pa, pb)
        dx = hi[0] - lo[0]
        dy = hi[1] - lo[1]
        dz = hi[2] - lo[2]
        n = max(int(np.ceil(np.sqrt(dx * dx + dy * dy + dz * dz) / step)), 1)
        for s in range(n + 1):
            j = n - s if backwards else s
            t = j / n
            x = lo[0] + t * dx
            y = lo[1] + t * dy
            z = lo[2] + t * dz
            if _interp(esdf, lower, vs, upper, oob, x, y, z, False, dummy) <= margin:
                hit[k] = True
                points[k, 0] = x
                points[k, 1] = y
                points[k, 2] = z
                break
        if stop_early and hit[k]:
            break
    return hit, points
