"""Exact squared Euclidean distance transform on voxel grids.

Separable lower-envelope-of-parabolas transform (Felzenszwalb & Huttenlocher),
one 1-D pass per axis. Distances are in voxel units between voxel centers.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_INF = 1e20


@njit(cache=True)
def _envelope_1d(f, out, v, z):
    n = f.shape[0]
    k = 0
    v[0] = 0
    z[0] = -_INF
    z[1] = _INF
    for q in range(1, n):
        fq = f[q] + q * q
        s = (fq - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = (fq - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = _INF
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d = q - v[k]
        out[q] = d * d + f[v[k]]


@njit(cache=True)
def _transform_axis0(grid):
    n0, n1, n2 = grid.shape
    f = np.empty(n0)
    out = np.empty(n0)
    v = np.empty(n0, dtype=np.int64)
    z = np.empty(n0 + 1)
    for j in range(n1):
        for k in range(n2):
            for i in range(n0):
                f[i] = grid[i, j, k]
            _envelope_1d(f, out, v, z)
            for i in range(n0):
                grid[i, j, k] = out[i]


def squared_edt(seeds: np.ndarray) -> np.ndarray:
    """Squared distance (voxel units) from every voxel center to the nearest seed.

    Returns an array filled with a huge sentinel where no seed exists.
    """
    grid = np.where(seeds, 0.0, _INF)
    for axis in range(3):
        moved = np.ascontiguousarray(np.moveaxis(grid, axis, 0))
        _transform_axis0(moved)
        grid = np.moveaxis(moved, 0, axis)
    return np.ascontiguousarray(grid)
