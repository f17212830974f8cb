"""Occupancy grid with a Euclidean signed distance field.

Voxel ``(i, j, k)`` has its center at ``origin + (index + 0.5) * voxel_size``.
All distances are measured between voxel centers, so the zero level set of the
interpolated field sits on the faces between occupied and free voxels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._edt import squared_edt
from ._field import distances, distances_and_gradients, first_blocked
from .exceptions import RejectedInput


@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float, float]
    voxel_size: float
    dims: tuple[int, int, int]

    def __post_init__(self):
        if not self.voxel_size > 0:
            raise RejectedInput(f"voxel_size must be positive, got {self.voxel_size}")
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise RejectedInput(f"dims must be three integers >= 1, got {self.dims}")
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + np.asarray(self.dims) * self.voxel_size

    def center(self, index) -> np.ndarray:
        """World position of voxel center(s); ``index`` is (3,) or (n, 3)."""
        return self.lower + (np.asarray(index, dtype=float) + 0.5) * self.voxel_size

    def index_of(self, p) -> np.ndarray:
        """Index of the voxel containing ``p`` (not clipped to the grid)."""
        return np.floor((np.asarray(p, dtype=float) - self.lower) / self.voxel_size).astype(int)

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.all((p >= self.lower) & (p <= self.upper), axis=-1)


@dataclass(frozen=True)
class QueryPolicy:
    out_of_bounds_distance: float = 10.0
    margin: float = 0.0

    def __post_init__(self):
        if self.margin < 0:
            raise RejectedInput("margin must be non-negative")


@dataclass(frozen=True, eq=False)
class VoxelField:
    """Immutable occupancy + ESDF pair; every query is read-only."""

    spec: GridSpec
    occupancy: np.ndarray
    esdf: np.ndarray
    policy: QueryPolicy = field(default_factory=QueryPolicy)

    def __post_init__(self):
        esdf = np.ascontiguousarray(self.esdf, dtype=float)
        object.__setattr__(self, "esdf", esdf)
        self.occupancy.setflags(write=False)
        esdf.setflags(write=False)
        # kernel arguments, computed once
        object.__setattr__(self, "_args", (
            esdf,
            self.spec.lower,
            float(self.spec.voxel_size),
            self.spec.upper,
            float(self.policy.out_of_bounds_distance),
        ))

    @staticmethod
    def _points(p) -> np.ndarray:
        return np.ascontiguousarray(np.atleast_2d(np.asarray(p, dtype=float)))

    def distance_at(self, p) -> np.ndarray | float:
        """Trilinearly interpolated signed distance at ``p`` ((3,) or (n, 3))."""
        d = distances(*self._args, self._points(p))
        return float(d[0]) if np.ndim(p) == 1 else d

    def distance_and_gradient(self, p):
        """Interpolated distance and its analytic gradient, vectorized over points."""
        d, grad = distances_and_gradients(*self._args, self._points(p))
        if np.ndim(p) == 1:
            return float(d[0]), grad[0]
        return d, grad

    def gradient_at(self, p) -> np.ndarray:
        return self.distance_and_gradient(p)[1]

    # -- visibility --------------------------------------------------------

    def _walk(self, a, b, margin, stop_early=False):
        margin = self.policy.margin if margin is None else margin
        a, b = self._points(a), self._points(b)
        if len(a) > 1 and len(b) > 1 and len(a) != len(b):
            raise RejectedInput(f"cannot pair {len(a)} segment starts with {len(b)} ends")
        return first_blocked(*self._args, a, b, float(margin), stop_early)

    def lines_visible(self, a, b, margin: float | None = None) -> np.ndarray:
        """Batch visibility for segments ``a[k] -> b[k]``; ``a`` or ``b`` may be a single point."""
        if np.size(a) == 0 or np.size(b) == 0:
            return np.zeros(0, dtype=bool)
        hit, _ = self._walk(a, b, margin)
        return ~hit

    def all_visible(self, a, b, margin: float | None = None) -> bool:
        """``lines_visible(a, b, margin).all()``, stopping at the first blocked segment."""
        if np.size(a) == 0 or np.size(b) == 0:
            return True
        hit, _ = self._walk(a, b, margin, stop_early=True)
        return not hit.any()

    def line_visible(self, a, b, margin: float | None = None):
        """Whether segment a->b keeps clearance above ``margin`` everywhere.

        Returns ``(visible, index)`` where ``index`` is the voxel containing the
        first blocked sample walking from ``a`` (None when visible).
        """
        hit, points = self._walk(a, b, margin)
        if not hit[0]:
            return True, None
        index = np.clip(self.spec.index_of(points[0]), 0, np.asarray(self.spec.dims) - 1)
        return False, tuple(int(i) for i in index)


def build_esdf(
    occupancy: np.ndarray, spec: GridSpec, policy: QueryPolicy | None = None
) -> VoxelField:
    """Signed distance field: distance to occupied minus distance to free voxel centers."""
    policy = policy or QueryPolicy()
    occupancy = np.asarray(occupancy)
    if occupancy.shape != spec.dims:
        raise RejectedInput(f"occupancy shape {occupancy.shape} does not match dims {spec.dims}")
    occ = occupancy.astype(bool)

    if not occ.any():
        esdf = np.full(spec.dims, policy.out_of_bounds_distance)
    elif occ.all():
        esdf = np.full(spec.dims, -policy.out_of_bounds_distance)
    else:
        to_occ = np.sqrt(squared_edt(occ))
        to_free = np.sqrt(squared_edt(~occ))
        esdf = (to_occ - to_free) * spec.voxel_size
    return VoxelField(spec=spec, occupancy=occ.copy(), esdf=esdf, policy=policy)


def save_map(path, occupancy: np.ndarray, spec: GridSpec) -> None:
    """Write the plain-text map format (header + x-fastest 0/1 values)."""
    occ = np.asarray(occupancy).astype(bool)
    nx, ny, nz = spec.dims
    header = " ".join(repr(float(v)) for v in (*spec.origin, spec.voxel_size))
    lines = [f"{header} {nx} {ny} {nz}"]
    flat = occ.transpose(2, 1, 0).reshape(-1, nx).astype(np.uint8)
    lines.extend(" ".join(map(str, row)) for row in flat)
    Path(path).write_text("\n".join(lines) + "\n")


def load_map(path) -> tuple[np.ndarray, GridSpec]:
    tokens = Path(path).read_text().split()
    if len(tokens) < 7:
        raise RejectedInput(f"{path}: truncated map header")
    ox, oy, oz, vs = (float(t) for t in tokens[:4])
    nx, ny, nz = (int(t) for t in tokens[4:7])
    spec = GridSpec((ox, oy, oz), vs, (nx, ny, nz))
    values = tokens[7:]
    if len(values) != nx * ny * nz:
        raise RejectedInput(f"{path}: expected {nx * ny * nz} occupancy values, got {len(values)}")
    if not set(values) <= {"0", "1"}:
        raise RejectedInput(f"{path}: occupancy values must be 0 or 1")
    flat = np.array(values) == "1"
    return flat.reshape(nz, ny, nx).transpose(2, 1, 0).copy(), spec
