"""Two-phase path-guided trajectory optimization.

Phase 1 pulls the free control points toward points sampled along a
collision-free guiding path while keeping the elastic-band smoothness term
small; the objective is quadratic, so it is solved exactly. Phase 2 refines
the result on the distance field with collision and feasibility penalties.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import lbfgs
from .bspline import UniformBSpline
from .exceptions import RejectedInput
from .voxel_map import VoxelField


@dataclass(frozen=True)
class PgoWeights:
    lambda1_s: float = 1.0
    lambda1_g: float = 10.0
    lambda2_s: float = 1.0
    lambda2_c: float = 10.0
    lambda2_d: float = 1.0
    clearance: float = 0.4
    v_max: float = 3.0
    a_max: float = 2.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value > 0:
                raise RejectedInput(f"{name} must be positive, got {value}")


class GuidingPath:
    """Piecewise-linear path parameterized by arc length."""

    def __init__(self, waypoints):
        pts = np.asarray(waypoints, dtype=float)
        if pts.ndim != 2 or len(pts) == 0:
            raise RejectedInput("guiding path needs at least one waypoint")
        # drop repeated points so arc length is strictly increasing
        keep = np.concatenate([[True], np.linalg.norm(np.diff(pts, axis=0), axis=1) > 1e-12])
        self.waypoints = pts[keep]
        seg = np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)
        self.arc_lengths = np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.arc_lengths[-1])

    def point_at(self, fraction) -> np.ndarray:
        """Position(s) at arc-length fraction(s) in [0, 1]."""
        s = np.clip(np.asarray(fraction, dtype=float), 0.0, 1.0) * self.length
        return np.stack([np.interp(s, self.arc_lengths, self.waypoints[:, k]) for k in range(3)], axis=-1)

    def __len__(self):
        return len(self.waypoints)

    def __repr__(self):
        return f"GuidingPath({len(self)} waypoints, length={self.length:.3f})"


@dataclass
class OptimizationReport:
    converged: bool
    iterations: int
    final_cost: float
    elapsed: float
    phase: int


@dataclass
class Phase2Cost:
    smoothness: float
    collision: float
    velocity: float
    acceleration: float
    total: float
    gradient: np.ndarray  # (M, 3) w.r.t. free control points


def guide_points(path: GuidingPath, spline: UniformBSpline) -> np.ndarray:
    """Attraction targets for the free control points, uniform in arc length."""
    m = spline.n - 2 * spline.degree + 1
    if m < 1:
        raise RejectedInput("spline has no free control points")
    fractions = np.array([0.5]) if m == 1 else np.arange(m) / (m - 1)
    return path.point_at(fractions)


@lru_cache(maxsize=64)
def _second_difference(n_pts: int, degree: int) -> np.ndarray:
    """Rows ``Q_{i+1} - 2 Q_i + Q_{i-1}`` for ``i = p-1 .. N-p+1``."""
    n = n_pts - 1
    centers = np.arange(degree - 1, n - degree + 2)
    d = np.zeros((len(centers), n_pts))
    rows = np.arange(len(centers))
    d[rows, centers - 1] = 1.0
    d[rows, centers] = -2.0
    d[rows, centers + 1] = 1.0
    d.setflags(write=False)
    return d


def phase1_cost(ctrl_pts: np.ndarray, guides: np.ndarray, degree: int, w: PgoWeights):
    """Value and free-point gradient of the phase-1 objective."""
    q = np.asarray(ctrl_pts, dtype=float)
    free = slice(degree, len(q) - degree)
    d = _second_difference(len(q), degree)
    band = d @ q
    diff = q[free] - guides
    value = w.lambda1_s * np.sum(band**2) + w.lambda1_g * np.sum(diff**2)
    grad = 2 * w.lambda1_s * (d.T @ band)[free] + 2 * w.lambda1_g * diff
    return float(value), grad


def phase1_solve(init: UniformBSpline, path: GuidingPath, w: PgoWeights) -> UniformBSpline:
    """Exact minimizer of the phase-1 quadratic with boundary points held fixed."""
    p = init.degree
    q = np.array(init.ctrl_pts)
    guides = guide_points(path, init)
    d = _second_difference(len(q), p)
    free = np.zeros(len(q), dtype=bool)
    free[p : len(q) - p] = True

    df, dc = d[:, free], d[:, ~free]
    lhs = w.lambda1_s * df.T @ df + w.lambda1_g * np.eye(free.sum())
    rhs = w.lambda1_g * guides - w.lambda1_s * df.T @ (dc @ q[~free])
    q[free] = np.linalg.solve(lhs, rhs)
    return init.with_ctrl_pts(q)


def _hinge_quartic(x: np.ndarray, limit: float):
    """``max(0, x^2 - limit^2)^2`` and its derivative; C1 at the threshold."""
    excess = np.maximum(x * x - limit * limit, 0.0)
    return excess**2, 4.0 * excess * x


def phase2_costs(spline: UniformBSpline, field: VoxelField, w: PgoWeights) -> Phase2Cost:
    q = spline.ctrl_pts
    p, dt = spline.degree, spline.dt
    free = spline.free_slice

    d2 = _second_difference(len(q), p)
    band = d2 @ q
    f_s = float(np.sum(band**2))
    g_full = 2 * w.lambda2_s * (d2.T @ band)

    dist, ddist = field.distance_and_gradient(q[free])
    gap = np.minimum(dist - w.clearance, 0.0)
    f_c = float(np.sum(gap**2))
    g_c = 2 * gap[:, None] * ddist

    vel = np.diff(q, axis=0) / dt
    pen_v, dpen_v = _hinge_quartic(vel, w.v_max)
    acc = np.diff(vel, axis=0) / dt
    pen_a, dpen_a = _hinge_quartic(acc, w.a_max)
    # V_i = (Q_{i+1} - Q_i)/dt ; A_i = (V_{i+1} - V_i)/dt
    g_dyn = np.zeros_like(q)
    g_dyn[1:] += dpen_v / dt
    g_dyn[:-1] -= dpen_v / dt
    g_va = np.zeros_like(vel)
    g_va[1:] += dpen_a / dt
    g_va[:-1] -= dpen_a / dt
    g_dyn[1:] += g_va / dt
    g_dyn[:-1] -= g_va / dt
    f_v, f_a = float(pen_v.sum()), float(pen_a.sum())

    total = w.lambda2_s * f_s + w.lambda2_c * f_c + w.lambda2_d * (f_v + f_a)
    grad = g_full[free] + w.lambda2_c * g_c + w.lambda2_d * g_dyn[free]
    return Phase2Cost(f_s, f_c, f_v, f_a, total, grad)


def phase2_refine(
    warmup: UniformBSpline,
    field: VoxelField,
    w: PgoWeights,
    budget: float | None = None,
    max_iter: int = 200,
    history: int = 8,
) -> tuple[UniformBSpline, OptimizationReport]:
    """Quasi-Newton refinement of the free control points.

    ``budget`` is wall-clock seconds (None disables the time limit).
    """
    started = time.perf_counter()
    if budget is not None and budget <= 0:
        cost = phase2_costs(warmup, field, w).total
        return warmup, OptimizationReport(False, 0, cost, 0.0, 2)

    q = np.array(warmup.ctrl_pts)
    free = warmup.free_slice
    shape = q[free].shape

    def objective(x):
        q[free] = x.reshape(shape)
        c = phase2_costs(warmup.with_ctrl_pts(q), field, w)
        return c.total, c.gradient.ravel()

    deadline = None if budget is None else started + budget
    res = lbfgs.minimize(objective, q[free].ravel(), history=history, max_iter=max_iter, deadline=deadline)
    q[free] = res.x.reshape(shape)
    report = OptimizationReport(res.converged, res.iterations, res.fun, time.perf_counter() - started, 2)
    return warmup.with_ctrl_pts(q), report


def pgo_replan(
    init: UniformBSpline,
    path: GuidingPath,
    field: VoxelField,
    w: PgoWeights,
    budget: float | None = None,
    max_iter: int = 200,
) -> tuple[UniformBSpline, tuple[OptimizationReport, OptimizationReport]]:
    """Phase 1 then phase 2; ``budget`` covers both phases."""
    started = time.perf_counter()
    warm = phase1_solve(init, path, w)
    cost1, _ = phase1_cost(warm.ctrl_pts, guide_points(path, init), init.degree, w)
    elapsed1 = time.perf_counter() - started
    report1 = OptimizationReport(True, 1, cost1, elapsed1, 1)
    remaining = None if budget is None else budget - elapsed1
    refined, report2 = phase2_refine(warm, field, w, remaining, max_iter=max_iter)
    return refined, (report1, report2)
