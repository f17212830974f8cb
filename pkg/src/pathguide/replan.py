"""Replanning event: detect a collision ahead, search guiding paths, run PGO per path."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .bspline import UniformBSpline, reparameterize_segment
from .exceptions import RejectedInput
from .pgo import GuidingPath, OptimizationReport, PgoWeights, pgo_replan, phase2_refine
from .topo import TopoConfig, TopoRoadmap, build_roadmap, search_paths, select_guiding_paths
from .voxel_map import VoxelField


@dataclass(frozen=True)
class ReplanRequest:
    reference: UniformBSpline
    t_now: float
    horizon: float = 9.0
    cube_inflation: tuple[float, float, float] = (1.5, 2.5, 1.0)
    roadmap_budget: float | None = 0.003
    optimization_budget: float | None = 0.010

    def __post_init__(self):
        if not self.horizon > 0:
            raise RejectedInput("horizon must be positive")
        if any(not r > 0 for r in self.cube_inflation):
            raise RejectedInput("cube inflation components must be positive")


@dataclass(frozen=True)
class ReplanConfig:
    weights: PgoWeights = dc_field(default_factory=PgoWeights)
    topo: TopoConfig = dc_field(default_factory=TopoConfig)
    ctrl_spacing: float = 0.4
    anchor_padding: float = 1.5
    max_iter: int = 200
    feasibility_tolerance: float = 1.05


@dataclass
class Candidate:
    path: GuidingPath | None
    trajectory: UniformBSpline
    reports: tuple[OptimizationReport, ...]
    cost: float
    failed: bool


@dataclass
class ReplanOutcome:
    triggered: bool
    segment: tuple[float, float] | None = None
    initial: UniformBSpline | None = None
    roadmap: TopoRoadmap | None = None
    raw_paths: list[np.ndarray] = dc_field(default_factory=list)
    candidates: list[Candidate] = dc_field(default_factory=list)
    best: int | None = None
    fallback: Candidate | None = None
    timing: dict[str, float] = dc_field(default_factory=dict)

    @property
    def trajectory(self) -> UniformBSpline | None:
        """Selected trajectory, or the unguided fallback when no path was found."""
        if self.best is not None:
            return self.candidates[self.best].trajectory
        if self.fallback is not None and not self.fallback.failed:
            return self.fallback.trajectory
        return None


def _arc_samples(reference: UniformBSpline, t_from: float, t_to: float, step: float):
    """Times along the reference spaced at most ``step`` apart in arc length."""
    vel = reference.derivative()
    speed_bound = max(float(np.linalg.norm(vel.ctrl_pts, axis=1).max()), 1e-9)
    n = max(int(np.ceil((t_to - t_from) * speed_bound / step)), 1)
    times = np.linspace(t_from, t_to, n + 1)
    pts = reference.evaluate(times)
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    return times, pts, arc


def check_collision(
    reference: UniformBSpline,
    field: VoxelField,
    t_now: float,
    horizon: float,
    clearance: float,
    padding: float = 0.0,
) -> tuple[float, float] | None:
    """Earliest colliding interval within ``horizon`` metres ahead, widened to safe anchors.

    The interval where the distance is non-positive is extended on each side
    until the anchor sample has clearance above ``clearance`` and so does every
    sample within ``padding`` metres of it on the side facing the collision.
    With ``padding = 0`` this is the nearest sample above ``clearance``.
    Anchors may lie past the horizon but never outside the reference domain or
    before ``t_now``; when no such sample exists the domain end is used.
    """
    lo, hi = reference.domain
    if not lo - 1e-9 <= t_now <= hi + 1e-9:
        raise RejectedInput("t_now outside the reference domain")
    times, pts, arc = _arc_samples(reference, max(t_now, lo), hi, field.spec.voxel_size / 2)
    dist = field.distance_at(pts)
    in_horizon = arc <= horizon
    hits = np.flatnonzero((dist <= 0) & in_horizon)
    if hits.size == 0:
        return None
    first = hits[0]
    last = first
    while last + 1 < len(dist) and dist[last + 1] <= 0:
        last += 1

    # an anchor needs `padding` metres of uninterrupted clearance on its inner
    # side, so the optimizer has room to rejoin the reference
    safe = dist > clearance
    a, run_end = first, None
    while a > 0:
        if not safe[a]:
            run_end = None
        elif run_end is None:
            run_end = arc[a]
        if run_end is not None and run_end - arc[a] >= padding:
            break
        a -= 1
    b, run_start = last, None
    while b < len(dist) - 1:
        if not safe[b]:
            run_start = None
        elif run_start is None:
            run_start = arc[b]
        if run_start is not None and arc[b] - run_start >= padding:
            break
        b += 1
    return float(times[a]), float(times[b])


def replan_cube(a, b, inflation) -> tuple[np.ndarray, np.ndarray]:
    a, b, r = (np.asarray(v, dtype=float) for v in (a, b, inflation))
    return np.minimum(a, b) - r, np.maximum(a, b) + r


def boundary_states(reference: UniformBSpline, t: float, degree: int) -> np.ndarray:
    """Position and derivatives ``1..degree-1`` of the reference at ``t``."""
    states, curve = [], reference
    for order in range(degree):
        if order > 0:
            curve = curve.derivative()
        states.append(curve.evaluate(t))
    return np.array(states)


def initial_spline(reference: UniformBSpline, t_a: float, t_b: float, cfg: ReplanConfig) -> UniformBSpline:
    """Reparameterize the reference between two anchors, pinning their boundary states."""
    p = reference.degree
    times, pts, arc = _arc_samples(reference, t_a, t_b, cfg.ctrl_spacing / 4)
    spans = max(int(np.ceil(arc[-1] / cfg.ctrl_spacing)), p + 1)
    return reparameterize_segment(
        times,
        pts,
        degree=p,
        dt=(t_b - t_a) / spans,
        start_state=boundary_states(reference, t_a, p),
        end_state=boundary_states(reference, t_b, p),
    )


def trajectory_ok(spline: UniformBSpline, field: VoxelField, w: PgoWeights, tolerance: float = 1.05) -> bool:
    """Collision-free at dense samples (voxel/4) and within the per-axis dynamic limits."""
    lo, hi = spline.domain
    vel = spline.derivative()
    acc = vel.derivative()
    speed_bound = max(float(np.linalg.norm(vel.ctrl_pts, axis=1).max()), 1e-9)
    n = max(int(np.ceil(spline.duration * speed_bound / (field.spec.voxel_size / 4))), 2)
    t = np.linspace(lo, hi, n + 1)
    if np.any(field.distance_at(spline.evaluate(t)) <= 0):
        return False
    if np.abs(vel.evaluate(t)).max() > tolerance * w.v_max:
        return False
    return bool(np.abs(acc.evaluate(t)).max() <= tolerance * w.a_max)


def _judge(spline: UniformBSpline, field: VoxelField, cfg: ReplanConfig) -> bool:
    free_clear = field.distance_at(spline.ctrl_pts[spline.free_slice])
    if np.any(free_clear <= 0):
        return True
    return not trajectory_ok(spline, field, cfg.weights, cfg.feasibility_tolerance)


def unguided_refine(
    init: UniformBSpline, field: VoxelField, cfg: ReplanConfig, budget: float | None
) -> Candidate:
    """Plain gradient-based refinement of the initial spline (no guiding path)."""
    traj, report = phase2_refine(init, field, cfg.weights, budget, max_iter=cfg.max_iter)
    return Candidate(None, traj, (report,), report.final_cost, _judge(traj, field, cfg))


def replan(
    request: ReplanRequest,
    field: VoxelField,
    cfg: ReplanConfig | None = None,
    rng_seed: int = 0,
    workers: int | None = None,
) -> ReplanOutcome:
    cfg = cfg or ReplanConfig()
    w = cfg.weights
    segment = check_collision(
        request.reference, field, request.t_now, request.horizon, w.clearance, cfg.anchor_padding
    )
    if segment is None:
        return ReplanOutcome(triggered=False)

    t_a, t_b = segment
    init = initial_spline(request.reference, t_a, t_b, cfg)
    lo_t, hi_t = init.domain
    s, g = init.evaluate(lo_t), init.evaluate(hi_t)

    started = time.perf_counter()
    lo, hi = replan_cube(s, g, request.cube_inflation)
    lo = np.maximum(lo, field.spec.lower)
    hi = np.minimum(hi, field.spec.upper)
    topo_cfg = TopoConfig(**{**vars(cfg.topo), "t_max": request.roadmap_budget})
    roadmap = build_roadmap(field, s, g, (lo, hi), topo_cfg, rng_seed)
    roadmap_time = time.perf_counter() - started

    started = time.perf_counter()
    raw = search_paths(roadmap, cfg.topo.max_raw_paths)
    guides = select_guiding_paths(raw, field, topo_cfg) if raw else []
    path_time = time.perf_counter() - started

    outcome = ReplanOutcome(True, segment, init, roadmap, raw)
    started = time.perf_counter()
    budget = request.optimization_budget
    # one wall-clock deadline shared by all candidates, however late a thread starts
    deadline = None if budget is None else started + budget
    results = []
    if guides:

        def run(path: GuidingPath):
            remaining = None if deadline is None else deadline - time.perf_counter()
            return pgo_replan(init, path, field, w, remaining, cfg.max_iter)

        with ThreadPoolExecutor(max_workers=workers or len(guides)) as pool:
            results = list(pool.map(run, guides))
    else:
        fallback, fallback_report = phase2_refine(init, field, w, budget, max_iter=cfg.max_iter)
    optimization_time = time.perf_counter() - started

    started = time.perf_counter()
    if guides:
        outcome.candidates = [
            Candidate(path, traj, reports, reports[1].final_cost, _judge(traj, field, cfg))
            for path, (traj, reports) in zip(guides, results)
        ]
        ok = [i for i, c in enumerate(outcome.candidates) if not c.failed]
        if ok:
            outcome.best = min(ok, key=lambda i: outcome.candidates[i].cost)
    else:
        outcome.fallback = Candidate(
            None, fallback, (fallback_report,), fallback_report.final_cost, _judge(fallback, field, cfg)
        )
    outcome.timing = {
        "roadmap": roadmap_time,
        "paths": path_time,
        "optimization": optimization_time,
        "selection": time.perf_counter() - started,
    }
    return outcome

