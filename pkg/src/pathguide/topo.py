"""Topological roadmap over uniform-visibility-deformation (UVD) classes.

Two same-endpoint paths are UVD-equivalent when, parameterizing both
uniformly by arc length over ``s in [0, 1]``, every straight line between
``tau1(s)`` and ``tau2(s)`` is collision-free. The roadmap keeps guard nodes
that are mutually invisible and connector nodes that link exactly two guards,
one connector per distinct class of guard-to-guard connection.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .exceptions import RejectedInput
from .pgo import GuidingPath
from .voxel_map import VoxelField

log = logging.getLogger(__name__)

GUARD = "guard"
CONNECTOR = "connector"


@dataclass(frozen=True)
class TopoConfig:
    t_max: float | None = 0.003
    n_max: int = 1000
    k_uvd: int = 20
    k_max: int = 5
    r_max: float = 3.0
    margin: float = 0.2
    max_raw_paths: int = 100

    def __post_init__(self):
        if self.t_max is not None and not self.t_max > 0:
            raise RejectedInput("t_max must be positive (or None for no time limit)")
        if self.n_max < 1 or self.k_max < 1 or self.max_raw_paths < 1:
            raise RejectedInput("sample and path caps must be positive")
        if self.k_uvd < 2:
            raise RejectedInput("k_uvd must be at least 2")
        if not self.r_max > 1:
            raise RejectedInput("r_max must exceed 1")
        if self.margin < 0:
            raise RejectedInput("margin must be non-negative")


@dataclass
class TopoNode:
    position: np.ndarray
    kind: str
    neighbors: list[int] = dc_field(default_factory=list)


@dataclass
class TopoRoadmap:
    nodes: list[TopoNode]
    region: tuple[np.ndarray, np.ndarray]
    samples: int = 0
    elapsed: float = 0.0
    start: int = 0
    goal: int = 1

    def guards(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.kind == GUARD]

    def connectors(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.kind == CONNECTOR]

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, n in enumerate(self.nodes) for j in n.neighbors if i < j]


def path_length(path) -> float:
    path = np.asarray(path, dtype=float)
    return float(np.linalg.norm(np.diff(path, axis=0), axis=1).sum())


def uniform_points(path, count: int) -> np.ndarray:
    """``count`` points at uniform arc-length fractions ``i / (count - 1)``."""
    path = np.asarray(path, dtype=float)
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    # repeated waypoints would make the arc-length table non-increasing
    path = path[np.concatenate([[True], seg > 0])]
    arc = np.concatenate([[0.0], np.cumsum(seg[seg > 0])])
    if arc[-1] == 0.0:
        return np.repeat(path[:1], count, axis=0)
    s = np.linspace(0.0, arc[-1], count)
    return np.stack([np.interp(s, arc, path[:, k]) for k in range(path.shape[1])], axis=-1)


def uvd_equivalent(p1, p2, field: VoxelField, k_uvd: int = 20, margin: float = 0.0) -> bool:
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if np.linalg.norm(p1[0] - p2[0]) > 1e-9 or np.linalg.norm(p1[-1] - p2[-1]) > 1e-9:
        raise RejectedInput("UVD comparison needs paths with identical endpoints")
    a = uniform_points(p1, k_uvd + 1)
    b = uniform_points(p2, k_uvd + 1)
    return field.all_visible(a, b, margin)


def _shared_neighbors(nodes: list[TopoNode], g0: int, g1: int) -> list[int]:
    other = set(nodes[g1].neighbors)
    return [n for n in nodes[g0].neighbors if n in other]


def build_roadmap(
    field: VoxelField,
    start,
    goal,
    region,
    cfg: TopoConfig,
    rng_seed: int = 0,
    batch: int = 32,
) -> TopoRoadmap:
    """Guard/connector roadmap built by uniform sampling inside ``region``.

    Only samples seeing exactly zero or two guards change the graph; samples
    seeing one or more than two guards are discarded.
    """
    started = time.perf_counter()
    lo, hi = (np.asarray(b, dtype=float) for b in region)
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    for name, p in (("start", start), ("goal", goal)):
        if field.distance_at(p) <= cfg.margin:
            raise RejectedInput(f"{name} {p} is in collision")

    nodes = [TopoNode(start, GUARD), TopoNode(goal, GUARD)]
    guards = [0, 1]
    guard_pos = np.array([start, goal])
    rng = np.random.default_rng(rng_seed)
    deadline = None if cfg.t_max is None else started + cfg.t_max

    n_sample = 0
    pending = np.empty((0, 3))
    iter_time = 0.0
    while n_sample < cfg.n_max:
        now = time.perf_counter()
        if deadline is not None and now + iter_time > deadline:
            break
        if len(pending) == 0:
            draws = rng.uniform(lo, hi, size=(min(batch, cfg.n_max - n_sample), 3))
            free = field.distance_at(draws) > cfg.margin
            # rejected samples still count toward the sample cap
            pending = np.where(free[:, None], draws, np.nan)
        sample, pending = pending[0], pending[1:]
        n_sample += 1
        if np.isnan(sample[0]):
            continue

        visible = np.flatnonzero(field.lines_visible(guard_pos, sample, cfg.margin))
        if len(visible) == 0:
            nodes.append(TopoNode(sample, GUARD))
            guards.append(len(nodes) - 1)
            guard_pos = np.vstack([guard_pos, sample])
        elif len(visible) == 2:
            g0, g1 = guards[visible[0]], guards[visible[1]]
            path1 = np.array([nodes[g0].position, sample, nodes[g1].position])
            distinct = True
            for ns in _shared_neighbors(nodes, g0, g1):
                path2 = np.array([nodes[g0].position, nodes[ns].position, nodes[g1].position])
                if uvd_equivalent(path1, path2, field, cfg.k_uvd, cfg.margin):
                    distinct = False
                    if path_length(path1) < path_length(path2):
                        nodes[ns].position = sample
                    break
            if distinct:
                nodes.append(TopoNode(sample, CONNECTOR, [g0, g1]))
                c = len(nodes) - 1
                nodes[g0].neighbors.append(c)
                nodes[g1].neighbors.append(c)
        iter_time = 0.5 * iter_time + 0.5 * (time.perf_counter() - now)

    return TopoRoadmap(nodes, (lo, hi), samples=n_sample, elapsed=time.perf_counter() - started)


def search_paths(roadmap: TopoRoadmap, max_paths: int = 100) -> list[np.ndarray]:
    """Acyclic start-to-goal paths found by depth-first search with a visited list."""
    nodes = roadmap.nodes
    found: list[list[int]] = []
    route = [roadmap.start]
    visited = {roadmap.start}
    stack = [iter(nodes[roadmap.start].neighbors)]
    while stack and len(found) < max_paths:
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            visited.discard(route.pop())
            continue
        if nxt in visited:
            continue
        if nxt == roadmap.goal:
            found.append(route + [nxt])
            continue
        route.append(nxt)
        visited.add(nxt)
        stack.append(iter(nodes[nxt].neighbors))
    return [np.array([nodes[i].position for i in r]) for r in found]


def _discretize(path: np.ndarray, step: float) -> np.ndarray:
    """Points every ``step`` along each segment, always keeping the waypoints."""
    pts = [path[0]]
    for a, b in zip(path[:-1], path[1:]):
        n = max(int(np.ceil(np.linalg.norm(b - a) / step)), 1)
        t = np.arange(1, n + 1)[:, None] / n
        pts.extend(a + t * (b - a))
    return np.array(pts)


def _orthogonal(direction: np.ndarray) -> np.ndarray:
    axis = np.zeros(3)
    axis[np.argmin(np.abs(direction))] = 1.0
    v = axis - (axis @ direction) * direction
    return v / np.linalg.norm(v)


def _push_away(field: VoxelField, block_index, line_dir: np.ndarray, margin: float, max_steps: int):
    """Move a blocking voxel center out of the margin band, orthogonal to the line."""
    p_b = field.spec.center(block_index)
    grad = field.gradient_at(p_b)
    d = grad - (grad @ line_dir) * line_dir
    norm = np.linalg.norm(d)
    d = _orthogonal(line_dir) if norm < 1e-6 else d / norm
    steps = p_b + field.spec.voxel_size * np.arange(1, max_steps + 1)[:, None] * d
    ok = np.flatnonzero(field.distance_at(steps) > margin)
    return steps[ok[0]] if ok.size else None


def shorten_path(
    path,
    field: VoxelField,
    cfg: TopoConfig,
    max_push_steps: int = 50,
    max_retries: int = 8,
    chunk: int = 32,
) -> tuple[np.ndarray, bool]:
    """Shortcut a collision-free path while staying in its UVD class.

    Walks discretized points of the input that clear the margin; whenever the last kept waypoint
    cannot see the current point, the first blocking voxel center is pushed
    out of the obstacle (orthogonal to the blocked line, along the distance
    gradient) and appended. A pushed point is only accepted if it keeps
    line-of-sight to both the last kept waypoint and the previous discretized
    point; otherwise that previous point is kept instead, so every emitted
    segment stays visible. Returns ``(path, flagged)`` where ``flagged`` means
    the result failed its post-checks and the input is returned unchanged.
    """
    path = np.asarray(path, dtype=float)
    margin = cfg.margin
    pts = _discretize(path, field.spec.voxel_size)
    # points inside the margin band can never be seen, so they cannot anchor a shortcut
    keep = field.distance_at(pts) > margin
    keep[[0, -1]] = True
    pts = pts[keep]
    out = [pts[0]]

    def visible(a, b):
        return field.line_visible(a, b, margin)

    i = 1
    while i < len(pts):
        # skip ahead in batches while the kept waypoint still sees the walk
        seen = field.lines_visible(out[-1], pts[i : i + chunk], margin)
        blocked_at = np.flatnonzero(~seen)
        if blocked_at.size == 0:
            i += len(seen)
            continue
        i += int(blocked_at[0])
        p_d, prev = pts[i], pts[i - 1]
        i += 1
        for _ in range(max_retries):
            back = out[-1]
            ok, block = visible(back, p_d)
            if ok:
                break
            if np.array_equal(back, prev):
                break
            line = p_d - back
            line_dir = line / np.linalg.norm(line)
            p_o = _push_away(field, block, line_dir, margin, max_push_steps)
            if p_o is not None and visible(back, p_o)[0] and visible(p_o, prev)[0]:
                out.append(p_o)
            else:
                out.append(prev)
        else:
            if not np.array_equal(out[-1], prev):
                out.append(prev)
    if not np.array_equal(out[-1], pts[-1]):
        out.append(pts[-1])
    short = np.array(out)

    if (
        path_length(short) <= path_length(path) + 1e-9
        and field.all_visible(short[:-1], short[1:], margin)
        # class membership is judged against obstacles alone; the input may
        # itself dip inside the margin band
        and uvd_equivalent(path, short, field, cfg.k_uvd, 0.0)
    ):
        return short, False
    log.debug("shortcut rejected; keeping the input path")
    return path, True


def apply_selection_rules(lengths, k_max: int, r_max: float) -> list[int]:
    """Indices kept by the shortest-``k_max`` cut followed by the length-ratio cut."""
    order = sorted(range(len(lengths)), key=lambda i: lengths[i])[:k_max]
    if not order:
        return []
    shortest = lengths[order[0]]
    return [i for i in order if lengths[i] <= r_max * shortest]


def select_guiding_paths(paths, field: VoxelField, cfg: TopoConfig) -> list[GuidingPath]:
    """Shorten, drop UVD duplicates (keeping the shorter), then cap count and length ratio."""
    shortened = [shorten_path(p, field, cfg)[0] for p in paths]
    lengths = [path_length(p) for p in shortened]
    order = sorted(range(len(shortened)), key=lambda i: lengths[i])
    kept: list[int] = []
    for i in order:
        if not any(uvd_equivalent(shortened[i], shortened[j], field, cfg.k_uvd, cfg.margin) for j in kept):
            kept.append(i)
    chosen = apply_selection_rules([lengths[i] for i in kept], cfg.k_max, cfg.r_max)
    return [GuidingPath(shortened[kept[i]]) for i in chosen]
