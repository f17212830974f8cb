"""Random-map replanning benchmark: guided PGO versus unguided refinement."""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .bspline import UniformBSpline, load_trajectory, reparameterize_segment, save_trajectory, smoothness_metric
from .config import TIERS, ScenarioConfig, format_config
from .pgo import PgoWeights
from .replan import ReplanOutcome, ReplanRequest, replan, trajectory_ok, unguided_refine
from .voxel_map import GridSpec, VoxelField, build_esdf, load_map, save_map

CSV_COLUMNS = (
    "task_id",
    "tier",
    "method",
    "success",
    "smoothness",
    "roadmap_ms",
    "optimization_ms",
    "candidates",
)


@dataclass
class Task:
    task_id: int
    tier: str
    seed: int
    field: VoxelField
    boxes: np.ndarray  # (k, 2, 3) lower/upper corners
    start: np.ndarray
    goal: np.ndarray
    reference: UniformBSpline


@dataclass
class BenchmarkRecord:
    task_id: int
    tier: str
    method: str
    success: bool
    smoothness: float | None
    roadmap_ms: float
    optimization_ms: float
    candidates: int


def task_seed(seed: int, tier: str, task_id: int) -> int:
    return int(np.random.SeedSequence([seed, TIERS.index(tier), task_id]).generate_state(1)[0])


def straight_reference(start, goal, speed: float, spacing: float = 0.5, degree: int = 3) -> UniformBSpline:
    """Constant-velocity uniform B-spline from ``start`` to ``goal``."""
    start, goal = np.asarray(start, dtype=float), np.asarray(goal, dtype=float)
    length = float(np.linalg.norm(goal - start))
    duration = length / speed
    vel = (goal - start) / duration
    spans = max(int(np.ceil(length / spacing)), degree + 1)
    times = np.linspace(0.0, duration, 4 * spans + 1)
    higher = np.zeros((degree - 2, 3))
    return reparameterize_segment(
        times,
        start + times[:, None] * vel,
        degree,
        duration / spans,
        start_state=np.vstack([start, vel, higher]),
        end_state=np.vstack([goal, vel, higher]),
    )


def rasterize(boxes: np.ndarray, spec: GridSpec) -> np.ndarray:
    occ = np.zeros(spec.dims, dtype=bool)
    axes = [spec.lower[k] + (np.arange(spec.dims[k]) + 0.5) * spec.voxel_size for k in range(3)]
    for lo, hi in boxes:
        sl = []
        for k in range(3):
            idx = np.flatnonzero((axes[k] >= lo[k]) & (axes[k] <= hi[k]))
            sl.append(slice(idx[0], idx[-1] + 1) if idx.size else slice(0, 0))
        occ[tuple(sl)] = True
    return occ


def generate_map(tier: str, rng_seed: int, cfg: ScenarioConfig | None = None, task_id: int = 0) -> Task:
    """Random box obstacles plus a start/goal pair whose straight line is blocked."""
    cfg = cfg or ScenarioConfig()
    rng = np.random.default_rng(rng_seed)
    vs = cfg.voxel_size
    dims = tuple(int(round(s / vs)) for s in (cfg.map_x, cfg.map_y, cfg.map_z))
    spec = GridSpec((0.0, 0.0, 0.0), vs, dims)
    size = np.array([cfg.map_x, cfg.map_y, cfg.map_z])

    boxes = []
    for _ in range(cfg.obstacle_count(tier)):
        footprint = rng.uniform(cfg.obstacle_min_size, cfg.obstacle_max_size, size=2)
        height = rng.uniform(cfg.obstacle_min_height, cfg.obstacle_max_height)
        center = rng.uniform([0, 0], size[:2])
        lo = np.array([*(center - footprint / 2), 0.0])
        hi = np.array([*(center + footprint / 2), height])
        boxes.append((lo, hi))
    boxes = np.array(boxes).reshape(-1, 2, 3)
    field = build_esdf(rasterize(boxes, spec), spec)

    w = cfg.weights()
    border = 1.0
    fallback = None
    for _ in range(200):
        start = np.array([
            rng.uniform(border, cfg.map_x * 0.25),
            rng.uniform(border, cfg.map_y - border),
            rng.uniform(cfg.ref_z_min, cfg.ref_z_max),
        ])
        goal = np.array([
            rng.uniform(cfg.map_x * 0.75, cfg.map_x - border),
            rng.uniform(border, cfg.map_y - border),
            rng.uniform(cfg.ref_z_min, cfg.ref_z_max),
        ])
        if np.linalg.norm(goal - start) < cfg.ref_min_length:
            continue
        line = start + np.linspace(0, 1, 2000)[:, None] * (goal - start)
        dist = field.distance_at(line)
        # the reference must leave the start and reach the goal through free space
        arc = np.linspace(0, 1, 2000) * np.linalg.norm(goal - start)
        ends = (arc <= cfg.anchor_padding) | (arc >= arc[-1] - cfg.anchor_padding)
        if np.any(dist[ends] <= w.clearance):
            continue
        if np.any(dist <= 0):
            break
        fallback = fallback or (start, goal)
    else:
        if fallback is None:
            raise RuntimeError(f"seed {rng_seed}: no admissible start/goal pair in the {tier} map")
        # guarantee a blocked line by dropping a pillar on its midpoint
        start, goal = fallback
        mid = (start + goal) / 2
        half = cfg.obstacle_max_size / 2
        box = np.array([[mid[0] - half, mid[1] - half, 0.0], [mid[0] + half, mid[1] + half, cfg.map_z]])
        boxes = np.concatenate([boxes, box[None]])
        field = build_esdf(rasterize(boxes, spec), spec)

    reference = straight_reference(start, goal, cfg.ref_speed)
    return Task(task_id, tier, rng_seed, field, boxes, start, goal, reference)


def _request(task: Task, cfg: ScenarioConfig) -> ReplanRequest:
    roadmap_budget, opt_budget = cfg.budgets
    return ReplanRequest(
        reference=task.reference,
        t_now=task.reference.domain[0],
        horizon=cfg.horizon,
        cube_inflation=(cfg.cube_rx, cfg.cube_ry, cfg.cube_rz),
        roadmap_budget=roadmap_budget,
        optimization_budget=opt_budget,
    )


@dataclass
class TaskResult:
    task: Task
    outcome: ReplanOutcome
    unguided: object  # replan.Candidate
    records: tuple[BenchmarkRecord, BenchmarkRecord]
    timing: dict[str, float]


def run_task(task: Task, cfg: ScenarioConfig) -> TaskResult:
    rcfg = cfg.replan_config()
    request = _request(task, cfg)
    outcome = replan(request, task.field, rcfg, rng_seed=task.seed % (2**31))
    w = rcfg.weights

    guided_traj = outcome.trajectory
    guided_ok = guided_traj is not None and trajectory_ok(guided_traj, task.field, w)
    timing = dict(outcome.timing)

    if outcome.initial is not None:
        started = time.perf_counter()
        base = unguided_refine(outcome.initial, task.field, rcfg, request.optimization_budget)
        timing["unguided"] = time.perf_counter() - started
        base_ok = trajectory_ok(base.trajectory, task.field, w)
    else:
        base, base_ok = None, False
        timing["unguided"] = 0.0

    n_cand = len(outcome.candidates)
    guided = BenchmarkRecord(
        task.task_id, task.tier, "guided", guided_ok,
        smoothness_metric(guided_traj) if guided_ok else None,
        1e3 * (timing.get("roadmap", 0.0) + timing.get("paths", 0.0)),
        1e3 * timing.get("optimization", 0.0),
        n_cand,
    )
    unguided = BenchmarkRecord(
        task.task_id, task.tier, "unguided", base_ok,
        smoothness_metric(base.trajectory) if base_ok else None,
        0.0,
        1e3 * timing["unguided"],
        0,
    )
    return TaskResult(task, outcome, base, (guided, unguided), timing)


def iter_tasks(cfg: ScenarioConfig):
    for tier in cfg.tiers:
        for task_id in range(cfg.tasks):
            yield tier, task_id


def run_benchmark(cfg: ScenarioConfig, on_result=None) -> list[TaskResult]:
    """Run every (tier, task) pair; results come back in task order."""

    def one(item):
        tier, task_id = item
        task = generate_map(tier, task_seed(cfg.seed, tier, task_id), cfg, task_id)
        result = run_task(task, cfg)
        if on_result is not None:
            on_result(result)
        return result

    items = list(iter_tasks(cfg))
    if cfg.workers == 1:
        return [one(it) for it in items]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(one, items))


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.6f}"


def records_csv(records: list[BenchmarkRecord], include_timing: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([
            r.task_id, r.tier, r.method, int(r.success), _fmt(r.smoothness),
            f"{r.roadmap_ms if include_timing else 0.0:.3f}",
            f"{r.optimization_ms if include_timing else 0.0:.3f}",
            r.candidates,
        ])
    return buf.getvalue()


def read_records(text: str) -> list[BenchmarkRecord]:
    rows = csv.DictReader(io.StringIO(text))
    return [
        BenchmarkRecord(
            int(r["task_id"]), r["tier"], r["method"], r["success"] == "1",
            float(r["smoothness"]) if r["smoothness"] else None,
            float(r["roadmap_ms"]), float(r["optimization_ms"]), int(r["candidates"]),
        )
        for r in rows
    ]


def summarize(records: list[BenchmarkRecord]) -> list[dict]:
    rows = []
    keys = sorted({(r.tier, r.method) for r in records}, key=lambda k: (TIERS.index(k[0]), k[1]))
    for tier, method in keys:
        group = [r for r in records if r.tier == tier and r.method == method]
        smooth = [r.smoothness for r in group if r.smoothness is not None]
        rows.append({
            "tier": tier,
            "method": method,
            "tasks": len(group),
            "success_rate": 100.0 * sum(r.success for r in group) / len(group),
            "median_smoothness": statistics.median(smooth) if smooth else None,
            "median_roadmap_ms": statistics.median(r.roadmap_ms for r in group),
            "median_optimization_ms": statistics.median(r.optimization_ms for r in group),
        })
    return rows


def format_summary(rows: list[dict]) -> str:
    header = f"{'tier':<8}{'method':<10}{'tasks':>7}{'success%':>10}{'smooth':>11}{'roadmap_ms':>12}{'opt_ms':>10}"
    out = [header, "-" * len(header)]
    for r in rows:
        smooth = "-" if r["median_smoothness"] is None else f"{r['median_smoothness']:.4f}"
        out.append(
            f"{r['tier']:<8}{r['method']:<10}{r['tasks']:>7}{r['success_rate']:>10.1f}{smooth:>11}"
            f"{r['median_roadmap_ms']:>12.3f}{r['median_optimization_ms']:>10.3f}"
        )
    return "\n".join(out) + "\n"


def write_benchmark(results: list[TaskResult], cfg: ScenarioConfig, out_dir) -> dict[str, Path]:
    """Write records.csv, summary.txt and timings.csv to ``out_dir``.

    In test mode the timing columns in records.csv are zeroed so that repeated
    runs are byte-identical; measured timings always go to timings.csv.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = [rec for res in results for rec in res.records]
    paths = {"records": out / "records.csv", "summary": out / "summary.txt", "timings": out / "timings.csv"}
    paths["records"].write_text(records_csv(records, include_timing=not cfg.test_mode))
    paths["timings"].write_text(records_csv(records, include_timing=True))
    paths["summary"].write_text(format_summary(summarize(records)))
    return paths


# -- artifact dumps ------------------------------------------------------------


def _write_polylines(path: Path, polylines) -> None:
    blocks = ["\n".join(" ".join(repr(float(c)) for c in p) for p in np.asarray(line)) for line in polylines]
    path.write_text("\n\n".join(blocks) + ("\n" if blocks else ""))


def read_polylines(path) -> list[np.ndarray]:
    text = Path(path).read_text().strip()
    if not text:
        return []
    return [np.array([[float(c) for c in row.split()] for row in block.splitlines()]) for block in text.split("\n\n")]


def dump_artifacts(result: TaskResult, cfg: ScenarioConfig, out_dir) -> Path:
    """Plain-text map, roadmap, guiding paths and trajectories for one task."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    task, outcome = result.task, result.outcome
    save_map(out / "map.txt", task.field.occupancy, task.field.spec)
    save_trajectory(out / "reference.traj", task.reference)
    if outcome.initial is not None:
        save_trajectory(out / "initial.traj", outcome.initial)
    if outcome.roadmap is not None:
        nodes = outcome.roadmap.nodes
        (out / "roadmap_nodes.txt").write_text(
            "".join(f"{n.kind} {' '.join(repr(float(c)) for c in n.position)}\n" for n in nodes)
        )
        _write_polylines(out / "roadmap_edges.txt", [[nodes[i].position, nodes[j].position] for i, j in outcome.roadmap.edges()])
    _write_polylines(out / "raw_paths.txt", outcome.raw_paths)
    _write_polylines(out / "guiding_paths.txt", [c.path.waypoints for c in outcome.candidates if c.path is not None])
    for k, cand in enumerate(outcome.candidates):
        save_trajectory(out / f"candidate_{k}.traj", cand.trajectory)
    selected = outcome.trajectory
    if selected is not None:
        save_trajectory(out / "selected.traj", selected)
    if result.unguided is not None:
        save_trajectory(out / "unguided.traj", result.unguided.trajectory)
    guided, unguided = result.records
    (out / "task.json").write_text(json.dumps({
        "task_id": task.task_id,
        "tier": task.tier,
        "seed": task.seed,
        "best": outcome.best,
        "candidate_costs": [c.cost for c in outcome.candidates],
        "candidate_failed": [c.failed for c in outcome.candidates],
        "records": [asdict(guided), asdict(unguided)],
    }, indent=2) + "\n")
    (out / "scenario.cfg").write_text(format_config(cfg))
    return out


def verify_dump(dump_dir) -> dict[str, bool]:
    """Recompute both success verdicts from a dump directory alone."""
    from .config import load_config

    d = Path(dump_dir)
    cfg = load_config(d / "scenario.cfg")
    occ, spec = load_map(d / "map.txt")
    field = build_esdf(occ, spec)
    w: PgoWeights = cfg.weights()
    verdict = {}
    for method, name in (("guided", "selected.traj"), ("unguided", "unguided.traj")):
        f = d / name
        verdict[method] = f.exists() and trajectory_ok(load_trajectory(f), field, w)
    return verdict
