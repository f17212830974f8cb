"""Flat ``key = value`` scenario configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .exceptions import RejectedInput
from .pgo import PgoWeights
from .replan import ReplanConfig
from .topo import TopoConfig

TIERS = ("low", "medium", "high")


@dataclass(frozen=True)
class ScenarioConfig:
    # map
    map_x: float = 20.0
    map_y: float = 10.0
    map_z: float = 3.0
    voxel_size: float = 0.1
    obstacles_low: int = 10
    obstacles_medium: int = 20
    obstacles_high: int = 35
    obstacle_min_size: float = 0.5
    obstacle_max_size: float = 1.2
    obstacle_min_height: float = 2.0
    obstacle_max_height: float = 3.0
    # reference line
    ref_speed: float = 1.0
    ref_z_min: float = 1.0
    ref_z_max: float = 2.0
    ref_min_length: float = 12.0
    # PGO
    lambda1_s: float = 1.0
    lambda1_g: float = 10.0
    lambda2_s: float = 1.0
    lambda2_c: float = 10.0
    lambda2_d: float = 1.0
    clearance: float = 0.4
    v_max: float = 3.0
    a_max: float = 2.0
    max_iter: int = 200
    ctrl_spacing: float = 0.4
    # topological search
    n_max: int = 1000
    k_uvd: int = 20
    k_max: int = 5
    r_max: float = 3.0
    margin: float = 0.2
    max_raw_paths: int = 100
    # replanning
    horizon: float = 30.0
    cube_rx: float = 1.5
    cube_ry: float = 2.5
    cube_rz: float = 1.0
    anchor_padding: float = 1.5
    roadmap_budget: float = 0.003
    optimization_budget: float = 0.010
    # run
    seed: int = 0
    tasks: int = 100
    tier: str = "all"
    test_mode: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.tier not in (*TIERS, "all"):
            raise RejectedInput(f"tier must be one of {TIERS} or 'all', got {self.tier!r}")
        if self.tasks < 0:
            raise RejectedInput("tasks must be non-negative")
        if self.workers < 1:
            raise RejectedInput("workers must be at least 1")
        if self.obstacle_min_size > self.obstacle_max_size:
            raise RejectedInput("obstacle_min_size exceeds obstacle_max_size")
        # surfaces invalid weights/topology values at parse time
        self.weights()
        self.topo()

    @property
    def tiers(self) -> tuple[str, ...]:
        return TIERS if self.tier == "all" else (self.tier,)

    def obstacle_count(self, tier: str) -> int:
        return getattr(self, f"obstacles_{tier}")

    def weights(self) -> PgoWeights:
        keys = {f.name for f in fields(PgoWeights)}
        return PgoWeights(**{k: v for k, v in asdict(self).items() if k in keys})

    def topo(self) -> TopoConfig:
        return TopoConfig(
            t_max=None if self.test_mode else self.roadmap_budget,
            n_max=self.n_max,
            k_uvd=self.k_uvd,
            k_max=self.k_max,
            r_max=self.r_max,
            margin=self.margin,
            max_raw_paths=self.max_raw_paths,
        )

    def replan_config(self) -> ReplanConfig:
        return ReplanConfig(
            weights=self.weights(),
            topo=self.topo(),
            ctrl_spacing=self.ctrl_spacing,
            anchor_padding=self.anchor_padding,
            max_iter=self.max_iter,
        )

    @property
    def budgets(self) -> tuple[float | None, float | None]:
        """(roadmap, optimization) wall-clock budgets; disabled in test mode."""
        if self.test_mode:
            return None, None
        return self.roadmap_budget, self.optimization_budget

    def updated(self, **changes) -> ScenarioConfig:
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _convert(name: str, kind, raw: str):
    try:
        if kind in (bool, "bool"):
            lowered = raw.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return lowered in ("true", "1", "yes")
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
        return raw
    except ValueError:
        raise RejectedInput(f"bad value for {name}: {raw!r}") from None


def parse_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    types = {f.name: f.type for f in fields(ScenarioConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise RejectedInput(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise RejectedInput(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, types[key], raw)
    return replace(base or ScenarioConfig(), **values)


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


def format_config(cfg: ScenarioConfig) -> str:
    return "".join(f"{k} = {str(v).lower() if isinstance(v, bool) else v}\n" for k, v in asdict(cfg).items())
