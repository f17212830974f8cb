"""Path-guided trajectory replanning on voxel distance fields."""

from .benchmark import generate_map, run_benchmark, run_task
from .bspline import UniformBSpline, reparameterize_segment, smoothness_metric
from .config import ScenarioConfig, load_config
from .exceptions import DomainError, RejectedInput
from .pgo import GuidingPath, PgoWeights, pgo_replan, phase1_solve, phase2_costs, phase2_refine
from .replan import ReplanConfig, ReplanOutcome, ReplanRequest, check_collision
from .topo import TopoConfig, build_roadmap, search_paths, select_guiding_paths, shorten_path, uvd_equivalent
from .voxel_map import GridSpec, QueryPolicy, VoxelField, build_esdf

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "GridSpec",
    "GuidingPath",
    "PgoWeights",
    "QueryPolicy",
    "RejectedInput",
    "ReplanConfig",
    "ReplanOutcome",
    "ReplanRequest",
    "ScenarioConfig",
    "TopoConfig",
    "UniformBSpline",
    "VoxelField",
    "build_esdf",
    "build_roadmap",
    "check_collision",
    "generate_map",
    "load_config",
    "pgo_replan",
    "phase1_solve",
    "phase2_costs",
    "phase2_refine",
    "reparameterize_segment",
    "run_benchmark",
    "run_task",
    "search_paths",
    "select_guiding_paths",
    "shorten_path",
    "smoothness_metric",
    "uvd_equivalent",
]
