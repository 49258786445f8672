"""Language-goal navigation in 2D occupancy grids.

Simulator, mapping, guidance oracles, fast-marching planner, episode
controller, and a CLI for running and scoring navigation episodes.
"""

from .controller import (
    EpisodeConfig,
    EpisodeResult,
    TerminationCause,
    compute_spl,
    compute_sr,
    run_episode,
)
from .guidance import (
    AlwaysExploreOracle,
    GeodesicOracle,
    Guidance,
    Oracle,
    OracleReply,
    OracleRequest,
    OracleTransportError,
    PromptKind,
    RandomOracle,
    RemoteOracle,
    SceneSnapshot,
    StopAtOracle,
    TerminateVerdict,
    parse_oracle_reply,
    parse_termination_reply,
)
from .kernels import BACKEND
from .mapping import (
    FREE,
    OBSTACLE,
    UNKNOWN,
    GuidanceProjectionError,
    OccupancyGrid,
    ShortTermGoal,
    StgKind,
    dilate_obstacles,
    export_map,
    frontier_cells,
    integrate_scan,
    project_guidance,
)
from .planner import (
    DistanceField,
    PathPlan,
    UnreachableError,
    extract_path,
    fmm_solve,
    next_action,
    select_frontier,
)
from .scene import (
    Action,
    AgentPose,
    DepthScan,
    EpisodeSpec,
    SceneMap,
    SceneParseError,
    dump_scene,
    load_scene,
    parse_scene,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AgentPose",
    "AlwaysExploreOracle",
    "BACKEND",
    "DepthScan",
    "DistanceField",
    "EpisodeConfig",
    "EpisodeResult",
    "EpisodeSpec",
    "FREE",
    "GeodesicOracle",
    "Guidance",
    "GuidanceProjectionError",
    "OBSTACLE",
    "OccupancyGrid",
    "Oracle",
    "OracleReply",
    "OracleRequest",
    "OracleTransportError",
    "PathPlan",
    "PromptKind",
    "RandomOracle",
    "RemoteOracle",
    "SceneMap",
    "SceneParseError",
    "SceneSnapshot",
    "ShortTermGoal",
    "StgKind",
    "StopAtOracle",
    "TerminateVerdict",
    "TerminationCause",
    "UNKNOWN",
    "UnreachableError",
    "compute_spl",
    "compute_sr",
    "dilate_obstacles",
    "dump_scene",
    "export_map",
    "extract_path",
    "fmm_solve",
    "frontier_cells",
    "integrate_scan",
    "load_scene",
    "next_action",
    "parse_oracle_reply",
    "parse_scene",
    "parse_termination_reply",
    "project_guidance",
    "run_episode",
    "select_frontier",
    "__version__",
]
