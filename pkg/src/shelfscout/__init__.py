"""shelfscout: deterministic shelf-mapping simulator and benchmark harness.

Viewpoint planning plus minimally invasive pushes over a 2.5D occupancy
height map, with scripted planner baselines and a seeded experiment
harness.
"""

from .bench import (
    BenchReport,
    PipelineParams,
    PipelineResult,
    SceneRow,
    TTestResult,
    compare_reports,
    paired_t_test,
    run_pipeline,
    sweep,
)
from .episode import (
    Episode,
    EpisodeFinished,
    EpisodeTrace,
    Observation,
    RewardParams,
    TerminationCriteria,
    bootstrap,
    build_observation,
)
from .mapping import (
    CellState,
    HeightMap,
    MapParams,
    entropy,
    information_gain,
    integrate,
    largest_unknown_center,
    motion_cost,
    pooled_features,
)
from .planning import (
    GlobalPlanner,
    GreedyPlanner,
    PlannerKind,
    RandomPlanner,
    make_planner,
    plan_next_view,
    visible_unknown_cells,
)
from .push import (
    PushCandidate,
    PushMap,
    PushOutcome,
    PushSamplingConfig,
    execute_push,
    export_pushmaps,
    make_push_map,
    sample_candidates,
    score_push,
    select_best_push,
)
from .scene import (
    DisplacementReport,
    MassClass,
    ObjectDimConfig,
    ObjectPrimitive,
    SceneSamplingError,
    SceneState,
    Shape,
    ShelfSpec,
    displacement,
    sample_scene,
)
from .sensor import (
    CameraIntrinsics,
    CameraPose,
    DepthImage,
    InvalidPoseError,
    Workspace,
    depth_to_pointcloud,
    pose_valid,
    render_depth,
    survey_poses,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
