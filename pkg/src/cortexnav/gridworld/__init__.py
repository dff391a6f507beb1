"""Deterministic partially observable grid world with IGNav / AR / AEQA tasks."""

from .env import GridEnv
from .maps import GridMap, MapError, MapObject, Room, dumps_map, flood_fill, generate_map, load_map, loads_map
from .metrics import EpisodeRecord, Metrics, compute_metrics
from .motion import (
    FORWARD,
    N_HEADINGS,
    STOP,
    TURN_LEFT,
    TURN_RIGHT,
    Action,
    ActionKind,
    Cell,
    Pose,
    path_to_actions,
    step,
)
from .search import UNREACHABLE, GeodesicCache, SearchError, bfs_path, distance_field, geodesic
from .tasks import (
    SUCCESS_RADIUS,
    EpisodeOutcome,
    GoalSpec,
    OutcomeError,
    TaskKind,
    answer_score,
    evaluate_outcome,
    sample_episode,
    shortest_length,
)
from .vision import Observation, observe

__all__ = [
    "Action",
    "ActionKind",
    "Cell",
    "EpisodeOutcome",
    "EpisodeRecord",
    "FORWARD",
    "GeodesicCache",
    "GoalSpec",
    "GridEnv",
    "GridMap",
    "MapError",
    "MapObject",
    "Metrics",
    "N_HEADINGS",
    "Observation",
    "OutcomeError",
    "Pose",
    "Room",
    "STOP",
    "SUCCESS_RADIUS",
    "SearchError",
    "TURN_LEFT",
    "TURN_RIGHT",
    "TaskKind",
    "UNREACHABLE",
    "answer_score",
    "bfs_path",
    "compute_metrics",
    "distance_field",
    "dumps_map",
    "evaluate_outcome",
    "flood_fill",
    "generate_map",
    "geodesic",
    "load_map",
    "loads_map",
    "observe",
    "path_to_actions",
    "sample_episode",
    "shortest_length",
    "step",
]
