"""One episode: the closed loop plus the memory hooks a mode enables."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from ..aki import Heuristic, MergedHeuristic
from ..belief import BeliefState
from ..config import CortexConfig
from ..gridworld import EpisodeRecord, GoalSpec, GridEnv, GridMap, Pose
from ..lpm import EpisodeBank, embed_observation
from ..memory_graph import MemoryGraph, Outcome, create_episode
from ..planning import LoopOptions, LoopStatus, PlannerContext, step_loop
from ..srm import COLLISION_STREAK, OSCILLATION, ReflectionLog, pose_visits, longest_collision_streak, oscillation_strength

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    BASIC = "basic"
    SRM = "srm"
    LPM = "lpm"
    SRM_LPM = "srm-lpm"
    STATIC_FULL = "static"
    ADAPTIVE_FULL = "adaptive"

    @property
    def srm(self) -> bool:
        return self in (Mode.SRM, Mode.SRM_LPM, Mode.STATIC_FULL, Mode.ADAPTIVE_FULL)

    @property
    def lpm(self) -> bool:
        return self in (Mode.LPM, Mode.SRM_LPM, Mode.STATIC_FULL, Mode.ADAPTIVE_FULL)

    @property
    def aki(self) -> bool:
        return self in (Mode.STATIC_FULL, Mode.ADAPTIVE_FULL)

    @property
    def commits_bank(self) -> bool:
        return self in (Mode.LPM, Mode.SRM_LPM, Mode.ADAPTIVE_FULL)

    @property
    def updates_library(self) -> bool:
        return self is Mode.ADAPTIVE_FULL


@dataclass
class EpisodeHooks:
    """What an episode may read from the persistent stores."""

    srm: bool = False
    bank: EpisodeBank | None = None
    guidance: list[MergedHeuristic] = field(default_factory=list)
    open_loop: bool = False


@dataclass
class EpisodeResult:
    record: EpisodeRecord
    graph: MemoryGraph
    reflections: list = field(default_factory=list)
    heuristics: list[Heuristic] = field(default_factory=list)
    cycles: int = 0
    error: str | None = None


def episode_patterns(graph: MemoryGraph) -> tuple[str, ...]:
    """Failure patterns detected over the whole episode trace."""
    subs = graph.subtasks()
    out = []
    if subs and oscillation_strength(pose_visits(subs)) >= 3:
        out.append(OSCILLATION)
    if subs and longest_collision_streak(subs) >= 3:
        out.append(COLLISION_STREAK)
    return tuple(out)


def run_episode(
    episode_id: str,
    grid: GridMap,
    start: Pose,
    goal: GoalSpec,
    config: CortexConfig,
    backends,
    hooks: EpisodeHooks | None = None,
) -> EpisodeResult:
    hooks = hooks or EpisodeHooks()
    env = GridEnv(grid, start, goal, config.max_steps)
    graph = create_episode(episode_id, goal.task_kind, goal)
    context = PlannerContext(goal, BeliefState(grid.width, grid.height), active_heuristics=list(hooks.guidance))
    reflections = ReflectionLog()

    bank = hooks.bank

    def recall(obs, ctx):
        query = embed_observation(goal, obs, bank.dim)
        return [p for p, _ in bank.retrieve(query, config.lpm_threshold)]

    retrieve = recall if bank is not None and bank.principles else None
    options = LoopOptions(srm=hooks.srm, open_loop=hooks.open_loop, retrieve=retrieve, on_reflection=reflections)
    cycles = 0
    error = None
    while not env.done:
        result = step_loop(env, backends, graph, context, config, options)
        cycles += 1
        if result.status is LoopStatus.ERROR:
            error = result.error
            break
        if result.status is LoopStatus.BUDGET_EXCEEDED:
            env.exhaust()
    graph.finalize(Outcome.SUCCESS if env.outcome.success else Outcome.FAILURE, env.steps)
    record = env.record(episode_id, episode_patterns(graph))
    return EpisodeResult(record, graph, reflections.entries, [], cycles, error)
