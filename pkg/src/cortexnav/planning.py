"""Imagine-then-verify planning.

One cycle: the planner proposes N candidate plans, each plan's actions are
aligned with its rationales into subtask units, the world model imagines a
short rollout per candidate, the evaluator scores each rollout, and the
best plan is executed. Control then returns to the caller, which replans
from the new observation.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable

from .belief import BeliefState
from .gridworld import Action, Cell, GoalSpec, GridEnv, Observation, Pose
from .gridworld.motion import move_direction
from .gridworld.vision import UNKNOWN
from .memory_graph import MemoryGraph, SubtaskNode, SubtaskStatus
from .srm import OSCILLATION, ReflectionSummary, inject_reflection, maybe_reflect

if TYPE_CHECKING:
    from .aki import MergedHeuristic
    from .backends import BackendSet
    from .config import CortexConfig
    from .lpm import Principle

log = logging.getLogger(__name__)


class PlanningError(RuntimeError):
    pass


class BackendFailure(PlanningError):
    def __init__(self, message: str, plan_index: int | None = None):
        super().__init__(message if plan_index is None else f"plan {plan_index}: {message}")
        self.plan_index = plan_index


@dataclass(frozen=True)
class CandidatePlan:
    actions: tuple[Action, ...]
    reasoning: tuple[str, ...]
    index: int
    # bookkeeping for the oracle family: what the plan heads for
    target: Cell | None = None
    kind: str = ""

    def __post_init__(self) -> None:
        if not self.actions:
            raise PlanningError("candidate plan has no actions")

    def digest(self) -> str:
        text = "|".join(a.encode() for a in self.actions) + "#" + "|".join(self.reasoning)
        return hashlib.blake2b(text.encode(), digest_size=6).hexdigest()

    def to_dict(self) -> dict:
        return {
            "actions": [a.encode() for a in self.actions],
            "reasoning": list(self.reasoning),
            "index": self.index,
            "target": list(self.target) if self.target is not None else None,
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, data: dict, index: int | None = None) -> "CandidatePlan":
        target = data.get("target")
        return cls(
            actions=tuple(Action.decode(a) for a in data["actions"]),
            reasoning=tuple(data["reasoning"]),
            index=int(data.get("index", 0) if index is None else index),
            target=tuple(target) if target is not None else None,
            kind=data.get("kind", ""),
        )


@dataclass(frozen=True)
class SubtaskUnit:
    actions: tuple[Action, ...]
    rationale: str

    def to_dict(self) -> dict:
        return {"actions": [a.encode() for a in self.actions], "rationale": self.rationale}


@dataclass(frozen=True)
class Rollout:
    predicted_observations: tuple[Observation, ...]
    source_plan_index: int

    @property
    def terminal(self) -> Observation:
        return self.predicted_observations[-1]


@dataclass(frozen=True)
class ScoredPlan:
    plan: CandidatePlan
    subtasks: tuple[SubtaskUnit, ...]
    rollout: Rollout
    score: float


@dataclass
class PlannerContext:
    goal: GoalSpec
    belief: BeliefState
    recent_reflection: ReflectionSummary | None = None
    retrieved_principles: list["Principle"] = field(default_factory=list)
    active_heuristics: list["MergedHeuristic"] = field(default_factory=list)
    step: int = 0
    pose: Pose | None = None


def distribute_subtasks(plan: CandidatePlan) -> list[SubtaskUnit]:
    """Split the plan's actions into contiguous units, one per rationale.

    Runs are as even as possible; the earlier runs absorb the remainder.
    When there are more rationales than actions, the extra rationales
    would get empty runs, so each action gets its own unit and the
    surplus rationales are dropped.
    """
    if not plan.reasoning:
        raise PlanningError("plan has no reasoning")
    n_units = min(len(plan.reasoning), len(plan.actions))
    base, extra = divmod(len(plan.actions), n_units)
    units, start = [], 0
    for i in range(n_units):
        size = base + (1 if i < extra else 0)
        units.append(SubtaskUnit(plan.actions[start : start + size], plan.reasoning[i]))
        start += size
    return units


def imagine(world_model, current: Observation, subtasks: list[SubtaskUnit], h: int, plan_index: int = 0) -> Rollout:
    if h < 1:
        raise PlanningError("imagination horizon must be >= 1")
    try:
        rollout = world_model.imagine(current, subtasks, h, plan_index)
    except Exception as exc:
        raise BackendFailure(f"world model failed: {exc}", plan_index) from exc
    total = sum(len(u.actions) for u in subtasks)
    if len(rollout.predicted_observations) > min(h, total):
        raise BackendFailure("world model returned a rollout longer than the horizon", plan_index)
    return rollout


def verify(evaluator, rollout: Rollout, goal: GoalSpec, context: PlannerContext | None = None) -> float:
    if not rollout.predicted_observations:
        raise PlanningError("empty rollout")
    try:
        score = float(evaluator.score(rollout, goal, context))
    except Exception as exc:
        raise BackendFailure(f"evaluator failed: {exc}", rollout.source_plan_index) from exc
    if not math.isfinite(score):
        raise BackendFailure(f"evaluator returned non-finite score {score}", rollout.source_plan_index)
    return score


def select(scored: list[ScoredPlan]) -> ScoredPlan:
    """Highest score wins; equal scores go to the lowest plan index."""
    if not scored:
        raise PlanningError("no candidates to select from")
    for s in scored:
        if not math.isfinite(s.score):
            raise PlanningError(f"plan {s.plan.index} has non-finite score {s.score}")
    return min(scored, key=lambda s: (-s.score, s.plan.index))


class LoopStatus(str, enum.Enum):
    CONTINUE = "CONTINUE"
    TERMINATED = "TERMINATED"
    BUDGET_EXCEEDED = "BUDGET_EXCEEDED"
    ERROR = "ERROR"


@dataclass
class LoopOptions:
    srm: bool = False
    # execute whole long plans blindly instead of replanning each short cycle
    open_loop: bool = False
    retrieve: Callable[[Observation, PlannerContext], list] | None = None
    on_reflection: Callable[[ReflectionSummary], None] | None = None


@dataclass
class LoopStepResult:
    status: LoopStatus
    selected: ScoredPlan | None = None
    scored: list[ScoredPlan] = field(default_factory=list)
    appended: list[str] = field(default_factory=list)
    reflection: ReflectionSummary | None = None
    error: str | None = None


def plan_horizon(config: "CortexConfig", options: LoopOptions) -> int:
    return config.imagination_horizon * (3 if options.open_loop else 1)


def _obs_id(step: int) -> str:
    return f"obs-{step}"


def step_loop(
    env: GridEnv,
    backends: "BackendSet",
    graph: MemoryGraph,
    context: PlannerContext,
    config: "CortexConfig",
    options: LoopOptions | None = None,
) -> LoopStepResult:
    """Run exactly one propose-imagine-verify-execute cycle."""
    options = options or LoopOptions()
    if env.done:
        raise PlanningError("episode already finished")
    if env.budget_left <= 0:
        return LoopStepResult(LoopStatus.BUDGET_EXCEEDED)

    horizon = plan_horizon(config, options)
    obs = env.observe()
    context.belief.update(obs)
    context.step = env.steps
    context.pose = env.pose
    try:
        if options.retrieve is not None:
            context.retrieved_principles = list(options.retrieve(obs, context))
        try:
            plans = backends.planner.propose(obs, context.goal, context, config.n_candidates, horizon)
        except Exception as exc:
            raise BackendFailure(f"planner failed: {exc}") from exc
        if not plans:
            raise BackendFailure("planner returned no candidates")
        plans = [p if p.index == i else replace(p, index=i) for i, p in enumerate(plans)]
        scored = []
        for plan in plans:
            units = distribute_subtasks(plan)
            rollout = imagine(backends.world_model, obs, units, horizon, plan.index)
            score = verify(backends.evaluator, rollout, context.goal, context)
            scored.append(ScoredPlan(plan, tuple(units), rollout, score))
        best = select(scored)
    except PlanningError as exc:
        log.warning("cycle aborted at step %d: %s", env.steps, exc)
        env.exhaust()
        return LoopStepResult(LoopStatus.ERROR, error=str(exc))

    step_index = env.steps
    appended = []
    start_cell = env.pose.cell
    for unit in best.subtasks:
        pre = _obs_id(env.steps)
        trace = [env.pose]
        executed: list[Action] = []
        status = SubtaskStatus.EXECUTED
        for action in unit.actions:
            if env.done:
                break
            result = env.step(action)
            context.belief.update(result.observation)
            executed.append(action)
            trace.append(result.pose)
            if result.collision and not options.open_loop:
                status = SubtaskStatus.ABORTED
                break
        if not executed:
            break
        if len(executed) < len(unit.actions):
            status = SubtaskStatus.ABORTED
        seen = tuple(
            sorted(f"{color} {cat}" for _, cat, color in env.observe().visible_objects if cat != UNKNOWN)
        )
        node = SubtaskNode(tuple(executed), unit.rationale, status, pre, _obs_id(env.steps), tuple(trace), seen)
        appended.append(graph.append_subtask(step_index, node, best.plan.digest(), _obs_id(step_index)))
        if status is SubtaskStatus.ABORTED or env.done:
            break

    belief = context.belief
    if best.plan.target is not None and best.plan.kind == "frontier":
        belief.visited_targets.append(best.plan.target)
    if best.plan.kind == "scan":
        belief.scans.append(start_cell)
    if best.plan.kind == "recall" and best.plan.target is not None:
        tx, ty = best.plan.target
        if max(abs(env.pose.x - tx), abs(env.pose.y - ty)) <= 1:
            belief.tabu.add(best.plan.target)
    if env.pose.cell != start_cell:
        belief.last_direction = move_direction(env.pose.heading)
    context.step = env.steps
    context.pose = env.pose

    reflection = None
    if options.srm and not env.done:
        try:
            reflection = maybe_reflect(graph, backends.srm_analyzer, config.srm_window, context.goal, context.active_heuristics)
        except Exception as exc:
            log.warning("reflection failed at step %d: %s", env.steps, exc)
            reflection = None
        if reflection is not None:
            inject_reflection(context, reflection)
            if OSCILLATION in reflection.failure_patterns and belief.visited_targets:
                belief.tabu.add(belief.visited_targets[-1])
            if options.on_reflection is not None:
                options.on_reflection(reflection)

    if env.done:
        status = LoopStatus.TERMINATED
    elif env.budget_left <= 0:
        status = LoopStatus.BUDGET_EXCEEDED
    else:
        status = LoopStatus.CONTINUE
    return LoopStepResult(status, best, scored, appended, reflection)
