"""Mutable agent state for one episode on a shared immutable map."""

from __future__ import annotations

from dataclasses import dataclass

from .maps import GridMap
from .metrics import EpisodeRecord
from .motion import Action, ActionKind, Pose, step
from .tasks import EpisodeOutcome, GoalSpec, TaskKind, evaluate_outcome, shortest_length
from .vision import Observation, observe


class EpisodeOver(RuntimeError):
    pass


@dataclass
class StepResult:
    pose: Pose
    collision: bool
    observation: Observation
    done: bool


class GridEnv:
    def __init__(self, grid: GridMap, start: Pose, goal: GoalSpec, max_steps: int = 100):
        if not grid.is_free(start.cell):
            raise ValueError(f"start {start} is not free")
        self.grid = grid
        self.start = start
        self.goal = goal
        self.max_steps = max_steps
        self.pose = start
        self.steps = 0
        self.path_length = 0
        self.collisions = 0
        self.final_action: Action | None = None
        self.outcome: EpisodeOutcome | None = None

    @property
    def done(self) -> bool:
        return self.outcome is not None

    @property
    def budget_left(self) -> int:
        return self.max_steps - self.steps

    def observe(self) -> Observation:
        return observe(self.grid, self.pose, self.steps)

    def legal(self, action: Action) -> bool:
        if action.kind is ActionKind.STOP:
            return self.goal.task_kind is TaskKind.IGNAV
        if action.kind is ActionKind.ANSWER:
            return self.goal.task_kind is not TaskKind.IGNAV
        return True

    def step(self, action: Action) -> StepResult:
        if self.done:
            raise EpisodeOver("episode already terminated")
        if not self.legal(action):
            raise ValueError(f"{action.encode()} is illegal for {self.goal.task_kind.value}")
        new_pose, collision = step(self.grid, self.pose, action)
        self.steps += 1
        if new_pose.cell != self.pose.cell:
            self.path_length += 1
        self.collisions += int(collision)
        self.pose = new_pose
        if action.is_terminal:
            self.final_action = action
            self.outcome = evaluate_outcome(self.goal, action, self.pose, self.grid)
        elif self.steps >= self.max_steps:
            self.outcome = evaluate_outcome(self.goal, None, self.pose, self.grid)
        return StepResult(new_pose, collision, self.observe(), self.done)

    def exhaust(self) -> None:
        """Terminate as a budget failure (used when the agent cannot continue)."""
        if not self.done:
            self.outcome = evaluate_outcome(self.goal, None, self.pose, self.grid)

    def record(self, episode_id: str, failure_patterns=()) -> EpisodeRecord:
        if not self.done:
            raise RuntimeError("episode still running")
        return EpisodeRecord(
            episode_id=episode_id,
            success=self.outcome.success,
            shortest=shortest_length(self.grid, self.start.cell, self.goal),
            path_length=self.path_length,
            n_actions=self.steps,
            answer_score=self.outcome.answer_score,
            failure_patterns=tuple(failure_patterns),
            goal_digest=self.goal.digest(),
        )
