"""Short-term reflective memory: windowed reflection within an episode."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Hashable, Sequence

from .memory_graph import MemoryGraph, SubtaskNode

if TYPE_CHECKING:
    from .gridworld import GoalSpec, Pose
    from .planning import PlannerContext


class Progress(str, enum.Enum):
    ADVANCING = "ADVANCING"
    STALLED = "STALLED"
    REGRESSING = "REGRESSING"


OSCILLATION = "OSCILLATION"
COLLISION_STREAK = "COLLISION_STREAK"


@dataclass(frozen=True)
class ReflectionSummary:
    progress_assessment: Progress
    failure_patterns: tuple[str, ...] = ()
    subgoal_context: str = ""
    recommendations: tuple[str, ...] = ()
    window_span: tuple[int, int] = (0, 0)

    def to_dict(self) -> dict:
        return {
            "progress_assessment": self.progress_assessment.value,
            "failure_patterns": list(self.failure_patterns),
            "subgoal_context": self.subgoal_context,
            "recommendations": list(self.recommendations),
            "window_span": list(self.window_span),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReflectionSummary":
        return cls(
            progress_assessment=Progress(data["progress_assessment"]),
            failure_patterns=tuple(data.get("failure_patterns", ())),
            subgoal_context=data.get("subgoal_context", ""),
            recommendations=tuple(data.get("recommendations", ())),
            window_span=tuple(data.get("window_span", (0, 0))),
        )


def step_of(observation_ref: str) -> int:
    try:
        return int(observation_ref.rsplit("-", 1)[-1])
    except ValueError:
        return 0


def window_span(window: Sequence[SubtaskNode]) -> tuple[int, int]:
    return (step_of(window[0].pre_observation), step_of(window[-1].post_observation))


def maybe_reflect(
    graph: MemoryGraph,
    analyzer,
    w: int,
    goal: "GoalSpec | None" = None,
    active_heuristics: Sequence = (),
) -> ReflectionSummary | None:
    """Summarise the last ``w`` subtasks, or return None while fewer exist."""
    window = graph.recent_window(w)
    if len(window) < w:
        return None
    return analyzer.analyze(window, goal if goal is not None else graph.root.goal, list(active_heuristics))


def inject_reflection(context: "PlannerContext", summary: ReflectionSummary | None) -> "PlannerContext":
    """Keep only the newest summary in the planner context."""
    if summary is not None:
        context.recent_reflection = summary
    return context


# -- trace helpers shared by the oracle analyzers ---------------------------


def pose_visits(window: Sequence[SubtaskNode]) -> list[Pose]:
    """Pose sequence across the window with consecutive repeats collapsed.

    Subtask traces share their boundary pose, and a blocked move leaves the
    pose unchanged, so a pose is counted once per arrival.
    """
    seq: list[Pose] = []
    for node in window:
        for pose in node.pose_trace:
            if not seq or seq[-1] != pose:
                seq.append(pose)
    return seq


def oscillation_strength(visits: Sequence[Hashable]) -> int:
    """Largest arrival count of one pose; a full A-B-A-B cycle counts as 3."""
    counts = Counter(visits)
    strength = max(counts.values(), default=0)
    for i in range(len(visits) - 3):
        a, b, c, d = visits[i : i + 4]
        if a == c and b == d and a != b:
            strength = max(strength, 3)
    return strength


def longest_collision_streak(window: Sequence[SubtaskNode]) -> int:
    best = run = 0
    for node in window:
        for action, collided, before, after in zip(
            node.actions, node.collisions(), node.pose_trace, node.pose_trace[1:]
        ):
            if collided:
                run += 1
                best = max(best, run)
            elif before.cell != after.cell:
                run = 0
    return best


def collision_count(window: Sequence[SubtaskNode]) -> int:
    return sum(sum(node.collisions()) for node in window)


@dataclass
class ReflectionLog:
    """Summaries produced during one episode, kept for the episode archive."""

    entries: list[ReflectionSummary] = field(default_factory=list)

    def __call__(self, summary: ReflectionSummary) -> None:
        self.entries.append(summary)
