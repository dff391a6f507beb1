"""Task definitions (IGNav, AR, AEQA), episode sampling, and outcome rules."""

from __future__ import annotations

import enum
import hashlib
import json
import math
import random
import re
from dataclasses import dataclass

from .maps import GridMap
from .motion import Action, ActionKind, Cell, Pose
from .search import UNREACHABLE, distance_field
from .vision import RECOGNITION_RANGE, observe, visible_cells

# 1.0 m at 0.20 m per cell
SUCCESS_RADIUS = 5


class TaskKind(str, enum.Enum):
    IGNAV = "IGNAV"
    AR = "AR"
    AEQA = "AEQA"


class OutcomeError(ValueError):
    pass


@dataclass(frozen=True)
class GoalSpec:
    """What the agent is asked to do, plus the ground truth to grade it.

    IGNav carries the goal pose and its observation signature (the stand-in
    for a goal image). AR names the target object's cell; its category is
    the answer. AEQA carries a templated question and its answer.
    """

    task_kind: TaskKind
    map_seed: int
    goal_cell: Cell | None = None
    goal_heading: int = 0
    signature: tuple[str, ...] = ()
    target_category: str | None = None
    question: str | None = None
    answer: str | None = None
    query_category: str | None = None
    query_room: str | None = None

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.blake2b(payload.encode(), digest_size=8).hexdigest()

    def to_dict(self) -> dict:
        return {
            "task_kind": self.task_kind.value,
            "map_seed": self.map_seed,
            "goal_cell": list(self.goal_cell) if self.goal_cell is not None else None,
            "goal_heading": self.goal_heading,
            "signature": list(self.signature),
            "target_category": self.target_category,
            "question": self.question,
            "answer": self.answer,
            "query_category": self.query_category,
            "query_room": self.query_room,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GoalSpec":
        cell = data.get("goal_cell")
        return cls(
            task_kind=TaskKind(data["task_kind"]),
            map_seed=int(data["map_seed"]),
            goal_cell=tuple(cell) if cell is not None else None,
            goal_heading=int(data.get("goal_heading", 0)),
            signature=tuple(data.get("signature", ())),
            target_category=data.get("target_category"),
            question=data.get("question"),
            answer=data.get("answer"),
            query_category=data.get("query_category"),
            query_room=data.get("query_room"),
        )

    def public_dict(self) -> dict:
        """The part of the goal an agent is allowed to read."""
        data = {"task_kind": self.task_kind.value, "signature": list(self.signature)}
        if self.task_kind is TaskKind.AR:
            data["target_cell"] = list(self.goal_cell)
        if self.task_kind is TaskKind.AEQA:
            data["question"] = self.question
        return data


def goal_signature(grid: GridMap, pose: Pose) -> tuple[str, ...]:
    obs = observe(grid, pose)
    return tuple(sorted(f"{cat}:{col}" for _, cat, col in obs.visible_objects)) + (
        f"free:{sum(1 for _, occ in obs.visible_cells if occ == '.')}",
    )


def recognition_cells(grid: GridMap, target: Cell) -> set[Cell]:
    """Free cells from which ``target`` is close enough and in line of sight."""
    out = set()
    reach = int(RECOGNITION_RANGE)
    for dy in range(-reach, reach + 1):
        for dx in range(-reach, reach + 1):
            cell = (target[0] + dx, target[1] + dy)
            if not grid.is_free(cell) or math.hypot(dx, dy) > RECOGNITION_RANGE + 1e-9:
                continue
            if any(target in visible_cells(grid, Pose(cell[0], cell[1], h)) for h in range(0, 16, 4)):
                out.add(cell)
    return out


def shortest_length(grid: GridMap, start: Cell, goal: GoalSpec) -> int:
    """Geodesic length used as the optimal path in SPL."""
    dist = distance_field(grid, start)
    if goal.task_kind is TaskKind.IGNAV:
        return dist.get(goal.goal_cell, UNREACHABLE)
    cells = recognition_cells(grid, goal.goal_cell)
    reach = [dist[c] for c in cells if c in dist]
    return min(reach) if reach else UNREACHABLE


def sample_episode(
    grid: GridMap,
    task_kind: TaskKind,
    rng: random.Random,
    min_distance: int = 1,
    max_distance: int | None = None,
) -> tuple[Pose, GoalSpec]:
    free = grid.free_cells()
    for _ in range(200):
        start = rng.choice(free)
        dist = distance_field(grid, start)

        def in_range(cell: Cell) -> bool:
            d = dist.get(cell, UNREACHABLE)
            return d >= min_distance and (max_distance is None or d <= max_distance)

        heading = rng.randrange(16)
        if task_kind is TaskKind.IGNAV:
            options = [c for c in free if in_range(c)]
            if not options:
                continue
            cell = rng.choice(options)
            goal_heading = rng.randrange(16)
            goal = GoalSpec(
                task_kind,
                grid.seed,
                goal_cell=cell,
                goal_heading=goal_heading,
                signature=goal_signature(grid, Pose(cell[0], cell[1], goal_heading)),
            )
            return Pose(start[0], start[1], heading), goal
        if task_kind is TaskKind.AR:
            options = [c for c in sorted(grid.objects) if in_range(c)]
            if not options:
                continue
            cell = rng.choice(options)
            goal = GoalSpec(task_kind, grid.seed, goal_cell=cell, target_category=grid.objects[cell].category)
            return Pose(start[0], start[1], heading), goal
        # AEQA: ask about an object whose (category, room) pair is unique
        pairs: dict[tuple[str, str | None], list[Cell]] = {}
        for cell, obj in sorted(grid.objects.items()):
            pairs.setdefault((obj.category, grid.room_of(cell)), []).append(cell)
        options = [cells[0] for key, cells in pairs.items() if len(cells) == 1 and key[1] and in_range(cells[0])]
        if not options:
            continue
        cell = rng.choice(options)
        obj = grid.objects[cell]
        room = grid.room_of(cell)
        goal = GoalSpec(
            task_kind,
            grid.seed,
            goal_cell=cell,
            question=f"What color is the {obj.category} in the {room.replace('_', ' ')}?",
            answer=f"{obj.color} {obj.category}",
            query_category=obj.category,
            query_room=room,
        )
        return Pose(start[0], start[1], heading), goal
    raise OutcomeError(f"no feasible {task_kind.value} episode on map seed {grid.seed}")


@dataclass(frozen=True)
class EpisodeOutcome:
    success: bool
    answer_score: float | None = None
    reason: str = ""


_ARTICLES = {"a", "an", "the"}


def _normalise(text: str) -> list[str]:
    return [t for t in re.findall(r"[a-z0-9]+", text.lower()) if t not in _ARTICLES]


def answer_score(answer: str, truth: str) -> float:
    """0/50/100 rubric: exact normalised match, one attribute right, or neither."""
    given, expected = _normalise(answer), _normalise(truth)
    if given == expected:
        return 100.0
    color, category = expected[0], expected[-1]
    if color in given or category in given:
        return 50.0
    return 0.0


def evaluate_outcome(goal: GoalSpec, final_action: Action | None, pose: Pose, grid: GridMap) -> EpisodeOutcome:
    """Grade a terminated episode. ``final_action`` is None on budget exhaustion."""
    if final_action is None:
        return EpisodeOutcome(False, 0.0 if goal.task_kind is TaskKind.AEQA else None, "budget exhausted")
    kind = goal.task_kind
    if kind is TaskKind.IGNAV:
        if final_action.kind is not ActionKind.STOP:
            raise OutcomeError(f"IGNav episodes end with STOP, got {final_action.encode()}")
        d = distance_field(grid, pose.cell).get(goal.goal_cell, UNREACHABLE)
        ok = d != UNREACHABLE and d <= SUCCESS_RADIUS
        return EpisodeOutcome(ok, None, f"stopped {d} cells from goal")
    if final_action.kind is not ActionKind.ANSWER:
        raise OutcomeError(f"{kind.value} episodes end with ANSWER, got {final_action.encode()}")
    if kind is TaskKind.AR:
        ok = final_action.text.strip().lower() == goal.target_category.lower()
        return EpisodeOutcome(ok, None, f"answered {final_action.text!r}")
    score = answer_score(final_action.text, goal.answer)
    return EpisodeOutcome(score == 100.0, score, f"answered {final_action.text!r}")
