"""Poses, actions and single-step dynamics on the occupancy grid.

One FORWARD moves one cell (0.20 m). A turn rotates by 22.5 degrees, so a
pose carries one of 16 headings. Heading 0 faces north (decreasing y) and
headings increase clockwise. Motion is projected onto the 8 grid
directions with ``heading // 2``, so an odd heading rounds to the
counter-clockwise neighbouring direction (heading 15 moves north-west).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .maps import GridMap

N_HEADINGS = 16
STEP_METERS = 0.20
TURN_DEGREES = 22.5

# N, NE, E, SE, S, SW, W, NW
DIRECTIONS: tuple[tuple[int, int], ...] = (
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
)

Cell = tuple[int, int]


@dataclass(frozen=True, order=True)
class Pose:
    x: int
    y: int
    heading: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "heading", self.heading % N_HEADINGS)

    @property
    def cell(self) -> Cell:
        return (self.x, self.y)

    def to_list(self) -> list[int]:
        return [self.x, self.y, self.heading]

    @classmethod
    def from_list(cls, values) -> "Pose":
        x, y, heading = values
        return cls(int(x), int(y), int(heading))


class ActionKind(str, enum.Enum):
    FORWARD = "F"
    TURN_LEFT = "L"
    TURN_RIGHT = "R"
    STOP = "STOP"
    ANSWER = "ANSWER"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    text: str | None = None

    def __post_init__(self) -> None:
        if (self.kind is ActionKind.ANSWER) != (self.text is not None):
            raise ValueError("only ANSWER actions carry text")

    @classmethod
    def answer(cls, text: str) -> "Action":
        return cls(ActionKind.ANSWER, text)

    @property
    def is_terminal(self) -> bool:
        return self.kind in (ActionKind.STOP, ActionKind.ANSWER)

    def encode(self) -> str:
        if self.kind is ActionKind.ANSWER:
            return f"ANSWER:{self.text}"
        return self.kind.value

    @classmethod
    def decode(cls, token: str) -> "Action":
        if token.startswith("ANSWER:"):
            return cls.answer(token[len("ANSWER:"):])
        try:
            return cls(ActionKind(token))
        except ValueError:
            raise ValueError(f"unknown action token {token!r}") from None

    def __repr__(self) -> str:
        return f"Action({self.encode()})"


FORWARD = Action(ActionKind.FORWARD)
TURN_LEFT = Action(ActionKind.TURN_LEFT)
TURN_RIGHT = Action(ActionKind.TURN_RIGHT)
STOP = Action(ActionKind.STOP)


def move_direction(heading: int) -> int:
    return (heading % N_HEADINGS) // 2


def forward_cell(pose: Pose) -> Cell:
    dx, dy = DIRECTIONS[move_direction(pose.heading)]
    return (pose.x + dx, pose.y + dy)


def step(grid: "GridMap", pose: Pose, action: Action) -> tuple[Pose, bool]:
    """Apply one action. Returns the new pose and a collision flag."""
    if action.kind is ActionKind.TURN_LEFT:
        return Pose(pose.x, pose.y, pose.heading - 1), False
    if action.kind is ActionKind.TURN_RIGHT:
        return Pose(pose.x, pose.y, pose.heading + 1), False
    if action.kind is ActionKind.FORWARD:
        target = forward_cell(pose)
        if not grid.is_free(target):
            return pose, True
        return Pose(target[0], target[1], pose.heading), False
    return pose, False


def turns_to_direction(heading: int, direction: int) -> list[Action]:
    """Fewest turns that make FORWARD move along ``direction``.

    Both headings ``2d`` and ``2d + 1`` project onto direction ``d``; the
    cheaper one wins and left turns win exact ties.
    """
    best: list[Action] | None = None
    for target in (2 * direction, 2 * direction + 1):
        right = (target - heading) % N_HEADINGS
        left = (heading - target) % N_HEADINGS
        turns = [TURN_LEFT] * left if left <= right else [TURN_RIGHT] * right
        if best is None or len(turns) < len(best):
            best = turns
    return best


def direction_between(a: Cell, b: Cell) -> int:
    delta = (b[0] - a[0], b[1] - a[1])
    return DIRECTIONS.index(delta)


def path_to_actions(heading: int, path: list[Cell]) -> list[Action]:
    """Turn-and-forward action sequence following a cell path."""
    actions: list[Action] = []
    for a, b in zip(path, path[1:]):
        direction = direction_between(a, b)
        turns = turns_to_direction(heading, direction)
        for turn in turns:
            heading += -1 if turn == TURN_LEFT else 1
        actions.extend(turns)
        actions.append(FORWARD)
    return actions
