"""Turn-aware route search over the agent's belief, and target resolution.

Routes minimise translations first and turns second, so a route to a cell
is always a geodesic in cells. Both the oracle planner and the oracle
evaluator resolve "where is the agent trying to go" through the same
function here, so their notions of the current target agree.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from ..belief import BeliefState
from ..gridworld import Action, Cell, GoalSpec, Pose, TaskKind
from ..gridworld.maps import WALL
from ..gridworld.motion import DIRECTIONS, FORWARD, N_HEADINGS, STOP, TURN_LEFT, TURN_RIGHT, turns_to_direction
from ..gridworld.vision import RECOGNITION_RANGE, UNKNOWN, line_cells

# heading x direction -> (turn action or None, number of turns, heading after turning)
_TURNS: list[list[tuple[Action | None, int, int]]] = []
for _h in range(N_HEADINGS):
    row = []
    for _d in range(len(DIRECTIONS)):
        seq = turns_to_direction(_h, _d)
        delta = -len(seq) if seq and seq[0] == TURN_LEFT else len(seq)
        row.append((seq[0] if seq else None, len(seq), (_h + delta) % N_HEADINGS))
    _TURNS.append(row)


@dataclass(frozen=True)
class Route:
    cells: tuple[Cell, ...]
    actions: tuple[Action, ...]
    moves: int
    turns: int

    @property
    def first_direction(self) -> int | None:
        if len(self.cells) < 2:
            return None
        a, b = self.cells[0], self.cells[1]
        return DIRECTIONS.index((b[0] - a[0], b[1] - a[1]))


class RouteTable:
    """Single-source search from a pose; cost is (moves, turns) lexicographic."""

    def __init__(self, start: Pose, passable: Callable[[Cell], bool], max_moves: int | None = None):
        self.start = start
        start_state = (start.x, start.y, start.heading)
        self._parent: dict[tuple, tuple | None] = {start_state: None}
        self._cost: dict[tuple, tuple[int, int]] = {start_state: (0, 0)}
        self.best: dict[Cell, tuple[int, int, int]] = {}
        heap = [(0, 0, 0, start_state)]
        counter = 1
        done = set()
        while heap:
            moves, turns, _, state = heapq.heappop(heap)
            if state in done:
                continue
            done.add(state)
            x, y, h = state
            if (x, y) not in self.best:
                self.best[(x, y)] = state
            if max_moves is not None and moves >= max_moves:
                continue
            for d, (dx, dy) in enumerate(DIRECTIONS):
                nxt = (x + dx, y + dy)
                if not passable(nxt):
                    continue
                _, n_turns, heading = _TURNS[h][d]
                new_state = (nxt[0], nxt[1], heading)
                cost = (moves + 1, turns + n_turns)
                if new_state in done or cost >= self._cost.get(new_state, (math.inf, math.inf)):
                    continue
                self._cost[new_state] = cost
                self._parent[new_state] = state
                heapq.heappush(heap, (cost[0], cost[1], counter, new_state))
                counter += 1

    def reachable(self, cell: Cell) -> bool:
        return cell in self.best

    def cost(self, cell: Cell) -> tuple[int, int] | None:
        state = self.best.get(cell)
        return None if state is None else self._cost[state]

    def route(self, cell: Cell) -> Route | None:
        state = self.best.get(cell)
        if state is None:
            return None
        chain = [state]
        while self._parent[chain[-1]] is not None:
            chain.append(self._parent[chain[-1]])
        chain.reverse()
        actions: list[Action] = []
        turns = 0
        for (x0, y0, h0), (x1, y1, _) in zip(chain, chain[1:]):
            d = DIRECTIONS.index((x1 - x0, y1 - y0))
            turn, n_turns, _ = _TURNS[h0][d]
            actions.extend([turn] * n_turns)
            turns += n_turns
            actions.append(FORWARD)
        return Route(tuple((s[0], s[1]) for s in chain), tuple(actions), len(chain) - 1, turns)

    def nearest(self, cells: Iterable[Cell]) -> Cell | None:
        options = [(self.cost(c), c) for c in cells if c in self.best]
        return min(options)[1] if options else None


def heading_toward(origin: Cell, target: Cell) -> int:
    dx, dy = target[0] - origin[0], target[1] - origin[1]
    bearing = math.degrees(math.atan2(dx, -dy)) % 360.0
    return int(round(bearing / (360.0 / N_HEADINGS))) % N_HEADINGS


def face(heading: int, target_heading: int) -> list[Action]:
    right = (target_heading - heading) % N_HEADINGS
    left = (heading - target_heading) % N_HEADINGS
    return [TURN_LEFT] * left if left <= right else [TURN_RIGHT] * right


def clear_line(belief: BeliefState, origin: Cell, target: Cell) -> bool:
    dx, dy = target[0] - origin[0], target[1] - origin[1]
    return not any(belief.known.get((origin[0] + bx, origin[1] + by)) == WALL for bx, by in line_cells(dx, dy))


def viewing_cells(belief: BeliefState, target: Cell, reach: float = RECOGNITION_RANGE) -> set[Cell]:
    """Cells close enough to recognise ``target`` with no known wall in between."""
    out = set()
    r = int(reach)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            cell = (target[0] + dx, target[1] + dy)
            if cell == target or math.hypot(dx, dy) > reach + 1e-9 or not belief.passable(cell):
                continue
            if clear_line(belief, cell, target):
                out.add(cell)
    return out


@dataclass(frozen=True)
class Target:
    """Where the agent is heading and what to do on arrival."""

    kind: str  # "goal", "object" or "recall"
    cell: Cell
    # IGNav goals are reached by standing on them; objects by viewing them
    view: bool = False
    finish: Action | None = None


def recognised(belief: BeliefState, cell: Cell) -> tuple[str, str] | None:
    obj = belief.objects.get(cell)
    if obj is None or obj[0] == UNKNOWN:
        return None
    return obj


def aeqa_answer(goal: GoalSpec, belief: BeliefState, room_of: Callable[[Cell], str | None]) -> str | None:
    for cell in sorted(belief.objects):
        obj = recognised(belief, cell)
        if obj and obj[0] == goal.query_category and room_of(cell) == goal.query_room:
            return f"{obj[1]} {obj[0]}"
    return None


def aeqa_guess(goal: GoalSpec, belief: BeliefState) -> str:
    for cell in sorted(belief.objects):
        obj = recognised(belief, cell)
        if obj and obj[0] == goal.query_category:
            return f"{obj[1]} {obj[0]}"
    return f"unknown {goal.query_category}"


def guiding_anchor(principles: Sequence, belief: BeliefState, here: Cell | None, goal_digest: str = "") -> Cell | None:
    """First usable anchor of a guiding principle recorded for the same goal.

    Anchors are cells of the map the principle came from, so principles of
    other goals contribute no anchor.
    """
    for p in principles:
        if getattr(p, "kind", None) is None or p.kind.value != "GUIDING" or p.anchor is None:
            continue
        if p.goal_digest != goal_digest:
            continue
        anchor = tuple(p.anchor)
        if anchor in belief.tabu or not belief.passable(anchor):
            continue
        if here is not None and max(abs(anchor[0] - here[0]), abs(anchor[1] - here[1])) <= 1:
            continue
        return anchor
    return None


def resolve_target(
    goal: GoalSpec,
    belief: BeliefState,
    principles: Sequence,
    here: Cell | None,
    room_of: Callable[[Cell], str | None],
) -> Target | None:
    """The agent's current navigation target, or None to explore."""
    kind = goal.task_kind
    if kind is TaskKind.IGNAV:
        if goal.goal_cell in belief.known:
            return Target("goal", goal.goal_cell, finish=STOP)
    elif kind is TaskKind.AR:
        obj = recognised(belief, goal.goal_cell)
        finish = Action.answer(obj[0]) if obj else None
        return Target("object", goal.goal_cell, view=True, finish=finish)
    else:
        answer = aeqa_answer(goal, belief, room_of)
        if answer is not None:
            for cell in sorted(belief.objects):
                obj = recognised(belief, cell)
                if obj and f"{obj[1]} {obj[0]}" == answer and room_of(cell) == goal.query_room:
                    return Target("object", cell, view=True, finish=Action.answer(answer))
        unknown = sorted(c for c, obj in belief.objects.items() if obj[0] == UNKNOWN and c not in belief.tabu)
        if unknown:
            origin = here if here is not None else unknown[0]
            cell = min(unknown, key=lambda c: (math.dist(c, origin), c))
            return Target("object", cell, view=True)
    anchor = guiding_anchor(principles, belief, here, goal.digest())
    if anchor is not None:
        return Target("recall", anchor)
    return None
