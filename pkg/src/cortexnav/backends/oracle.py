"""Deterministic grid-world stand-ins for the seven cognition roles.

The oracles read the true map where a learned model would rely on its own
perception (geodesic distances, room labels, ground-truth dynamics). The
planner itself only acts on the agent's belief: unseen cells are unknown
to it and an IGNav goal becomes a target only once the goal cell has been
observed.
"""

from __future__ import annotations

import hashlib
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from ..aki import Heuristic
from ..belief import BeliefState
from ..gridworld import Action, Cell, GeodesicCache, GoalSpec, GridMap, Observation, Pose, TaskKind, observe
from ..gridworld.maps import WALL
from ..gridworld.motion import DIRECTIONS, TURN_LEFT, TURN_RIGHT, ActionKind, step
from ..gridworld.search import UNREACHABLE
from ..gridworld.tasks import shortest_length
from ..gridworld.vision import visible_cells
from ..memory_graph import MemoryGraph, Outcome, SubtaskNode
from ..planning import CandidatePlan, PlannerContext, Rollout, SubtaskUnit
from ..srm import (
    COLLISION_STREAK,
    OSCILLATION,
    Progress,
    ReflectionSummary,
    pose_visits,
    collision_count,
    longest_collision_streak,
    oscillation_strength,
    window_span,
)
from .base import BackendSet
from .routing import (
    RouteTable,
    Target,
    aeqa_guess,
    face,
    heading_toward,
    resolve_target,
    viewing_cells,
)

DOOR_FIRST = "DOOR_FIRST"
DIRECT_APPROACH = "DIRECT_APPROACH"

DIRECTION_NAMES = ("north", "north-east", "east", "south-east", "south", "south-west", "west", "north-west")

# frontier ranking weights
_TURN_WEIGHT = 1.0
_CAUTION_PENALTY = 3.0
_DOOR_BONUS = 2.0
_REVERSAL_PENALTY = 4.0
# reflection says the recent heading leads away from the goal
_REGRESS_PENALTY = 50.0


def _seed_for(*parts) -> int:
    text = ":".join(str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def door_like(belief: BeliefState, cell: Cell) -> bool:
    """A known free cell squeezed between two known walls."""
    if not belief.known_free(cell):
        return False
    x, y = cell
    wall = lambda c: belief.known.get(c) == WALL  # noqa: E731
    return (wall((x - 1, y)) and wall((x + 1, y))) or (wall((x, y - 1)) and wall((x, y + 1)))


def _chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def segment_rationales(actions: Sequence[Action], start: Pose, what: str) -> list[str]:
    """One rationale per motion segment: leading turns plus the forward run after them."""
    out = []
    heading = start.heading
    i = 0
    while i < len(actions):
        a = actions[i]
        if a.is_terminal:
            out.append("stop here, the goal is reached" if a.kind is ActionKind.STOP else f"answer {a.text!r}")
            i += 1
            continue
        turns = 0
        side = ""
        while i < len(actions) and actions[i].kind in (ActionKind.TURN_LEFT, ActionKind.TURN_RIGHT):
            side = "left" if actions[i].kind is ActionKind.TURN_LEFT else "right"
            heading += -1 if side == "left" else 1
            turns += 1
            i += 1
        moves = 0
        while i < len(actions) and actions[i].kind is ActionKind.FORWARD:
            moves += 1
            i += 1
        name = DIRECTION_NAMES[(heading % 16) // 2]
        if moves and turns:
            out.append(f"turn {side} {turns} and move {name} {moves} toward {what}")
        elif moves:
            out.append(f"move {name} {moves} toward {what}")
        elif turns:
            out.append(f"turn {side} {turns} to look for {what}")
    return out


def _push_on(belief: BeliefState, route, heading: int, budget: int) -> list[Action]:
    """Forward moves past the end of a route, into unobserved space."""
    if budget <= 0 or len(route.actions) > 0 and len(route.cells) < 2:
        return []
    dx, dy = DIRECTIONS[(heading % 16) // 2]
    x, y = route.cells[-1]
    out = []
    while len(out) < budget and belief.passable((x + dx, y + dy)):
        x, y = x + dx, y + dy
        out.append(Action(ActionKind.FORWARD))
    return out


@dataclass
class OraclePlanner:
    grid: GridMap
    max_steps: int = 100

    def propose(
        self, obs: Observation, goal: GoalSpec, context: PlannerContext, n: int, max_len: int
    ) -> list[CandidatePlan]:
        if n < 1:
            raise ValueError("n must be >= 1")
        belief = context.belief
        pose = obs.agent_pose
        here = pose.cell
        if not any(self.grid.is_free(c) for c in self.grid.neighbors(here)):
            raise RuntimeError(f"no free neighbour around {here}")
        patterns = {h.pattern_id for h in context.active_heuristics}
        reflection = context.recent_reflection
        reflected = set(reflection.failure_patterns) if reflection is not None else set()

        specs: list[tuple[list[Action], str, Cell | None, str]] = []
        target = resolve_target(goal, belief, context.retrieved_principles, here, self.grid.room_of)

        if goal.task_kind is TaskKind.AEQA and self.max_steps - context.step <= 2:
            if target is None or target.finish is None:
                guess = Action.answer(aeqa_guess(goal, belief))
                specs.append(([guess], "give the best answer before the budget runs out", None, "finish"))

        if target is not None and not specs:
            careful = COLLISION_STREAK in patterns or COLLISION_STREAK in reflected
            specs.extend(self._target_plans(target, pose, belief, max_len, careful, DIRECT_APPROACH in patterns, n))

        exploring = target is None or not specs
        if len(specs) < n:
            scans = self._scans(pose, belief, max_len)
            if OSCILLATION in reflected:
                # turning in place is what oscillates; commit to a frontier instead
                scans = []
            hard_scan = exploring and here == belief.start_cell and bool(scans)
            if hard_scan:
                specs.extend(s for s in scans if s[0] not in [x[0] for x in specs])
            else:
                specs.extend(self._frontier_plans(pose, belief, context, patterns, reflected, scans[:1], n - len(specs), max_len))
        for filler in self._scans(pose, belief, max_len, force=True):
            if len(specs) >= n:
                break
            if filler[0] not in [x[0] for x in specs]:
                specs.append(filler)
        while len(specs) < n:
            specs.append(specs[-1])

        plans = []
        for i, (actions, what, tgt, kind) in enumerate(specs[:n]):
            rationales = segment_rationales(actions, pose, what)
            plans.append(CandidatePlan(tuple(actions), tuple(rationales), i, tgt, kind))
        return plans

    # -- candidate builders ------------------------------------------------

    def _route_to(self, target: Target, pose: Pose, table: RouteTable, belief: BeliefState) -> list[Action] | None:
        if not target.view:
            route = table.route(target.cell)
            return None if route is None else list(route.actions)
        cells = viewing_cells(belief, target.cell)
        if pose.cell in cells:
            return face(pose.heading, heading_toward(pose.cell, target.cell))
        best = table.nearest(cells)
        if best is None:
            return None
        route = table.route(best)
        final_heading = table.best[best][2]
        return list(route.actions) + face(final_heading, heading_toward(best, target.cell))

    def _target_plans(self, target, pose, belief, max_len, careful, direct, n):
        what = {
            "goal": f"the goal at {target.cell}",
            "object": f"the object at {target.cell}",
            "recall": f"the remembered location {target.cell}",
        }[target.kind]
        if target.finish is not None and (target.view or pose.cell == target.cell):
            if target.kind != "goal" or pose.cell == target.cell:
                return [([target.finish], what, target.cell, "finish")]
        tables = []
        if careful:
            tables.append(RouteTable(pose, belief.known_free))
        tables.append(RouteTable(pose, belief.passable))
        actions = None
        for table in tables:
            actions = self._route_to(target, pose, table, belief)
            if actions is not None:
                break
        if not actions:
            return []
        specs = []
        plan = actions[:max_len]
        if target.finish is not None and len(actions) < max_len and target.kind == "goal":
            plan = actions + [target.finish]
        kind = "recall" if target.kind == "recall" else "goal"
        specs.append((plan, what, target.cell, kind))
        if direct and target.kind == "goal" and n > 1:
            specs.extend(self._alternative_routes(target, pose, belief, plan, max_len, what, n - 1))
        return specs

    def _alternative_routes(self, target, pose, belief, first, max_len, what, want):
        out = []
        used = {tuple(first)}
        for d, (dx, dy) in enumerate(DIRECTIONS):
            if len(out) >= want:
                break
            nxt = (pose.x + dx, pose.y + dy)
            if not belief.known_free(nxt):
                continue
            lead = face(pose.heading, 2 * d)
            after = Pose(nxt[0], nxt[1], 2 * d)
            rest = RouteTable(after, belief.passable).route(target.cell)
            if rest is None:
                continue
            actions = (lead + [Action(ActionKind.FORWARD)] + list(rest.actions))[:max_len]
            if tuple(actions) in used:
                continue
            used.add(tuple(actions))
            out.append((actions, what, target.cell, "goal"))
        return out

    def _scans(self, pose: Pose, belief: BeliefState, max_len: int, force: bool = False):
        bins = belief.unseen_in_uncovered_bins(pose.cell)
        out = []
        if bins:
            ranked = sorted(bins.items(), key=lambda kv: (-kv[1], kv[0]))
            for b, _ in ranked:
                turns = face(pose.heading, b)[:max_len]
                if turns and turns not in [s[0] for s in out]:
                    out.append((turns, "unexplored space", None, "scan"))
        if bins or force:
            half = max(1, max_len // 2)
            for turns in ([TURN_LEFT] * max_len, [TURN_RIGHT] * max_len, [TURN_LEFT] * half, [TURN_RIGHT] * half):
                if turns not in [s[0] for s in out]:
                    out.append((turns, "unexplored space", None, "scan"))
        return out

    def _frontier_plans(self, pose, belief, context, patterns, reflected, scans, want, max_len):
        here = pose.cell
        excluded = set(belief.tabu)
        if OSCILLATION in reflected and belief.visited_targets:
            excluded.add(belief.visited_targets[-1])
        if OSCILLATION in patterns:
            excluded.update(belief.visited_targets[-3:])
        cautions = [
            tuple(p.anchor)
            for p in context.retrieved_principles
            if p.kind.value == "CAUTIONARY" and p.anchor is not None
        ]
        reflection = context.recent_reflection
        regressing = reflection is not None and reflection.progress_assessment is Progress.REGRESSING
        table = RouteTable(pose, belief.known_free)
        ranked = []
        for f in belief.frontiers():
            if f == here or f in excluded or not table.reachable(f):
                continue
            moves, turns = table.cost(f)
            cost = moves + _TURN_WEIGHT * turns
            if any(_chebyshev(f, c) <= 2 for c in cautions):
                cost += _CAUTION_PENALTY
            if DOOR_FIRST in patterns and door_like(belief, f):
                cost -= _DOOR_BONUS
            route = table.route(f)
            first = route.first_direction
            if belief.last_direction is not None and first is not None:
                diff = abs(first - belief.last_direction) % 8
                turn_back = min(diff, 8 - diff) > 2
                if OSCILLATION in patterns and turn_back:
                    cost += _REVERSAL_PENALTY
                if regressing and not turn_back:
                    cost += _REGRESS_PENALTY
            ranked.append((cost, f, route))
        ranked.sort(key=lambda t: (t[0], t[1]))
        out = list(scans)
        used_dirs = set()
        for cost, f, route in ranked:
            if len(out) >= want:
                break
            if route.first_direction in used_dirs:
                continue
            used_dirs.add(route.first_direction)
            actions = list(route.actions[:max_len])
            actions += _push_on(belief, route, table.best[f][2], max_len - len(actions))
            out.append((actions, f"the unexplored frontier at {f}", f, "frontier"))
        return out[:want]


@dataclass
class OracleWorldModel:
    grid: GridMap
    noise: float = 0.0
    seed: int = 0
    episode_id: str = ""

    def imagine(self, current: Observation, subtasks: Sequence[SubtaskUnit], h: int, plan_index: int = 0) -> Rollout:
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise out of [0,1]")
        rng = random.Random(_seed_for(self.seed, self.episode_id, current.step, plan_index))
        actions = [a for unit in subtasks for a in unit.actions][:h]
        pose = current.agent_pose
        t = current.step
        predicted = []
        for action in actions:
            pose, _ = step(self.grid, pose, action)
            if self.noise > 0.0 and rng.random() < self.noise:
                options = list(self.grid.neighbors(pose.cell))
                if options:
                    cell = rng.choice(options)
                    pose = Pose(cell[0], cell[1], pose.heading)
            t += 1
            predicted.append(observe(self.grid, pose, t))
            if action.is_terminal:
                break
        return Rollout(tuple(predicted), plan_index)


@dataclass
class OracleEvaluator:
    grid: GridMap
    cache: GeodesicCache | None = None

    def __post_init__(self) -> None:
        if self.cache is None:
            self.cache = GeodesicCache(self.grid)

    def score(self, rollout: Rollout, goal: GoalSpec, context: PlannerContext | None = None) -> float:
        if not rollout.predicted_observations:
            raise ValueError("empty rollout")
        terminal = rollout.terminal.agent_pose.cell
        if context is None:
            belief = BeliefState(self.grid.width, self.grid.height)
            principles, here = [], None
        else:
            belief, principles = context.belief, context.retrieved_principles
            here = context.pose.cell if context.pose is not None else None
        target = resolve_target(goal, belief, principles, here, self.grid.room_of)
        if target is not None:
            d = self.cache.distance(terminal, target.cell) if self.grid.is_free(target.cell) else UNREACHABLE
            if d == UNREACHABLE:
                d = self.grid.width * self.grid.height
            return -float(max(0, d - 3)) if target.view else -float(d)
        seen = set()
        for obs in rollout.predicted_observations:
            seen.update(c for c, _ in obs.visible_cells)
        return float(len(seen - belief.known.keys()))


@dataclass
class OracleSrmAnalyzer:
    grid: GridMap
    cache: GeodesicCache | None = None

    def __post_init__(self) -> None:
        if self.cache is None:
            self.cache = GeodesicCache(self.grid)

    def _progress(self, window: Sequence[SubtaskNode], goal: GoalSpec) -> Progress:
        first, last = window[0].start_pose, window[-1].end_pose
        if goal is not None and goal.goal_cell is not None:
            d0 = self.cache.distance(first.cell, goal.goal_cell)
            d1 = self.cache.distance(last.cell, goal.goal_cell)
            if d1 < d0:
                return Progress.ADVANCING
            return Progress.STALLED if d1 == d0 else Progress.REGRESSING
        before = set(visible_cells(self.grid, first))
        after = set()
        for node in window:
            for pose in node.pose_trace[1:]:
                after.update(visible_cells(self.grid, pose))
        return Progress.ADVANCING if after - before else Progress.STALLED

    def analyze(self, window: Sequence[SubtaskNode], goal: GoalSpec, heuristics: Sequence = ()) -> ReflectionSummary:
        if not window:
            raise ValueError("empty reflection window")
        progress = self._progress(window, goal)
        active = {h.pattern_id for h in heuristics}
        threshold = 2 if OSCILLATION in active and progress is not Progress.ADVANCING else 3
        patterns = []
        recommendations = []
        visits = pose_visits(window)
        if oscillation_strength(visits) >= threshold:
            patterns.append(OSCILLATION)
            recommendations.append("abandon the last frontier and commit to a new direction")
        if collision_count(window) >= 3:
            patterns.append(COLLISION_STREAK)
            recommendations.append("route over observed free cells and turn away from walls")
        if progress is Progress.REGRESSING:
            recommendations.append("the last moves increased the distance to the goal; reconsider the route")
        elif progress is Progress.STALLED and not patterns:
            recommendations.append("no progress in the last subtasks; explore a different area")
        for h in heuristics:
            if h.pattern_id in patterns:
                recommendations.append(f"{h.pattern_id}: {h.strategy}")
        return ReflectionSummary(
            progress_assessment=progress,
            failure_patterns=tuple(patterns),
            subgoal_context=window[-1].rationale,
            recommendations=tuple(recommendations),
            window_span=window_span(window),
        )


def _dominant_direction(tau: Sequence[SubtaskNode]) -> str | None:
    counts: Counter = Counter()
    for node in tau:
        for a, b in zip(node.pose_trace, node.pose_trace[1:]):
            if a.cell != b.cell:
                counts[DIRECTIONS.index((b.x - a.x, b.y - a.y))] += 1
    if not counts:
        return None
    best = min(counts, key=lambda d: (-counts[d], d))
    return DIRECTION_NAMES[best]


@dataclass
class OraclePrincipleAnalyzer:
    grid: GridMap

    def principle(self, tau: Sequence[SubtaskNode], outcome: Outcome, goal: GoalSpec) -> str:
        if not tau:
            raise ValueError("empty trajectory")
        start, end = tau[0].start_pose.cell, tau[-1].end_pose.cell
        direction = _dominant_direction(tau)
        motion = f"moving {direction} from {start} to {end}" if direction else f"turning in place at {start}"
        room_a, room_b = self.grid.room_of(start), self.grid.room_of(end)
        prefix = f"after entering the {room_b.replace('_', ' ')}, " if room_b and room_b != room_a else ""
        if outcome is Outcome.SUCCESS:
            return f"{prefix}{motion} led to the goal"
        collisions = sum(sum(node.collisions()) for node in tau)
        if collisions:
            return f"{prefix}{motion} caused {collisions} collision(s) and did not reach the goal"
        if oscillation_strength(pose_visits(tau)) >= 3:
            return f"{prefix}{motion} kept returning to the same pose and did not reach the goal"
        return f"{prefix}{motion} did not reach the goal"


HEURISTIC_TEXT = {
    OSCILLATION: (
        "agent returned to the same pose {n} times during the episode",
        "mark visited frontiers as explored and commit to an unexplored direction",
    ),
    COLLISION_STREAK: (
        "agent collided with walls {n} times in a row",
        "plan routes over observed free cells and turn away after the first collision",
    ),
    DOOR_FIRST: (
        "agent passed through {n} room transitions before the goal came into view",
        "prioritise doorways and unexplored rooms while the goal is not in view",
    ),
    DIRECT_APPROACH: (
        "agent reached the goal on a near-shortest path once it was localised",
        "head straight for the goal as soon as it is observed",
    ),
}


@dataclass
class OracleHeuristicExtractor:
    grid: GridMap
    cache: GeodesicCache | None = None

    def __post_init__(self) -> None:
        if self.cache is None:
            self.cache = GeodesicCache(self.grid)

    def _make(self, pattern: str, n: int, confidence: float, graph: MemoryGraph) -> Heuristic:
        d, a = HEURISTIC_TEXT[pattern]
        return Heuristic(pattern, d.format(n=n), a, round(min(1.0, confidence), 6), graph.outcome, graph.episode_id)

    def _acquired_at(self, trace: list[Pose], goal: GoalSpec) -> int | None:
        if goal.goal_cell is None:
            return None
        for i, pose in enumerate(trace):
            if goal.goal_cell in visible_cells(self.grid, pose):
                return i
        return None

    def extract(self, graph: MemoryGraph) -> list[Heuristic]:
        subs = graph.subtasks()
        if not subs:
            return []
        out = []
        strength = oscillation_strength(pose_visits(subs))
        if strength >= 3:
            out.append(self._make(OSCILLATION, strength, strength / 4.0, graph))
        streak = longest_collision_streak(subs)
        if streak >= 3:
            out.append(self._make(COLLISION_STREAK, streak, streak / 5.0, graph))
        if graph.outcome is Outcome.SUCCESS:
            goal = graph.root.goal
            trace = [subs[0].start_pose] + [p for s in subs for p in s.pose_trace[1:]]
            acquired = self._acquired_at(trace, goal)
            if acquired is not None:
                rooms = [r for r in (self.grid.room_of(p.cell) for p in trace[: acquired + 1]) if r]
                transitions = sum(1 for a, b in zip(rooms, rooms[1:]) if a != b)
                if transitions:
                    out.append(self._make(DOOR_FIRST, transitions, 0.5 + 0.25 * transitions, graph))
            moves = sum(1 for a, b in zip(trace, trace[1:]) if a.cell != b.cell)
            optimal = shortest_length(self.grid, trace[0].cell, goal)
            if optimal != UNREACHABLE and moves > 0 and moves <= 1.2 * optimal:
                out.append(self._make(DIRECT_APPROACH, moves, optimal / moves, graph))
            elif optimal == 0 and moves == 0:
                out.append(self._make(DIRECT_APPROACH, 0, 1.0, graph))
        return out


def _lcs(a: list[str], b: list[str]) -> list[str]:
    m, n = len(a), len(b)
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m - 1, -1, -1):
        for j in range(n - 1, -1, -1):
            table[i][j] = table[i + 1][j + 1] + 1 if a[i] == b[j] else max(table[i + 1][j], table[i][j + 1])
    out, i, j = [], 0, 0
    while i < m and j < n:
        if a[i] == b[j]:
            out.append(a[i])
            i += 1
            j += 1
        elif table[i + 1][j] >= table[i][j + 1]:
            i += 1
        else:
            j += 1
    return out


def common_template(texts: Sequence[str]) -> str:
    """Longest common word subsequence of ``texts``; gaps become ``*``."""
    unique = sorted(set(texts))
    if len(unique) == 1:
        return unique[0]
    words = [t.split() for t in unique]
    common = words[0]
    for w in words[1:]:
        common = _lcs(common, w)
    if not common:
        return " / ".join(unique)
    gaps = [False] * (len(common) + 1)
    for w in words:
        pos = 0
        for k, token in enumerate(common):
            nxt = w.index(token, pos)
            if nxt > pos:
                gaps[k] = True
            pos = nxt + 1
        if pos < len(w):
            gaps[-1] = True
    out = []
    for k, token in enumerate(common):
        if gaps[k]:
            out.append("*")
        out.append(token)
    if gaps[-1]:
        out.append("*")
    return " ".join(out)


@dataclass
class OracleHeuristicMerger:
    def merge(self, members: Sequence[Heuristic]) -> tuple[str, str]:
        if not members:
            raise ValueError("empty cluster")
        description = common_template([h.description for h in members])
        strategy = common_template([h.strategy for h in members])
        failures = sum(1 for h in members if h.outcome_tag is Outcome.FAILURE)
        successes = len(members) - failures
        if successes and failures > successes:
            description = f"Caution: {description}"
        return description, strategy


@dataclass
class OracleFamily:
    """Factory for per-episode oracle backends sharing one map's caches."""

    noise: float = 0.0
    seed: int = 0
    max_steps: int = 100
    _caches: dict = field(default_factory=dict)

    def for_episode(self, grid: GridMap, episode_id: str) -> BackendSet:
        key = (grid.seed, grid.width, grid.height, grid.rows)
        cache = self._caches.get(key)
        if cache is None:
            cache = self._caches[key] = GeodesicCache(grid)
        return BackendSet(
            planner=OraclePlanner(grid, self.max_steps),
            world_model=OracleWorldModel(grid, self.noise, self.seed, episode_id),
            evaluator=OracleEvaluator(grid, cache),
            srm_analyzer=OracleSrmAnalyzer(grid, cache),
            principle_analyzer=OraclePrincipleAnalyzer(grid),
            heuristic_extractor=OracleHeuristicExtractor(grid, cache),
            heuristic_merger=OracleHeuristicMerger(),
        )

    def merger(self) -> "OracleHeuristicMerger":
        return OracleHeuristicMerger()


def oracle_backends(grid: GridMap, noise: float = 0.0, seed: int = 0, episode_id: str = "", max_steps: int = 100) -> BackendSet:
    return OracleFamily(noise, seed, max_steps).for_episode(grid, episode_id)
