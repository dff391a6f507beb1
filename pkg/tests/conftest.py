"""Shared builders for small hand-made maps, goals and subtasks."""

from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from cortexnav.gridworld import Action, GoalSpec, GridMap, Pose, TaskKind
from cortexnav.memory_graph import MemoryGraph, Outcome, SubtaskNode, SubtaskStatus, create_episode

settings.register_profile("ci", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


def open_map(width: int = 8, height: int = 8, seed: int = 0, walls=()) -> GridMap:
    """Bordered map with free interior and optional extra wall cells."""
    rows = []
    blocked = set(walls)
    for y in range(height):
        row = []
        for x in range(width):
            border = x in (0, width - 1) or y in (0, height - 1)
            row.append("#" if border or (x, y) in blocked else ".")
        rows.append("".join(row))
    return GridMap(width, height, tuple(rows), seed=seed)


def ignav_goal(cell, seed: int = 0) -> GoalSpec:
    return GoalSpec(TaskKind.IGNAV, seed, goal_cell=tuple(cell))


def subtask(poses, actions=None, rationale: str = "move", step: int = 0, objects=()) -> SubtaskNode:
    """SubtaskNode over ``poses`` (x, y, heading); actions default to FORWARD."""
    trace = tuple(Pose(*p) for p in poses)
    if actions is None:
        actions = ["F"] * (len(trace) - 1)
    acts = tuple(Action.decode(a) for a in actions)
    return SubtaskNode(
        acts, rationale, SubtaskStatus.EXECUTED, f"obs-{step}", f"obs-{step + len(acts)}", trace, tuple(objects)
    )


def chain_graph(episode_id: str, traces, goal: GoalSpec | None = None, outcome: Outcome | None = None) -> MemoryGraph:
    """Graph with one subtask per trace, one decision step each."""
    goal = goal or ignav_goal((3, 3))
    graph = create_episode(episode_id, TaskKind.IGNAV, goal)
    step = 0
    for trace in traces:
        node = subtask(trace, step=step)
        graph.append_subtask(step, node)
        step += len(node.actions)
    if outcome is not None:
        graph.finalize(outcome, step)
    return graph


@pytest.fixture
def small_map() -> GridMap:
    return open_map()


# -- acceptance verdicts, echoed at the end of the run ----------------------

VERDICTS: dict[int, str] = {}


def record_verdict(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[number])
