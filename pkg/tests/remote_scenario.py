"""Fixed inputs for every remote role, shared by the golden and conformance tests."""

from __future__ import annotations

import json

import httpx
import numpy as np

from cortexnav.aki import Heuristic, MergedHeuristic
from cortexnav.backends.base import BackendProfile, Family, Role
from cortexnav.backends.oracle import OracleFamily
from cortexnav.belief import BeliefState
from cortexnav.gridworld import GridMap, Pose, TaskKind, observe
from cortexnav.gridworld.maps import MapObject
from cortexnav.gridworld.tasks import goal_signature
from cortexnav.gridworld import GoalSpec
from cortexnav.lpm import Principle, PrincipleKind
from cortexnav.memory_graph import Outcome
from cortexnav.planning import PlannerContext, distribute_subtasks
from cortexnav.srm import Progress, ReflectionSummary

from conftest import chain_graph, open_map

PROFILE = BackendProfile(family=Family.REMOTE, base_url="http://backbone.test/v1", api_key="k-test", model="m-test")


class Scenario:
    def __init__(self):
        base = open_map(9, 9, walls=[(4, 2)])
        self.grid = GridMap(9, 9, base.rows, {(6, 3): MapObject("chair", "red")}, seed=5)
        self.pose = Pose(2, 5, 4)
        self.goal = GoalSpec(TaskKind.IGNAV, 5, goal_cell=(6, 5), signature=goal_signature(self.grid, Pose(6, 5, 0)))
        self.obs = observe(self.grid, self.pose, 3)
        belief = BeliefState(9, 9)
        belief.update(self.obs)
        self.heuristic = MergedHeuristic("OSCILLATION", "agent returned to the same pose * times", "commit", 0.8, 2, (0, 2), ("a", "b"))
        self.context = PlannerContext(
            self.goal,
            belief,
            recent_reflection=ReflectionSummary(Progress.STALLED, ("OSCILLATION",), "go east", ("commit",), (0, 3)),
            retrieved_principles=[Principle(PrincipleKind.GUIDING, "moving east led to the goal", "e0", "n2", np.zeros(4))],
            active_heuristics=[self.heuristic],
            step=3,
            pose=self.pose,
        )
        self.graph = chain_graph(
            "ep-golden", [[(2, 5, 4), (3, 5, 4)], [(3, 5, 4), (3, 5, 5), (4, 5, 5)]], self.goal, Outcome.SUCCESS
        )
        self.window = self.graph.subtasks()
        self.members = [
            Heuristic("OSCILLATION", "agent returned to the same pose 3 times", "commit", 0.75, Outcome.FAILURE, "a"),
            Heuristic("OSCILLATION", "agent returned to the same pose 4 times", "commit", 1.0, Outcome.FAILURE, "b"),
        ]
        self.n, self.max_len, self.h = 3, 4, 4
        self.oracle = OracleFamily().for_episode(self.grid, "ep-golden")
        self.plans = self.oracle.planner.propose(self.obs, self.goal, self.context, self.n, self.max_len)
        self.units = distribute_subtasks(self.plans[0])
        self.rollout = self.oracle.world_model.imagine(self.obs, self.units, self.h, 0)

    def invoke(self, backends, role: Role):
        """Call ``role`` on ``backends`` with this scenario's inputs."""
        if role is Role.PLANNER:
            return backends.planner.propose(self.obs, self.goal, self.context, self.n, self.max_len)
        if role is Role.WORLD_MODEL:
            return backends.world_model.imagine(self.obs, self.units, self.h, 0)
        if role is Role.EVALUATOR:
            return backends.evaluator.score(self.rollout, self.goal, self.context)
        if role is Role.SRM_ANALYZER:
            return backends.srm_analyzer.analyze(self.window, self.goal, [self.heuristic])
        if role is Role.PRINCIPLE_ANALYZER:
            return backends.principle_analyzer.principle(self.window, Outcome.SUCCESS, self.goal)
        if role is Role.HEURISTIC_EXTRACTOR:
            return backends.heuristic_extractor.extract(self.graph)
        return backends.heuristic_merger.merge(self.members)


def reply(block: str | dict) -> dict:
    """Chat-completions response body carrying ``block`` as a fenced json block."""
    text = block if isinstance(block, str) else "```json\n" + json.dumps(block) + "\n```"
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


class Recorder:
    """Mock transport: logs every request and answers from a queue or a callable."""

    def __init__(self, answer):
        self.answer = answer
        self.requests: list[httpx.Request] = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(request)
        out = self.answer(request) if callable(self.answer) else self.answer.pop(0)
        if isinstance(out, Exception):
            raise out
        if isinstance(out, httpx.Response):
            return out
        return httpx.Response(200, json=out)

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self)
