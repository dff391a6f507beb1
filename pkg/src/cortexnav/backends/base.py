"""The seven cognition roles and the bundle that carries one family of them."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Protocol, Sequence

if TYPE_CHECKING:
    from ..aki import Heuristic, MergedHeuristic
    from ..gridworld import GoalSpec, Observation
    from ..memory_graph import MemoryGraph, Outcome, SubtaskNode
    from ..planning import CandidatePlan, PlannerContext, Rollout, SubtaskUnit
    from ..srm import ReflectionSummary


class Role(str, enum.Enum):
    PLANNER = "planner"
    WORLD_MODEL = "world_model"
    EVALUATOR = "evaluator"
    SRM_ANALYZER = "srm_analyzer"
    PRINCIPLE_ANALYZER = "principle_analyzer"
    HEURISTIC_EXTRACTOR = "heuristic_extractor"
    HEURISTIC_MERGER = "heuristic_merger"


class Family(str, enum.Enum):
    ORACLE = "oracle"
    REMOTE = "remote"


class Planner(Protocol):
    def propose(
        self, obs: "Observation", goal: "GoalSpec", context: "PlannerContext", n: int, max_len: int
    ) -> list["CandidatePlan"]: ...


class WorldModel(Protocol):
    def imagine(
        self, current: "Observation", subtasks: Sequence["SubtaskUnit"], h: int, plan_index: int
    ) -> "Rollout": ...


class Evaluator(Protocol):
    def score(self, rollout: "Rollout", goal: "GoalSpec", context: "PlannerContext | None") -> float: ...


class SrmAnalyzer(Protocol):
    def analyze(
        self, window: Sequence["SubtaskNode"], goal: "GoalSpec", heuristics: Sequence["MergedHeuristic"]
    ) -> "ReflectionSummary": ...


class PrincipleAnalyzer(Protocol):
    def principle(self, tau: Sequence["SubtaskNode"], outcome: "Outcome", goal: "GoalSpec") -> str: ...


class HeuristicExtractor(Protocol):
    def extract(self, graph: "MemoryGraph") -> list["Heuristic"]: ...


class HeuristicMerger(Protocol):
    def merge(self, members: Sequence["Heuristic"]) -> tuple[str, str]: ...


@dataclass
class BackendSet:
    planner: Planner
    world_model: WorldModel
    evaluator: Evaluator
    srm_analyzer: SrmAnalyzer
    principle_analyzer: PrincipleAnalyzer
    heuristic_extractor: HeuristicExtractor
    heuristic_merger: HeuristicMerger

    def role(self, role: Role):
        return getattr(self, role.value)


@dataclass(frozen=True)
class BackendProfile:
    """Which family serves a run, and how to reach it."""

    family: Family = Family.ORACLE
    noise: float = 0.0
    endpoints: dict[str, str] = field(default_factory=dict)
    base_url: str = ""
    api_key: str = ""
    model: str = "cortex-backbone"
    template_set: str = "v1"
    timeout: float = 60.0
    max_concurrency: int = 4

    def endpoint(self, role: Role) -> str:
        url = self.endpoints.get(role.value) or self.base_url
        if not url:
            raise ValueError(f"no endpoint configured for role {role.value}")
        return url
