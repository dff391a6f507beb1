"""Per-episode experience graph: root, decision-step and subtask nodes.

Parent-child edges form a tree (root -> trajectory node -> subtask node).
Temporal edges chain subtask nodes in execution order. The graph is
append-only while the episode runs and frozen once finalized.

On disk a graph is newline-delimited JSON, one record per node or edge,
closed by an ``end`` record so truncation is detectable.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

from .gridworld import Action, GoalSpec, Pose, TaskKind

NodeId = str
ObservationId = str


class GraphError(RuntimeError):
    pass


class GraphFormatError(ValueError):
    pass


class Outcome(str, enum.Enum):
    PENDING = "PENDING"
    SUCCESS = "SUCCESS"
    FAILURE = "FAILURE"


class SubtaskStatus(str, enum.Enum):
    EXECUTED = "EXECUTED"
    ABORTED = "ABORTED"


@dataclass
class RootNode:
    episode_id: str
    task_kind: TaskKind
    goal: GoalSpec
    outcome: Outcome = Outcome.PENDING
    total_steps: int = 0


@dataclass(frozen=True)
class TrajectoryNode:
    step_index: int
    selected_plan_digest: str = ""
    observation_ref: ObservationId = ""


@dataclass(frozen=True)
class SubtaskNode:
    actions: tuple[Action, ...]
    rationale: str
    status: SubtaskStatus
    pre_observation: ObservationId
    post_observation: ObservationId
    pose_trace: tuple[Pose, ...]
    # "color category" labels recognised after the unit ran
    observed_objects: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.actions:
            raise GraphError("subtask must hold at least one action")
        if len(self.pose_trace) != len(self.actions) + 1:
            raise GraphError("pose_trace must hold one pose per executed action plus the start")

    @property
    def start_pose(self) -> Pose:
        return self.pose_trace[0]

    @property
    def end_pose(self) -> Pose:
        return self.pose_trace[-1]

    def collisions(self) -> list[bool]:
        """Per-action collision flags: a FORWARD that left the cell unchanged."""
        return [
            a.kind.value == "F" and before.cell == after.cell
            for a, before, after in zip(self.actions, self.pose_trace, self.pose_trace[1:])
        ]

    def to_dict(self) -> dict:
        return {
            "actions": [a.encode() for a in self.actions],
            "rationale": self.rationale,
            "status": self.status.value,
            "pre_observation": self.pre_observation,
            "post_observation": self.post_observation,
            "pose_trace": [p.to_list() for p in self.pose_trace],
            "observed_objects": list(self.observed_objects),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SubtaskNode":
        return cls(
            actions=tuple(Action.decode(a) for a in data["actions"]),
            rationale=data["rationale"],
            status=SubtaskStatus(data["status"]),
            pre_observation=data["pre_observation"],
            post_observation=data["post_observation"],
            pose_trace=tuple(Pose.from_list(p) for p in data["pose_trace"]),
            observed_objects=tuple(data.get("observed_objects", ())),
        )


@dataclass
class MemoryGraph:
    root: RootNode
    nodes: dict[NodeId, TrajectoryNode | SubtaskNode] = field(default_factory=dict)
    parent_child_edges: list[tuple[NodeId, NodeId]] = field(default_factory=list)
    temporal_edges: list[tuple[NodeId, NodeId]] = field(default_factory=list)
    next_id: int = 1

    ROOT_ID = "n0"

    @property
    def episode_id(self) -> str:
        return self.root.episode_id

    @property
    def outcome(self) -> Outcome:
        return self.root.outcome

    @property
    def closed(self) -> bool:
        return self.root.outcome is not Outcome.PENDING

    def node_count(self) -> int:
        return len(self.nodes) + 1

    def subtask_ids(self) -> list[NodeId]:
        """Subtask ids in temporal (execution) order."""
        if not self.temporal_edges:
            return [i for i, n in self.nodes.items() if isinstance(n, SubtaskNode)]
        ids = [self.temporal_edges[0][0]]
        ids.extend(dst for _, dst in self.temporal_edges)
        return ids

    def subtasks(self) -> list[SubtaskNode]:
        return [self.nodes[i] for i in self.subtask_ids()]

    def trajectory_nodes(self) -> list[tuple[NodeId, TrajectoryNode]]:
        return [(i, n) for i, n in self.nodes.items() if isinstance(n, TrajectoryNode)]

    def parent_of(self, node_id: NodeId) -> NodeId | None:
        for parent, child in self.parent_child_edges:
            if child == node_id:
                return parent
        return None

    def _new_id(self) -> NodeId:
        node_id = f"n{self.next_id}"
        self.next_id += 1
        return node_id

    def append_subtask(
        self,
        step_index: int,
        subtask: SubtaskNode,
        plan_digest: str = "",
        observation_ref: ObservationId = "",
    ) -> NodeId:
        """Attach ``subtask`` under the trajectory node for ``step_index``.

        The trajectory node is created on first use and reused by later
        subtasks of the same decision step.
        """
        if self.closed:
            raise GraphError("episode closed")
        trajectory = self.trajectory_nodes()
        if trajectory and step_index < trajectory[-1][1].step_index:
            raise GraphError(
                f"non-monotonic step_index {step_index} < {trajectory[-1][1].step_index}"
            )
        if trajectory and trajectory[-1][1].step_index == step_index:
            traj_id = trajectory[-1][0]
        else:
            traj_id = self._new_id()
            self.nodes[traj_id] = TrajectoryNode(step_index, plan_digest, observation_ref)
            self.parent_child_edges.append((self.ROOT_ID, traj_id))
        previous = self.subtask_ids()
        sub_id = self._new_id()
        self.nodes[sub_id] = subtask
        self.parent_child_edges.append((traj_id, sub_id))
        if previous:
            self.temporal_edges.append((previous[-1], sub_id))
        return sub_id

    def recent_window(self, w: int) -> list[SubtaskNode]:
        if w < 1:
            raise ValueError("window size must be >= 1")
        return self.subtasks()[-w:]

    def downstream_trajectory(self, start: NodeId, k: int) -> list[SubtaskNode]:
        """``start`` followed by up to ``k`` temporal successors."""
        if not isinstance(self.nodes.get(start), SubtaskNode):
            raise GraphError(f"{start} is not a subtask node")
        successor = dict(self.temporal_edges)
        chain = [start]
        while len(chain) <= k and chain[-1] in successor:
            chain.append(successor[chain[-1]])
        return [self.nodes[i] for i in chain]

    def finalize(self, outcome: Outcome, total_steps: int | None = None) -> "MemoryGraph":
        if self.closed:
            raise GraphError("already finalized")
        if outcome is Outcome.PENDING:
            raise GraphError("final outcome must be SUCCESS or FAILURE")
        self.root.outcome = outcome
        self.root.total_steps = (
            total_steps if total_steps is not None else sum(len(s.actions) for s in self.subtasks())
        )
        return self

    # -- persistence -------------------------------------------------------

    def serialize(self) -> bytes:
        records = [
            {
                "rec": "graph",
                "version": 1,
                "episode_id": self.root.episode_id,
                "task_kind": self.root.task_kind.value,
                "goal": self.root.goal.to_dict(),
                "outcome": self.root.outcome.value,
                "total_steps": self.root.total_steps,
                "next_id": self.next_id,
            }
        ]
        for node_id, node in self.nodes.items():
            if isinstance(node, TrajectoryNode):
                records.append(
                    {
                        "rec": "traj",
                        "id": node_id,
                        "step_index": node.step_index,
                        "plan_digest": node.selected_plan_digest,
                        "observation": node.observation_ref,
                    }
                )
            else:
                records.append({"rec": "sub", "id": node_id, **node.to_dict()})
        records.extend({"rec": "parent", "src": a, "dst": b} for a, b in self.parent_child_edges)
        records.extend({"rec": "temporal", "src": a, "dst": b} for a, b in self.temporal_edges)
        records.append({"rec": "end", "count": len(records)})
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records).encode()

    @classmethod
    def deserialize(cls, data: bytes) -> "MemoryGraph":
        graph: MemoryGraph | None = None
        offset = 0
        index = 0
        ended = False
        for raw in data.splitlines(keepends=True):
            where = f"record {index} at byte offset {offset}"
            if ended:
                raise GraphFormatError(f"{where}: data after end record")
            if not raw.endswith(b"\n"):
                raise GraphFormatError(f"{where}: truncated record")
            try:
                rec = json.loads(raw)
                kind = rec["rec"]
                if graph is None:
                    if kind != "graph":
                        raise GraphFormatError(f"{where}: expected graph header, got {kind!r}")
                    graph = cls(
                        RootNode(
                            rec["episode_id"],
                            TaskKind(rec["task_kind"]),
                            GoalSpec.from_dict(rec["goal"]),
                            Outcome(rec["outcome"]),
                            int(rec["total_steps"]),
                        ),
                        next_id=int(rec["next_id"]),
                    )
                elif kind == "traj":
                    graph.nodes[rec["id"]] = TrajectoryNode(
                        int(rec["step_index"]), rec["plan_digest"], rec["observation"]
                    )
                elif kind == "sub":
                    graph.nodes[rec["id"]] = SubtaskNode.from_dict(rec)
                elif kind == "parent":
                    graph.parent_child_edges.append((rec["src"], rec["dst"]))
                elif kind == "temporal":
                    graph.temporal_edges.append((rec["src"], rec["dst"]))
                elif kind == "end":
                    if int(rec["count"]) != index:
                        raise GraphFormatError(f"{where}: record count mismatch")
                    ended = True
                else:
                    raise GraphFormatError(f"{where}: unknown record kind {kind!r}")
            except GraphFormatError:
                raise
            except (ValueError, KeyError, TypeError, GraphError) as exc:
                raise GraphFormatError(f"{where}: {exc}") from exc
            offset += len(raw)
            index += 1
        if graph is None or not ended:
            raise GraphFormatError(f"truncated stream at byte offset {offset}")
        graph.validate()
        return graph

    def validate(self) -> None:
        children: dict[NodeId, NodeId] = {}
        for parent, child in self.parent_child_edges:
            if child in children:
                raise GraphFormatError(f"node {child} has two parents")
            children[child] = parent
        for node_id, node in self.nodes.items():
            parent = children.get(node_id)
            if isinstance(node, TrajectoryNode) and parent != self.ROOT_ID:
                raise GraphFormatError(f"trajectory node {node_id} not under root")
            if isinstance(node, SubtaskNode) and not isinstance(self.nodes.get(parent), TrajectoryNode):
                raise GraphFormatError(f"subtask node {node_id} not under a trajectory node")
        if len(self.parent_child_edges) != len(self.nodes):
            raise GraphFormatError("parent-child edges do not form a tree")


def create_episode(episode_id: str, task_kind: TaskKind, goal: GoalSpec) -> MemoryGraph:
    if not episode_id:
        raise GraphError("episode_id must be non-empty")
    return MemoryGraph(RootNode(episode_id, task_kind, goal))


def save_graph(graph: MemoryGraph, directory: str | Path) -> Path:
    path = Path(directory) / f"{graph.episode_id}.mem"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(graph.serialize())
    return path


def load_graph(path: str | Path) -> MemoryGraph:
    return MemoryGraph.deserialize(Path(path).read_bytes())
