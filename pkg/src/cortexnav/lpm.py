"""Long-term principle memory.

After an episode ends, every subtask's downstream trajectory is turned into
a principle: guiding if the episode succeeded, cautionary if it failed.
Principles are indexed by a goal-conditioned state embedding and retrieved
by thresholded cosine similarity. Stored episodes are consolidated per goal:
the shortest successes are kept, and when no success exists a diverse set
of failures is kept instead.
"""

from __future__ import annotations

import enum
import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .features import hashed_vector, normalize, tokens
from .gridworld import Cell, GoalSpec, Observation, Pose
from .memory_graph import GraphError, MemoryGraph, Outcome, SubtaskNode, load_graph, save_graph

log = logging.getLogger(__name__)

EMBEDDING_DIM = 64
DEFAULT_TOP_N = 3

# block weights: goal identity dominates so retrieval stays goal-conditioned
_GOAL_W, _POSE_W, _OBJECT_W, _RATIONALE_W = 0.8, 0.5, 0.2, 0.2


class BankError(RuntimeError):
    pass


class PrincipleKind(str, enum.Enum):
    GUIDING = "GUIDING"
    CAUTIONARY = "CAUTIONARY"


@dataclass(frozen=True)
class Principle:
    kind: PrincipleKind
    text: str
    source_episode: str
    source_subtask: str
    embedding: np.ndarray = field(compare=False, repr=False)
    # cell where the downstream trajectory ended
    anchor: Cell | None = None
    goal_digest: str = ""

    def __eq__(self, other) -> bool:
        if not isinstance(other, Principle):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.text == other.text
            and self.source_episode == other.source_episode
            and self.source_subtask == other.source_subtask
            and self.anchor == other.anchor
            and self.goal_digest == other.goal_digest
            and np.array_equal(self.embedding, other.embedding)
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "text": self.text,
            "source_episode": self.source_episode,
            "source_subtask": self.source_subtask,
            "anchor": list(self.anchor) if self.anchor is not None else None,
            "goal_digest": self.goal_digest,
            "embedding": [float(v) for v in self.embedding],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Principle":
        anchor = data.get("anchor")
        return cls(
            kind=PrincipleKind(data["kind"]),
            text=data["text"],
            source_episode=data["source_episode"],
            source_subtask=data["source_subtask"],
            embedding=np.asarray(data["embedding"], dtype=float),
            anchor=tuple(anchor) if anchor is not None else None,
            goal_digest=data.get("goal_digest", ""),
        )


def _block(features: Iterable[str], dim: int, weight: float) -> np.ndarray:
    return weight * normalize(hashed_vector(features, dim))


def state_features(
    goal: GoalSpec,
    pose: Pose,
    objects: Sequence[str] = (),
    rationale: str = "",
    dim: int = EMBEDDING_DIM,
) -> np.ndarray:
    goal_feats = [f"goal:{goal.digest()}", f"task:{goal.task_kind.value}"]
    goal_feats += [f"sig:{s}" for s in goal.signature]
    if goal.question:
        goal_feats += [f"q:{t}" for t in tokens(goal.question)]
    pose_feats = [f"p2:{pose.x // 2},{pose.y // 2}", f"p4:{pose.x // 4},{pose.y // 4}"]
    vec = _block(goal_feats, dim, _GOAL_W) + _block(pose_feats, dim, _POSE_W)
    if objects:
        vec = vec + _block((f"obj:{o}" for o in objects), dim, _OBJECT_W)
    if rationale:
        vec = vec + _block((f"r:{t}" for t in tokens(rationale)), dim, _RATIONALE_W)
    return normalize(vec)


def embed_state(goal: GoalSpec, subtask: SubtaskNode, dim: int = EMBEDDING_DIM) -> np.ndarray:
    """Goal-conditioned embedding of the state a subtask started from."""
    return state_features(goal, subtask.start_pose, subtask.observed_objects, subtask.rationale, dim)


def embed_observation(goal: GoalSpec, obs: Observation, dim: int = EMBEDDING_DIM) -> np.ndarray:
    """Query embedding for the current observation (a subtask that has not happened yet)."""
    objects = sorted(f"{col} {cat}" for _, cat, col in obs.visible_objects if cat != "unknown")
    return state_features(goal, obs.agent_pose, objects, "", dim)


def build_principles(graph: MemoryGraph, analyzer, k: int, dim: int = EMBEDDING_DIM) -> list[Principle]:
    if not graph.closed:
        raise GraphError("principles are built from finalized episodes only")
    kind = PrincipleKind.GUIDING if graph.outcome is Outcome.SUCCESS else PrincipleKind.CAUTIONARY
    goal = graph.root.goal
    out = []
    for sub_id in graph.subtask_ids():
        tau = graph.downstream_trajectory(sub_id, k)
        try:
            text = analyzer.principle(tau, graph.outcome, goal)
        except Exception as exc:
            log.warning("principle analyzer failed on %s/%s: %s", graph.episode_id, sub_id, exc)
            continue
        out.append(
            Principle(
                kind=kind,
                text=text,
                source_episode=graph.episode_id,
                source_subtask=sub_id,
                embedding=embed_state(goal, graph.nodes[sub_id], dim),
                anchor=tau[-1].end_pose.cell,
                goal_digest=goal.digest(),
            )
        )
    return out


def mean_embedding(graph: MemoryGraph, dim: int = EMBEDDING_DIM) -> np.ndarray:
    subs = graph.subtasks()
    if not subs:
        return np.zeros(dim)
    goal = graph.root.goal
    return np.mean([embed_state(goal, s, dim) for s in subs], axis=0)


def diverse_failures(graphs: Sequence[MemoryGraph], vectors: Sequence[np.ndarray], m: int) -> list[int]:
    """Indices of ``m`` failures chosen by greedy max-min distance.

    With one slot the longest failure is kept. With more, the farthest pair
    seeds the set (ties prefer the pair holding the longest failure, then
    the earliest pair) and the rest are added greedily.
    """
    n = len(graphs)
    if n <= m:
        return list(range(n))
    longest = min(range(n), key=lambda i: (-graphs[i].root.total_steps, i))
    if m == 1:
        return [longest]
    dist = np.array([[float(np.linalg.norm(vectors[i] - vectors[j])) for j in range(n)] for i in range(n)])
    seed = min(
        itertools.combinations(range(n), 2),
        key=lambda p: (-dist[p[0], p[1]], longest not in p, p),
    )
    chosen = list(seed)
    while len(chosen) < m:
        rest = [i for i in range(n) if i not in chosen]
        best = min(rest, key=lambda i: (-min(dist[i, j] for j in chosen), i))
        chosen.append(best)
    return sorted(chosen)


@dataclass
class EpisodeBank:
    dim: int = EMBEDDING_DIM
    episodes: dict[str, list[MemoryGraph]] = field(default_factory=dict)
    principles: list[Principle] = field(default_factory=list)

    def __len__(self) -> int:
        return sum(len(v) for v in self.episodes.values())

    def episode_ids(self) -> set[str]:
        return {g.episode_id for graphs in self.episodes.values() for g in graphs}

    def get_episode(self, episode_id: str) -> MemoryGraph | None:
        for graphs in self.episodes.values():
            for g in graphs:
                if g.episode_id == episode_id:
                    return g
        return None

    def trajectory_for(self, principle: Principle, k: int) -> list[SubtaskNode]:
        """Episodic trajectory behind a principle, for inspection."""
        graph = self.get_episode(principle.source_episode)
        if graph is None:
            return []
        return graph.downstream_trajectory(principle.source_subtask, k)

    # -- write path ----------------------------------------------------------

    def commit_episode(self, graph: MemoryGraph, principles: Sequence[Principle], m: int) -> "EpisodeBank":
        if not graph.closed:
            raise BankError("only finalized episodes can be committed")
        if graph.episode_id in self.episode_ids():
            raise BankError(f"duplicate episode id {graph.episode_id!r}")
        for p in principles:
            if len(p.embedding) != self.dim:
                raise BankError(f"principle embedding has dimension {len(p.embedding)}, bank uses {self.dim}")
        digest = graph.root.goal.digest()
        self.episodes.setdefault(digest, []).append(graph)
        self.principles.extend(principles)
        consolidate(self, digest, m)
        return self

    # -- read path -----------------------------------------------------------

    def retrieve(self, query: np.ndarray, threshold: float, top_n: int = DEFAULT_TOP_N) -> list[tuple[Principle, float]]:
        return retrieve(self, query, threshold, top_n)

    # -- persistence -----------------------------------------------------------

    def save(self, directory: str | Path) -> None:
        root = Path(directory)
        (root / "episodes").mkdir(parents=True, exist_ok=True)
        keep = set()
        for graphs in self.episodes.values():
            for g in graphs:
                save_graph(g, root / "episodes")
                keep.add(f"{g.episode_id}.mem")
        for stale in (root / "episodes").glob("*.mem"):
            if stale.name not in keep:
                stale.unlink()
        index = {
            "version": 1,
            "dim": self.dim,
            "goals": {d: [g.episode_id for g in graphs] for d, graphs in self.episodes.items()},
        }
        (root / "index.json").write_text(json.dumps(index, indent=1) + "\n")
        with open(root / "principles.jsonl", "w") as fh:
            for p in self.principles:
                fh.write(json.dumps(p.to_dict()) + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "EpisodeBank":
        root = Path(directory)
        if not (root / "index.json").exists():
            return cls()
        index = json.loads((root / "index.json").read_text())
        bank = cls(dim=int(index["dim"]))
        for digest, ids in index["goals"].items():
            bank.episodes[digest] = [load_graph(root / "episodes" / f"{i}.mem") for i in ids]
        path = root / "principles.jsonl"
        if path.exists():
            with open(path) as fh:
                bank.principles = [Principle.from_dict(json.loads(line)) for line in fh if line.strip()]
        return bank


def retrieve(
    bank: EpisodeBank, query: np.ndarray, threshold: float, top_n: int = DEFAULT_TOP_N
) -> list[tuple[Principle, float]]:
    """Cosine nearest neighbours with similarity >= ``threshold``.

    Sorted by similarity, highest first; equal similarities keep insertion
    order.
    """
    query = np.asarray(query, dtype=float)
    if query.shape != (bank.dim,):
        raise BankError(f"query dimension {query.shape} does not match bank dimension {bank.dim}")
    if not bank.principles or top_n <= 0:
        return []
    matrix = np.stack([p.embedding for p in bank.principles])
    norms = np.linalg.norm(matrix, axis=1) * np.linalg.norm(query)
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = np.where(norms > 0, matrix @ query / norms, 0.0)
    hits = [(float(s), i) for i, s in enumerate(sims) if s >= threshold]
    hits.sort(key=lambda t: (-t[0], t[1]))
    return [(bank.principles[i], s) for s, i in hits[:top_n]]


def consolidate(bank: EpisodeBank, goal_digest: str, m: int) -> EpisodeBank:
    """Apply the per-goal retention policy; evicted episodes lose their principles."""
    if m < 1:
        raise ValueError("max episodes per goal must be >= 1")
    graphs = bank.episodes.get(goal_digest)
    if not graphs:
        return bank
    successes = [i for i, g in enumerate(graphs) if g.outcome is Outcome.SUCCESS]
    if successes:
        ranked = sorted(successes, key=lambda i: (graphs[i].root.total_steps, graphs[i].episode_id))
        keep = sorted(ranked[:m])
    else:
        vectors = [mean_embedding(g, bank.dim) for g in graphs]
        keep = diverse_failures(graphs, vectors, m)
    kept = [graphs[i] for i in keep]
    evicted = {g.episode_id for g in graphs} - {g.episode_id for g in kept}
    bank.episodes[goal_digest] = kept
    if evicted:
        bank.principles = [p for p in bank.principles if p.source_episode not in evicted]
    return bank
