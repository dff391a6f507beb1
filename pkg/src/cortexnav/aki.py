"""Heuristic induction across episodes.

Finished episodes are mined for recurring patterns. Each raw heuristic is
logged; the merged library is always rebuilt from that log by grouping on
pattern id, single-linkage clustering on text similarity, and merging
each cluster into one generalised heuristic.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .features import text_similarity
from .memory_graph import MemoryGraph, Outcome

log = logging.getLogger(__name__)

SIMILARITY_DIM = 1024
DEFAULT_CAP = 5
RAW_FILE = "raw.jsonl"
MERGED_FILE = "merged.json"


class LibraryError(RuntimeError):
    pass


class MergeError(ValueError):
    pass


@dataclass(frozen=True)
class Heuristic:
    pattern_id: str
    description: str
    strategy: str
    confidence: float
    outcome_tag: Outcome
    source_episode: str

    def __post_init__(self) -> None:
        if not self.pattern_id:
            raise ValueError("pattern_id must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} out of [0,1]")
        if self.outcome_tag not in (Outcome.SUCCESS, Outcome.FAILURE):
            raise ValueError("outcome_tag must be SUCCESS or FAILURE")

    @property
    def text(self) -> str:
        return f"{self.description} {self.strategy}"

    def sort_key(self) -> tuple:
        return (self.pattern_id, self.description, self.strategy, self.confidence, self.outcome_tag.value, self.source_episode)

    def to_dict(self) -> dict:
        return {
            "pattern_id": self.pattern_id,
            "description": self.description,
            "strategy": self.strategy,
            "confidence": self.confidence,
            "outcome_tag": self.outcome_tag.value,
            "source_episode": self.source_episode,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Heuristic":
        return cls(
            pattern_id=data["pattern_id"],
            description=data["description"],
            strategy=data["strategy"],
            confidence=float(data["confidence"]),
            outcome_tag=Outcome(data["outcome_tag"]),
            source_episode=data["source_episode"],
        )


@dataclass(frozen=True)
class MergedHeuristic:
    pattern_id: str
    description: str
    strategy: str
    confidence: float
    support: int
    outcome_mix: tuple[int, int]
    provenance: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.support < 1:
            raise ValueError("support must be positive")
        if sum(self.outcome_mix) != self.support or len(self.provenance) != self.support:
            raise ValueError("support, outcome mix and provenance disagree")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} out of [0,1]")

    def to_dict(self) -> dict:
        return {
            "pattern_id": self.pattern_id,
            "description": self.description,
            "strategy": self.strategy,
            "confidence": self.confidence,
            "support": self.support,
            "outcome_mix": list(self.outcome_mix),
            "provenance": list(self.provenance),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MergedHeuristic":
        return cls(
            pattern_id=data["pattern_id"],
            description=data["description"],
            strategy=data["strategy"],
            confidence=float(data["confidence"]),
            support=int(data["support"]),
            outcome_mix=tuple(data["outcome_mix"]),
            provenance=tuple(data["provenance"]),
        )


def extract_heuristics(extractor, graph: MemoryGraph) -> list[Heuristic]:
    if not graph.closed:
        raise LibraryError("heuristics are extracted from finalized episodes only")
    try:
        found = list(extractor.extract(graph))
    except Exception as exc:
        log.warning("heuristic extractor failed on %s: %s", graph.episode_id, exc)
        return []
    return found


def cluster(heuristics: Sequence[Heuristic], threshold: float) -> list[list[Heuristic]]:
    """Partition by pattern id, then by single-linkage on text similarity.

    The partition does not depend on input order: members are sorted inside
    each cluster and clusters are listed by their first member.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("similarity threshold out of [0,1]")
    groups: dict[str, list[Heuristic]] = {}
    for h in sorted(heuristics, key=Heuristic.sort_key):
        groups.setdefault(h.pattern_id, []).append(h)
    out = []
    for pattern in sorted(groups):
        members = groups[pattern]
        parent = list(range(len(members)))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        sims: dict[tuple[str, str], float] = {}
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                key = (members[i].text, members[j].text)
                if key not in sims:
                    sims[key] = 1.0 if key[0] == key[1] else text_similarity(*key, dim=SIMILARITY_DIM)
                if sims[key] >= threshold:
                    parent[find(j)] = find(i)
        buckets: dict[int, list[Heuristic]] = {}
        for i, h in enumerate(members):
            buckets.setdefault(find(i), []).append(h)
        out.extend(sorted(buckets.values(), key=lambda c: c[0].sort_key()))
    return out


def merge_cluster(members: Sequence[Heuristic], merger) -> MergedHeuristic:
    if not members:
        raise MergeError("cannot merge an empty cluster")
    patterns = {h.pattern_id for h in members}
    if len(patterns) != 1:
        raise MergeError(f"cluster mixes pattern ids {sorted(patterns)}")
    ordered = sorted(members, key=Heuristic.sort_key)
    description, strategy = merger.merge(ordered)
    successes = sum(1 for h in ordered if h.outcome_tag is Outcome.SUCCESS)
    confidence = math.fsum(h.confidence for h in ordered) / len(ordered)
    lo, hi = min(h.confidence for h in ordered), max(h.confidence for h in ordered)
    return MergedHeuristic(
        pattern_id=ordered[0].pattern_id,
        description=description,
        strategy=strategy,
        confidence=min(max(confidence, lo), hi),
        support=len(ordered),
        outcome_mix=(successes, len(ordered) - successes),
        provenance=tuple(sorted(h.source_episode for h in ordered)),
    )


@dataclass
class HeuristicLibrary:
    raw: list[Heuristic] = field(default_factory=list)
    merged: dict[str, list[MergedHeuristic]] = field(default_factory=dict)
    similarity_threshold: float = 0.85

    def entries(self) -> list[MergedHeuristic]:
        return [m for pattern in sorted(self.merged) for m in self.merged[pattern]]

    def rebuild(self, merger, patterns: Iterable[str] | None = None) -> "HeuristicLibrary":
        wanted = set(patterns) if patterns is not None else {h.pattern_id for h in self.raw}
        subset = [h for h in self.raw if h.pattern_id in wanted]
        fresh: dict[str, list[MergedHeuristic]] = {}
        for members in cluster(subset, self.similarity_threshold):
            fresh.setdefault(members[0].pattern_id, []).append(merge_cluster(members, merger))
        for pattern in wanted:
            self.merged.pop(pattern, None)
        self.merged.update(fresh)
        return self

    def save(self, directory: str | Path) -> None:
        root = Path(directory)
        root.mkdir(parents=True, exist_ok=True)
        with open(root / RAW_FILE, "w") as fh:
            for h in self.raw:
                fh.write(json.dumps(h.to_dict()) + "\n")
        doc = {
            "version": 1,
            "similarity_threshold": self.similarity_threshold,
            "entries": [m.to_dict() for m in self.entries()],
        }
        (root / MERGED_FILE).write_text(json.dumps(doc, indent=1) + "\n")

    @classmethod
    def load(cls, directory: str | Path, similarity_threshold: float | None = None) -> "HeuristicLibrary":
        root = Path(directory)
        lib = cls()
        raw_path = root / RAW_FILE
        if raw_path.exists():
            try:
                with open(raw_path) as fh:
                    lib.raw = [Heuristic.from_dict(json.loads(line)) for line in fh if line.strip()]
            except (ValueError, KeyError) as exc:
                raise LibraryError(f"corrupt heuristic log {raw_path}: {exc}") from exc
        merged_path = root / MERGED_FILE
        if merged_path.exists():
            try:
                doc = json.loads(merged_path.read_text())
                lib.similarity_threshold = float(doc.get("similarity_threshold", lib.similarity_threshold))
                for entry in doc.get("entries", []):
                    m = MergedHeuristic.from_dict(entry)
                    lib.merged.setdefault(m.pattern_id, []).append(m)
            except (ValueError, KeyError) as exc:
                raise LibraryError(f"corrupt merged index {merged_path}: {exc}") from exc
        if similarity_threshold is not None:
            lib.similarity_threshold = similarity_threshold
        return lib

    def check_recompute(self, merger) -> None:
        """Raise if the merged index is not what the raw log rebuilds to."""
        fresh = HeuristicLibrary(list(self.raw), {}, self.similarity_threshold).rebuild(merger)
        if fresh.entries() != self.entries():
            raise LibraryError("merged index does not match the raw log")


def update_library(library: HeuristicLibrary, new: Sequence[Heuristic], threshold: float, merger) -> HeuristicLibrary:
    """Append to the raw log and rebuild the touched pattern groups from it."""
    if not new:
        return library
    library.raw.extend(new)
    if threshold != library.similarity_threshold:
        library.similarity_threshold = threshold
        return library.rebuild(merger)
    return library.rebuild(merger, {h.pattern_id for h in new})


def select_guidance(
    library: HeuristicLibrary, c_min: float, min_support: int, cap: int = DEFAULT_CAP
) -> list[MergedHeuristic]:
    picked = [m for m in library.entries() if m.confidence >= c_min and m.support >= min_support]
    picked.sort(key=lambda m: (-m.confidence, -m.support, m.pattern_id, m.description, m.strategy))
    return picked[: max(cap, 0)]
