"""Suite manifests: which maps and episodes a run covers."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..gridworld import GoalSpec, GridMap, Pose, TaskKind, generate_map, sample_episode


class ManifestError(ValueError):
    pass


class Split(str, enum.Enum):
    SEEN = "SEEN"
    UNSEEN = "UNSEEN"


@dataclass(frozen=True)
class MapParams:
    width: int = 16
    height: int = 16
    n_rooms: int = 1
    n_objects: int = 0
    clutter: float = 0.0


@dataclass(frozen=True)
class EpisodeSpec:
    map_seed: int
    min_distance: int = 1
    max_distance: int | None = None


@dataclass(frozen=True)
class Episode:
    index: int
    spec: EpisodeSpec
    grid: GridMap
    start: Pose
    goal: GoalSpec


@dataclass(frozen=True)
class SuiteManifest:
    suite_id: str
    task_kind: TaskKind
    episodes: tuple[EpisodeSpec, ...]
    split: Split = Split.SEEN
    map_params: MapParams = field(default_factory=MapParams)

    def __post_init__(self) -> None:
        if not self.episodes:
            raise ManifestError(f"suite {self.suite_id!r} has no episodes")

    def expand(self) -> list[Episode]:
        """Build every map and sample every episode; deterministic per seed."""
        return [
            Episode(i, spec, *_build(self.task_kind, self.map_params, spec))
            for i, spec in enumerate(self.episodes)
        ]

    def map_seeds(self) -> set[int]:
        return {e.map_seed for e in self.episodes}


@lru_cache(maxsize=512)
def _build(task_kind: TaskKind, params: MapParams, spec: EpisodeSpec) -> tuple[GridMap, Pose, GoalSpec]:
    try:
        grid = generate_map(spec.map_seed, params.width, params.height, params.n_rooms, params.n_objects, params.clutter)
        start, goal = sample_episode(grid, task_kind, random.Random(spec.map_seed), spec.min_distance, spec.max_distance)
    except ValueError as exc:
        raise ManifestError(f"episode on map seed {spec.map_seed}: {exc}") from exc
    return grid, start, goal


def _seeds(raw: Any) -> list[int]:
    if isinstance(raw, Mapping):
        try:
            start, count = int(raw["start"]), int(raw["count"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError("seed range needs integer 'start' and 'count'") from exc
        if count < 1:
            raise ManifestError("seed range count must be >= 1")
        return list(range(start, start + count))
    if isinstance(raw, list) and all(isinstance(s, int) for s in raw):
        return list(raw)
    raise ManifestError("seeds must be a list of integers or a {start, count} range")


def manifest_from_mapping(data: Mapping[str, Any]) -> SuiteManifest:
    known = {"suite_id", "task_kind", "split", "map", "episode", "seeds"}
    unknown = set(data) - known
    if unknown:
        raise ManifestError(f"unknown manifest keys: {sorted(unknown)}")
    try:
        suite_id = str(data["suite_id"])
        task_kind = TaskKind(str(data["task_kind"]).upper())
        split = Split(str(data.get("split", "SEEN")).upper())
        map_params = MapParams(**(data.get("map") or {}))
    except (KeyError, ValueError, TypeError) as exc:
        raise ManifestError(f"bad manifest: {exc}") from exc
    ep = dict(data.get("episode") or {})
    unknown = set(ep) - {"min_distance", "max_distance"}
    if unknown:
        raise ManifestError(f"unknown episode keys: {sorted(unknown)}")
    specs = tuple(EpisodeSpec(seed, **ep) for seed in _seeds(data.get("seeds")))
    return SuiteManifest(suite_id, task_kind, specs, split, map_params)


def load_manifest(source: str | Path) -> SuiteManifest:
    """Load a manifest file, or a bundled suite by name (e.g. ``reference``)."""
    path = Path(source)
    if path.exists():
        text = path.read_text()
    else:
        bundled = resources.files("cortexnav.harness") / "suites" / f"{source}.yaml"
        if not bundled.is_file():
            raise ManifestError(f"no manifest file or bundled suite named {source!r}")
        text = bundled.read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ManifestError(f"manifest does not parse: {exc}") from exc
    if not isinstance(data, Mapping):
        raise ManifestError("manifest must be a mapping")
    return manifest_from_mapping(data)
