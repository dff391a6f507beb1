"""Suites, rounds and heuristic transfer over the persistent stores."""

from __future__ import annotations

import json
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from ..aki import HeuristicLibrary, LibraryError, extract_heuristics, select_guidance, update_library
from ..backends.oracle import OracleFamily
from ..config import CortexConfig, config_from_mapping
from ..gridworld import EpisodeRecord, Metrics, compute_metrics
from ..lpm import EpisodeBank, build_principles
from .episode import EpisodeHooks, EpisodeResult, Mode, run_episode
from .manifest import SuiteManifest

log = logging.getLogger(__name__)


class StoreError(RuntimeError):
    """The stores handed to a run do not fit its mode."""


@dataclass(frozen=True)
class Stores:
    """Directories holding the episode bank and the heuristic library."""

    bank: Path | None = None
    library: Path | None = None


@dataclass
class RunRecord:
    mode: Mode
    config: CortexConfig
    suite_id: str
    records: list[EpisodeRecord]
    metrics: Metrics
    round_index: int = 1
    bank: str | None = None
    library: str | None = None
    transfer: bool = False
    errors: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "suite_id": self.suite_id,
            "mode": self.mode.value,
            "round": self.round_index,
            "transfer": self.transfer,
            "config": self.config.to_dict(),
            "metrics": self.metrics.to_dict(),
            "episodes": [r.to_dict() for r in self.records],
            "errors": dict(sorted(self.errors.items())),
            "artifacts": {"bank": self.bank, "library": self.library},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        records = [EpisodeRecord.from_dict(r) for r in data["episodes"]]
        return cls(
            mode=Mode(data["mode"]),
            config=config_from_mapping(data["config"]),
            suite_id=data["suite_id"],
            records=records,
            metrics=compute_metrics(records),
            round_index=int(data["round"]),
            bank=data["artifacts"].get("bank"),
            library=data["artifacts"].get("library"),
            transfer=bool(data.get("transfer", False)),
            errors=dict(data.get("errors", {})),
        )


def default_family(config: CortexConfig):
    return OracleFamily(config.world_model_noise, config.seed, config.max_steps)


def _open_bank(mode: Mode, stores: Stores) -> EpisodeBank | None:
    if not mode.lpm:
        return None
    if stores.bank is None:
        raise StoreError(f"mode {mode.value} needs a bank directory")
    path = Path(stores.bank)
    if not mode.commits_bank and not (path / "index.json").exists():
        raise StoreError(f"mode {mode.value} reads the bank at {path}, which does not exist")
    return EpisodeBank.load(path)


def _open_library(mode: Mode, stores: Stores, config: CortexConfig, merger) -> HeuristicLibrary | None:
    if not mode.aki:
        return None
    if stores.library is None:
        raise StoreError(f"mode {mode.value} needs a library directory")
    path = Path(stores.library)
    if not mode.updates_library and not path.is_dir():
        raise StoreError(f"mode {mode.value} reads the library at {path}, which does not exist")
    try:
        library = HeuristicLibrary.load(path)
    except LibraryError as exc:
        raise StoreError(str(exc)) from exc
    if mode.updates_library and library.similarity_threshold != config.sim_threshold:
        library.similarity_threshold = config.sim_threshold
        library.rebuild(merger)
    return library


def episode_id_for(suite_id: str, round_index: int, index: int) -> str:
    return f"{suite_id}-r{round_index:02d}-{index:03d}"


def _execute(
    manifest: SuiteManifest,
    config: CortexConfig,
    mode: Mode,
    stores: Stores,
    family,
    round_index: int,
    use_bank: bool = True,
) -> RunRecord:
    bank = _open_bank(mode, stores) if use_bank else None
    library = _open_library(mode, stores, config, family.merger())
    records: list[EpisodeRecord] = []
    errors: dict[str, str] = {}
    for episode in manifest.expand():
        episode_id = episode_id_for(manifest.suite_id, round_index, episode.index)
        backends = family.for_episode(episode.grid, episode_id)
        guidance = (
            select_guidance(library, config.confidence_floor, config.min_support) if library is not None else []
        )
        hooks = EpisodeHooks(srm=mode.srm, bank=bank, guidance=guidance)
        result: EpisodeResult = run_episode(
            episode_id, episode.grid, episode.start, episode.goal, config, backends, hooks
        )
        records.append(result.record)
        if result.error:
            errors[episode_id] = result.error
        if bank is not None and mode.commits_bank:
            principles = build_principles(result.graph, backends.principle_analyzer, config.lpm_horizon, bank.dim)
            bank.commit_episode(result.graph, principles, config.max_episodes_per_goal)
            bank.save(stores.bank)
        if library is not None and mode.updates_library:
            found = extract_heuristics(backends.heuristic_extractor, result.graph)
            if found:
                update_library(library, found, config.sim_threshold, backends.heuristic_merger)
                library.save(stores.library)
    return RunRecord(
        mode=mode,
        config=config,
        suite_id=manifest.suite_id,
        records=records,
        metrics=compute_metrics(records),
        round_index=round_index,
        bank=str(stores.bank) if bank is not None else None,
        library=str(stores.library) if library is not None else None,
        errors=errors,
    )


def run_suite(
    manifest: SuiteManifest,
    config: CortexConfig,
    mode: Mode,
    stores: Stores | None = None,
    family=None,
    round_index: int = 1,
) -> RunRecord:
    """Run every episode of ``manifest`` once under ``mode``.

    Bank and library writes happen after each episode, so later episodes of
    the same round already see what earlier ones left behind.
    """
    return _execute(manifest, config, Mode(mode), stores or Stores(), family or default_family(config), round_index)


def run_rounds(
    manifest: SuiteManifest,
    config: CortexConfig,
    mode: Mode,
    n_rounds: int,
    stores: Stores | None = None,
    family=None,
) -> list[RunRecord]:
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    family = family or default_family(config)
    return [run_suite(manifest, config, mode, stores, family, r) for r in range(1, n_rounds + 1)]


def transfer_heuristics(
    source_library: str | Path,
    manifest: SuiteManifest,
    config: CortexConfig,
    freeze: bool = True,
    out: str | Path | None = None,
    family=None,
) -> RunRecord:
    """Apply a library induced elsewhere to ``manifest`` with reflection on.

    A frozen transfer only reads ``source_library``. An unfrozen one copies
    it to ``out/library`` first and keeps learning there.
    """
    source = Path(source_library)
    try:
        library = HeuristicLibrary.load(source)
    except LibraryError as exc:
        raise StoreError(f"cannot load library {source}: {exc}") from exc
    if not source.is_dir():
        raise StoreError(f"library directory {source} does not exist")
    family = family or default_family(config)
    try:
        library.check_recompute(family.merger())
    except LibraryError as exc:
        raise StoreError(f"library {source} fails its recompute check: {exc}") from exc
    if freeze:
        record = _execute(manifest, config, Mode.STATIC_FULL, Stores(library=source), family, 1, use_bank=False)
    else:
        if out is None:
            raise ValueError("an unfrozen transfer needs an output directory")
        target = Path(out) / "library"
        if target.exists():
            shutil.rmtree(target)
        shutil.copytree(source, target)
        record = _execute(manifest, config, Mode.ADAPTIVE_FULL, Stores(library=target), family, 1, use_bank=False)
    record.transfer = True
    return record


def save_records(records: list[RunRecord], directory: str | Path) -> list[Path]:
    root = Path(directory) / "rounds"
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    for rec in records:
        path = root / f"{rec.mode.value}-round{rec.round_index:02d}.json"
        path.write_text(json.dumps(rec.to_dict(), indent=1, sort_keys=True) + "\n")
        paths.append(path)
    return paths


def load_records(directory: str | Path) -> list[RunRecord]:
    root = Path(directory) / "rounds"
    if not root.is_dir():
        return []
    return [RunRecord.from_dict(json.loads(p.read_text())) for p in sorted(root.glob("*.json"))]
