"""SR / SPL / mean trajectory / Answer Score aggregation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field


@dataclass(frozen=True)
class EpisodeRecord:
    """Per-episode result.

    ``path_length`` is the number of cells actually traversed (successful
    FORWARD moves); rotations and terminal actions cover no distance.
    ``shortest`` is the geodesic optimum for the same start.
    """

    episode_id: str
    success: bool
    shortest: int
    path_length: int
    n_actions: int = 0
    answer_score: float | None = None
    failure_patterns: tuple[str, ...] = ()
    goal_digest: str = ""

    def spl(self) -> float:
        if not self.success:
            return 0.0
        denom = max(self.path_length, self.shortest)
        return 1.0 if denom == 0 else self.shortest / denom

    def to_dict(self) -> dict:
        data = asdict(self)
        data["failure_patterns"] = list(self.failure_patterns)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "EpisodeRecord":
        data = dict(data)
        data["failure_patterns"] = tuple(data.get("failure_patterns", ()))
        return cls(**data)


@dataclass(frozen=True)
class Metrics:
    sr: float
    spl: float
    mean_traj: float
    answer_score: float | None = None
    n_episodes: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "sr": self.sr,
            "spl": self.spl,
            "mean_traj": self.mean_traj,
            "answer_score": self.answer_score,
            "n_episodes": self.n_episodes,
        }


def compute_metrics(records: list[EpisodeRecord]) -> Metrics:
    if not records:
        raise ValueError("cannot compute metrics over an empty result list")
    n = len(records)
    scores = [r.answer_score for r in records if r.answer_score is not None]
    return Metrics(
        sr=sum(1.0 for r in records if r.success) / n,
        spl=sum(r.spl() for r in records) / n,
        mean_traj=sum(r.path_length for r in records) / n,
        answer_score=sum(scores) / len(scores) if scores else None,
        n_episodes=n,
    )
