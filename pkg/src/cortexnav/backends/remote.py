"""Chat-completions client serving the seven roles over HTTP.

Every role renders a versioned prompt template with a JSON context, sends
it to its endpoint and expects exactly one fenced ```json block back.
Request bodies are serialised deterministically so they can be frozen as
golden files.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from string import Template
from typing import Any, Callable, Mapping, Sequence

import httpx

from ..aki import Heuristic
from ..gridworld import Action, GoalSpec, GridMap, Observation
from ..memory_graph import MemoryGraph, Outcome, SubtaskNode
from ..planning import CandidatePlan, PlannerContext, Rollout, SubtaskUnit
from ..srm import Progress, ReflectionSummary, window_span
from .base import BackendProfile, BackendSet, Family, Role

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 3
BACKOFF_BASE = 0.5
RATING_MAX = 10.0

_FENCE = re.compile(r"```json[ \t]*\n(.*?)\n?```", re.DOTALL)
_RETRY_STATUS = {408, 429, 500, 502, 503, 504}


class RemoteError(RuntimeError):
    def __init__(self, role: Role, message: str):
        super().__init__(f"{role.value}: {message}")
        self.role = role


class RemoteParseError(RemoteError):
    """The response did not carry a well-formed block for the role."""


class RemoteTransportError(RemoteError):
    """The request could not be completed after retries."""


class RemoteAuthError(RemoteError):
    """The endpoint rejected the credentials; never retried."""


def profile_from_env(environ: Mapping[str, str] | None = None, **overrides) -> BackendProfile:
    """Remote profile from ``CORTEX_REMOTE_*`` variables.

    ``CORTEX_REMOTE_BASE_URL`` and ``CORTEX_REMOTE_API_KEY`` apply to every
    role; ``CORTEX_REMOTE_<ROLE>_URL`` overrides the URL of one role.
    """
    env = os.environ if environ is None else environ
    endpoints = {}
    for role in Role:
        url = env.get(f"CORTEX_REMOTE_{role.value.upper()}_URL")
        if url:
            endpoints[role.value] = url
    fields_ = {
        "family": Family.REMOTE,
        "base_url": env.get("CORTEX_REMOTE_BASE_URL", ""),
        "api_key": env.get("CORTEX_REMOTE_API_KEY", ""),
        "endpoints": endpoints,
    }
    if env.get("CORTEX_REMOTE_MODEL"):
        fields_["model"] = env["CORTEX_REMOTE_MODEL"]
    fields_.update(overrides)
    return BackendProfile(**fields_)


def load_template(template_set: str, name: str) -> Template:
    path = resources.files("cortexnav.backends") / "templates" / template_set / f"{name}.txt"
    if not path.is_file():
        raise FileNotFoundError(f"no template {name!r} in set {template_set!r}")
    return Template(path.read_text())


def dump_context(context: Any) -> str:
    return json.dumps(context, sort_keys=True, indent=1, ensure_ascii=False)


def encode_body(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, indent=1, ensure_ascii=False).encode() + b"\n"


def extract_block(role: Role, content: str) -> dict:
    matches = _FENCE.findall(content)
    if not matches:
        raise RemoteParseError(role, "response has no fenced json block")
    if len(matches) > 1:
        raise RemoteParseError(role, "response has more than one fenced json block")
    try:
        data = json.loads(matches[0])
    except json.JSONDecodeError as exc:
        raise RemoteParseError(role, f"fenced block is not valid json: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise RemoteParseError(role, "fenced block must hold a json object")
    return data


@dataclass
class Transcript:
    """Request and response pairs of one episode, for audit."""

    path: Path | None = None
    entries: list[dict] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, role: Role, attempt: int, request: dict, status: int | None, response: str | None) -> None:
        entry = {"role": role.value, "attempt": attempt, "request": request, "status": status, "response": response}
        with self._lock:
            self.entries.append(entry)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a") as fh:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")


class RemoteClient:
    def __init__(
        self,
        profile: BackendProfile,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        transcript: Transcript | None = None,
    ):
        self.profile = profile
        self.sleep = sleep
        self.transcript = transcript if transcript is not None else Transcript()
        self._http = httpx.Client(transport=transport, timeout=profile.timeout)
        self._slots = threading.BoundedSemaphore(max(1, profile.max_concurrency))
        self._system = load_template(profile.template_set, "system")

    def build_request(self, role: Role, context: Any, **slots: Any) -> dict:
        """The chat-completions body for one role; pure and deterministic."""
        user = load_template(self.profile.template_set, role.value).substitute(context=dump_context(context), **slots)
        system = self._system.substitute(role=role.value.replace("_", " "))
        return {
            "model": self.profile.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        }

    def url_for(self, role: Role) -> str:
        return self.profile.endpoint(role).rstrip("/") + "/chat/completions"

    def call(self, role: Role, context: Any, **slots: Any) -> dict:
        payload = self.build_request(role, context, **slots)
        body = encode_body(payload)
        headers = {"content-type": "application/json"}
        if self.profile.api_key:
            headers["authorization"] = f"Bearer {self.profile.api_key}"
        url = self.url_for(role)
        last = "no attempt made"
        for attempt in range(1, MAX_ATTEMPTS + 1):
            if attempt > 1:
                self.sleep(BACKOFF_BASE * 2 ** (attempt - 2))
            try:
                with self._slots:
                    response = self._http.post(url, content=body, headers=headers)
            except httpx.TransportError as exc:
                last = f"transport error: {exc}"
                self.transcript.add(role, attempt, payload, None, None)
                log.warning("%s attempt %d failed: %s", role.value, attempt, exc)
                continue
            self.transcript.add(role, attempt, payload, response.status_code, response.text)
            if response.status_code in (401, 403):
                raise RemoteAuthError(role, f"endpoint refused credentials (HTTP {response.status_code})")
            if response.status_code in _RETRY_STATUS:
                last = f"HTTP {response.status_code}"
                continue
            if response.status_code >= 400:
                raise RemoteTransportError(role, f"HTTP {response.status_code}")
            return extract_block(role, _content(role, response))
        raise RemoteTransportError(role, f"gave up after {MAX_ATTEMPTS} attempts ({last})")

    def close(self) -> None:
        self._http.close()


def _content(role: Role, response: httpx.Response) -> str:
    try:
        content = response.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise RemoteParseError(role, "response is not a chat completion") from exc
    if not isinstance(content, str):
        raise RemoteParseError(role, "message content is not text")
    return content


def _require(role: Role, data: dict, key: str, kind) -> Any:
    value = data.get(key)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise RemoteParseError(role, f"field {key!r} missing or not {getattr(kind, '__name__', kind)}")
    return value


def _strings(role: Role, values: Any, key: str) -> tuple[str, ...]:
    if not isinstance(values, list) or not all(isinstance(v, str) for v in values):
        raise RemoteParseError(role, f"field {key!r} must be a list of strings")
    return tuple(values)


def _heuristic_view(heuristics: Sequence) -> list[dict]:
    return [
        {"pattern_id": h.pattern_id, "description": h.description, "strategy": h.strategy, "confidence": h.confidence}
        for h in heuristics
    ]


# -- request contexts; shared with the golden-file tests --------------------


def planner_context(obs: Observation, goal: GoalSpec, context: PlannerContext, n: int, max_len: int) -> dict:
    reflection = context.recent_reflection
    return {
        "observation": obs.to_dict(),
        "goal": goal.public_dict(),
        "step": context.step,
        "n": n,
        "max_len": max_len,
        "reflection": reflection.to_dict() if reflection is not None else None,
        "principles": [{"kind": p.kind.value, "text": p.text} for p in context.retrieved_principles],
        "heuristics": _heuristic_view(context.active_heuristics),
    }


def world_model_context(current: Observation, subtasks: Sequence[SubtaskUnit], h: int) -> dict:
    return {"observation": current.to_dict(), "subtasks": [u.to_dict() for u in subtasks], "h": h}


def evaluator_context(rollout: Rollout, goal: GoalSpec) -> dict:
    return {"goal": goal.public_dict(), "rollout": [o.to_dict() for o in rollout.predicted_observations]}


def srm_context(window: Sequence[SubtaskNode], goal: GoalSpec, heuristics: Sequence) -> dict:
    return {"goal": goal.public_dict(), "window": [n.to_dict() for n in window], "heuristics": _heuristic_view(heuristics)}


def principle_context(tau: Sequence[SubtaskNode], outcome: Outcome, goal: GoalSpec) -> dict:
    return {"goal": goal.public_dict(), "outcome": outcome.value, "trajectory": [n.to_dict() for n in tau]}


def extractor_context(graph: MemoryGraph) -> dict:
    return {
        "episode_id": graph.episode_id,
        "goal": graph.root.goal.public_dict(),
        "outcome": graph.outcome.value,
        "total_steps": graph.root.total_steps,
        "subtasks": [n.to_dict() for n in graph.subtasks()],
    }


def merger_context(members: Sequence[Heuristic]) -> dict:
    return {"heuristics": [h.to_dict() for h in members]}


# -- role adapters ----------------------------------------------------------


@dataclass
class RemotePlanner:
    client: RemoteClient

    def propose(self, obs: Observation, goal: GoalSpec, context: PlannerContext, n: int, max_len: int) -> list[CandidatePlan]:
        role = Role.PLANNER
        data = self.client.call(role, planner_context(obs, goal, context, n, max_len), n=n, max_len=max_len)
        raw = _require(role, data, "plans", list)
        if len(raw) != n:
            raise RemoteParseError(role, f"expected {n} plans, got {len(raw)}")
        plans = []
        for i, item in enumerate(raw):
            if not isinstance(item, dict):
                raise RemoteParseError(role, f"plan {i} is not an object")
            tokens = _strings(role, item.get("actions"), "actions")
            reasoning = _strings(role, item.get("reasoning"), "reasoning")
            if not tokens or len(tokens) > max_len:
                raise RemoteParseError(role, f"plan {i} has {len(tokens)} actions, allowed 1..{max_len}")
            if not reasoning:
                raise RemoteParseError(role, f"plan {i} has no reasoning")
            try:
                actions = tuple(Action.decode(t) for t in tokens)
            except ValueError as exc:
                raise RemoteParseError(role, f"plan {i}: {exc}") from exc
            plans.append(CandidatePlan(actions, reasoning, i))
        return plans


@dataclass
class RemoteWorldModel:
    client: RemoteClient

    def imagine(self, current: Observation, subtasks: Sequence[SubtaskUnit], h: int, plan_index: int = 0) -> Rollout:
        role = Role.WORLD_MODEL
        data = self.client.call(role, world_model_context(current, subtasks, h), h=h)
        raw = _require(role, data, "observations", list)
        if not raw:
            raise RemoteParseError(role, "rollout is empty")
        try:
            observations = tuple(Observation.from_dict(o) for o in raw)
        except (KeyError, TypeError, ValueError) as exc:
            raise RemoteParseError(role, f"malformed observation: {exc}") from exc
        return Rollout(observations, plan_index)


@dataclass
class RemoteEvaluator:
    client: RemoteClient

    def score(self, rollout: Rollout, goal: GoalSpec, context: PlannerContext | None = None) -> float:
        role = Role.EVALUATOR
        data = self.client.call(role, evaluator_context(rollout, goal))
        rating = _require(role, data, "rating", (int, float))
        if not 0.0 <= rating <= RATING_MAX:
            raise RemoteParseError(role, f"rating {rating} outside 0..{RATING_MAX:g}")
        return float(rating)


@dataclass
class RemoteSrmAnalyzer:
    client: RemoteClient

    def analyze(self, window: Sequence[SubtaskNode], goal: GoalSpec, heuristics: Sequence = ()) -> ReflectionSummary:
        role = Role.SRM_ANALYZER
        if not window:
            raise ValueError("empty reflection window")
        data = self.client.call(role, srm_context(window, goal, heuristics))
        try:
            progress = Progress(_require(role, data, "progress_assessment", str))
        except ValueError as exc:
            raise RemoteParseError(role, f"unknown progress value: {exc}") from exc
        return ReflectionSummary(
            progress_assessment=progress,
            failure_patterns=_strings(role, data.get("failure_patterns", []), "failure_patterns"),
            subgoal_context=str(data.get("subgoal_context", "")),
            recommendations=_strings(role, data.get("recommendations", []), "recommendations"),
            window_span=window_span(window),
        )


@dataclass
class RemotePrincipleAnalyzer:
    client: RemoteClient

    def principle(self, tau: Sequence[SubtaskNode], outcome: Outcome, goal: GoalSpec) -> str:
        role = Role.PRINCIPLE_ANALYZER
        data = self.client.call(role, principle_context(tau, outcome, goal), outcome=outcome.value)
        text = _require(role, data, "principle", str).strip()
        if not text:
            raise RemoteParseError(role, "principle text is empty")
        return text


@dataclass
class RemoteHeuristicExtractor:
    client: RemoteClient

    def extract(self, graph: MemoryGraph) -> list[Heuristic]:
        role = Role.HEURISTIC_EXTRACTOR
        data = self.client.call(role, extractor_context(graph))
        out = []
        for i, item in enumerate(_require(role, data, "heuristics", list)):
            try:
                out.append(Heuristic.from_dict({**item, "source_episode": graph.episode_id}))
            except (KeyError, TypeError, ValueError) as exc:
                raise RemoteParseError(role, f"heuristic {i} is malformed: {exc}") from exc
        return out


@dataclass
class RemoteHeuristicMerger:
    client: RemoteClient

    def merge(self, members: Sequence[Heuristic]) -> tuple[str, str]:
        role = Role.HEURISTIC_MERGER
        if not members:
            raise ValueError("nothing to merge")
        data = self.client.call(
            role, merger_context(members), count=len(members), pattern_id=members[0].pattern_id
        )
        return _require(role, data, "description", str), _require(role, data, "strategy", str)


@dataclass
class RemoteFamily:
    """Per-episode remote backends; each episode gets its own transcript."""

    profile: BackendProfile
    transport: httpx.BaseTransport | None = None
    sleep: Callable[[float], None] = time.sleep
    transcript_dir: Path | None = None

    def client(self, episode_id: str = "") -> RemoteClient:
        path = None
        if self.transcript_dir is not None and episode_id:
            path = Path(self.transcript_dir) / f"{episode_id}.jsonl"
        return RemoteClient(self.profile, self.transport, self.sleep, Transcript(path))

    def for_episode(self, grid: GridMap, episode_id: str) -> BackendSet:
        # the map stays on the simulator side; only observations go out
        client = self.client(episode_id)
        return BackendSet(
            planner=RemotePlanner(client),
            world_model=RemoteWorldModel(client),
            evaluator=RemoteEvaluator(client),
            srm_analyzer=RemoteSrmAnalyzer(client),
            principle_analyzer=RemotePrincipleAnalyzer(client),
            heuristic_extractor=RemoteHeuristicExtractor(client),
            heuristic_merger=RemoteHeuristicMerger(client),
        )

    def merger(self) -> RemoteHeuristicMerger:
        return RemoteHeuristicMerger(self.client())
