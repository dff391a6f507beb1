import math
import random
from collections import deque

import pytest
from hypothesis import given, strategies as st

from cortexnav.backends import oracle_backends
from cortexnav.belief import BeliefState
from cortexnav.config import CortexConfig
from cortexnav.gridworld import (
    FORWARD,
    Action,
    GridEnv,
    Pose,
    TaskKind,
    generate_map,
    observe,
    sample_episode,
    step,
)
from cortexnav.harness.episode import run_episode
from cortexnav.planning import (
    BackendFailure,
    CandidatePlan,
    LoopStatus,
    PlannerContext,
    PlanningError,
    Rollout,
    ScoredPlan,
    SubtaskUnit,
    distribute_subtasks,
    imagine,
    select,
    step_loop,
    verify,
)
from cortexnav.memory_graph import create_episode

from conftest import ignav_goal, open_map


def plan(n_actions, n_reasons, index=0):
    acts = tuple(Action.decode("F") for _ in range(n_actions))
    return CandidatePlan(acts, tuple(f"r{i}" for i in range(n_reasons)), index)


@pytest.mark.parametrize(
    "n_actions,n_reasons,sizes",
    [(4, 2, [2, 2]), (5, 2, [3, 2]), (7, 3, [3, 2, 2]), (1, 3, [1]), (3, 5, [1, 1, 1]), (6, 1, [6])],
)
def test_distribute_subtasks_cases(n_actions, n_reasons, sizes):
    units = distribute_subtasks(plan(n_actions, n_reasons))
    assert [len(u.actions) for u in units] == sizes
    assert [u.rationale for u in units] == [f"r{i}" for i in range(len(sizes))]


def test_distribute_requires_reasoning():
    with pytest.raises(PlanningError):
        distribute_subtasks(plan(3, 0))
    with pytest.raises(PlanningError):
        CandidatePlan((), ("x",), 0)


@given(st.lists(st.sampled_from("FLR"), min_size=1, max_size=30), st.integers(1, 10))
def test_distribute_partitions_actions(tokens, n_reasons):
    p = CandidatePlan(tuple(Action.decode(t) for t in tokens), tuple(map(str, range(n_reasons))), 0)
    units = distribute_subtasks(p)
    assert tuple(a for u in units for a in u.actions) == p.actions
    sizes = [len(u.actions) for u in units]
    assert min(sizes) >= 1 and max(sizes) - min(sizes) <= 1
    assert sizes == sorted(sizes, reverse=True)


def scored(score, index):
    p = plan(1, 1, index)
    return ScoredPlan(p, (), Rollout((), index), score)


def test_select_tie_goes_to_lowest_index():
    assert select([scored(1.0, 2), scored(3.0, 1), scored(3.0, 0)]).plan.index == 0
    assert select([scored(-1.0, 0), scored(0.5, 1)]).plan.index == 1


@pytest.mark.parametrize("bad", [math.nan, math.inf])
def test_select_rejects_non_finite(bad):
    with pytest.raises(PlanningError):
        select([scored(1.0, 0), scored(bad, 1)])
    with pytest.raises(PlanningError):
        select([])


class ConstEvaluator:
    def __init__(self, value):
        self.value = value

    def score(self, rollout, goal, context):
        return self.value


def test_verify_wraps_bad_scores():
    roll = Rollout((observe(open_map(), Pose(2, 2, 0)),), 4)
    assert verify(ConstEvaluator(2), roll, ignav_goal((3, 3))) == 2.0
    with pytest.raises(BackendFailure) as info:
        verify(ConstEvaluator(math.nan), roll, ignav_goal((3, 3)))
    assert info.value.plan_index == 4


class LongWorldModel:
    def imagine(self, current, subtasks, h, plan_index=0):
        return Rollout(tuple(current for _ in range(h + 1)), plan_index)


def test_imagine_truncates_to_horizon():
    grid = open_map(8, 8)
    backends = oracle_backends(grid)
    obs = observe(grid, Pose(2, 2, 4))
    units = distribute_subtasks(CandidatePlan(tuple([FORWARD] * 6), ("a", "b"), 0))
    assert len(imagine(backends.world_model, obs, units, 3).predicted_observations) == 3
    assert len(imagine(backends.world_model, obs, units, 10).predicted_observations) == 6
    with pytest.raises(BackendFailure):
        imagine(LongWorldModel(), obs, units, 3)
    with pytest.raises(PlanningError):
        imagine(backends.world_model, obs, units, 0)


@given(st.lists(st.sampled_from("FLR"), min_size=1, max_size=8), st.integers(0, 15))
def test_noise_free_imagination_replays_ground_truth(tokens, heading):
    grid = open_map(7, 7, walls=[(3, 2)])
    backends = oracle_backends(grid, noise=0.0)
    start = Pose(3, 3, heading)
    actions = [Action.decode(t) for t in tokens]
    rollout = imagine(backends.world_model, observe(grid, start), [SubtaskUnit(tuple(actions), "x")], len(actions))
    pose = start
    for t, (action, predicted) in enumerate(zip(actions, rollout.predicted_observations), start=1):
        pose, _ = step(grid, pose, action)
        assert predicted == observe(grid, pose, t)


def test_step_loop_appends_one_decision_step():
    grid = open_map(9, 9)
    goal = ignav_goal((6, 6))
    env = GridEnv(grid, Pose(2, 2, 0), goal)
    graph = create_episode("e", TaskKind.IGNAV, goal)
    ctx = PlannerContext(goal, BeliefState(9, 9))
    result = step_loop(env, oracle_backends(grid), graph, ctx, CortexConfig())
    assert result.status is LoopStatus.CONTINUE
    assert len(result.scored) == CortexConfig().n_candidates
    assert len(graph.trajectory_nodes()) == 1
    assert 1 <= env.steps <= CortexConfig().imagination_horizon


class BrokenPlanner:
    def propose(self, *args):
        raise RuntimeError("boom")


def test_backend_failure_ends_episode_as_error():
    grid = open_map(9, 9)
    goal = ignav_goal((6, 6))
    env = GridEnv(grid, Pose(2, 2, 0), goal)
    backends = oracle_backends(grid)
    backends.planner = BrokenPlanner()
    result = step_loop(env, backends, create_episode("e", TaskKind.IGNAV, goal), PlannerContext(goal, BeliefState(9, 9)), CortexConfig())
    assert result.status is LoopStatus.ERROR and "planner failed" in result.error
    assert env.done and not env.outcome.success


def bfs_moves(grid, a, b):
    dist, queue = {a: 0}, deque([a])
    while queue:
        x, y = queue.popleft()
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                c = (x + dx, y + dy)
                if c not in dist and grid.is_free(c):
                    dist[c] = dist[(x, y)] + 1
                    queue.append(c)
    return dist[b]


@pytest.mark.parametrize("goal_cell", [(3, 3), (1, 3), (3, 1), (2, 3)])
def test_five_by_five_run_is_optimal(goal_cell):
    grid = open_map(5, 5)
    result = run_episode("e", grid, Pose(1, 1, 8), ignav_goal(goal_cell), CortexConfig(), oracle_backends(grid))
    assert result.record.success
    assert result.record.path_length == bfs_moves(grid, (1, 1), goal_cell)
    assert result.record.spl() == 1.0


def test_full_noise_does_worse_than_none():
    rates = {}
    for noise in (0.0, 1.0):
        wins = 0
        for seed in range(8):
            grid = generate_map(seed, 14, 14, 3, 0, 0.08)
            start, goal = sample_episode(grid, TaskKind.IGNAV, random.Random(seed), 8)
            config = CortexConfig(world_model_noise=noise, seed=seed)
            wins += run_episode(f"e{seed}", grid, start, goal, config, oracle_backends(grid, noise, seed, f"e{seed}")).record.success
        rates[noise] = wins
    assert rates[1.0] < rates[0.0]
