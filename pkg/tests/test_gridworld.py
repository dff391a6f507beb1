import random

import pytest
from hypothesis import given, strategies as st

from cortexnav.gridworld import (
    FORWARD,
    STOP,
    TURN_LEFT,
    TURN_RIGHT,
    Action,
    EpisodeRecord,
    GoalSpec,
    GridEnv,
    MapError,
    OutcomeError,
    Pose,
    SearchError,
    TaskKind,
    UNREACHABLE,
    answer_score,
    compute_metrics,
    dumps_map,
    evaluate_outcome,
    generate_map,
    geodesic,
    loads_map,
    observe,
    path_to_actions,
    sample_episode,
    step,
)
from cortexnav.gridworld.motion import DIRECTIONS

from conftest import ignav_goal, open_map


# -- independent oracles -----------------------------------------------------


def iddfs_distance(grid, a, b, limit=200):
    """Iterative-deepening depth-first search; shares no code with the BFS."""

    def dls(cell, depth, seen):
        if cell == b:
            return True
        if depth == 0:
            return False
        x, y = cell
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == dy == 0:
                    continue
                nxt = (x + dx, y + dy)
                if 0 <= nxt[0] < grid.width and 0 <= nxt[1] < grid.height and grid.rows[nxt[1]][nxt[0]] == ".":
                    if nxt not in seen:
                        seen.add(nxt)
                        found = dls(nxt, depth - 1, seen)
                        seen.discard(nxt)
                        if found:
                            return True
        return False

    for depth in range(limit):
        if dls(a, depth, {a}):
            return depth
    return UNREACHABLE


def stack_flood(grid, start):
    seen, stack = {start}, [start]
    while stack:
        x, y = stack.pop()
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                c = (x + dx, y + dy)
                if c not in seen and 0 <= c[0] < grid.width and 0 <= c[1] < grid.height and grid.rows[c[1]][c[0]] == ".":
                    seen.add(c)
                    stack.append(c)
    return seen


# -- motion --------------------------------------------------------------------


def test_forward_north_decrements_y(small_map):
    pose, hit = step(small_map, Pose(3, 3, 0), FORWARD)
    assert (pose.x, pose.y, hit) == (3, 2, False)


def test_forward_into_wall_collides(small_map):
    start = Pose(1, 1, 0)
    pose, hit = step(small_map, start, FORWARD)
    assert pose == start and hit


def test_sixteen_left_turns_restore_heading(small_map):
    pose = Pose(3, 3, 5)
    for _ in range(16):
        pose, hit = step(small_map, pose, TURN_LEFT)
        assert not hit
    assert pose == Pose(3, 3, 5)


@pytest.mark.parametrize("heading", range(16))
def test_heading_projection_rounds_toward_lower_direction(small_map, heading):
    pose, _ = step(small_map, Pose(3, 3, heading), FORWARD)
    assert (pose.x - 3, pose.y - 3) == DIRECTIONS[heading // 2]


@given(st.lists(st.sampled_from(["F", "L", "R"]), max_size=40), st.integers(0, 15))
def test_turns_never_move_and_forward_moves_at_most_one(actions, heading):
    grid = open_map(9, 9)
    pose = Pose(4, 4, heading)
    for token in actions:
        new, _ = step(grid, pose, Action.decode(token))
        if token != "F":
            assert new.cell == pose.cell
        assert max(abs(new.x - pose.x), abs(new.y - pose.y)) <= 1
        assert grid.is_free(new.cell)
        pose = new


def test_path_to_actions_follows_path(small_map):
    path = [(1, 1), (2, 2), (3, 2), (3, 3)]
    pose = Pose(1, 1, 0)
    for action in path_to_actions(pose.heading, path):
        pose, hit = step(small_map, pose, action)
        assert not hit
    assert pose.cell == (3, 3)


# -- maps ----------------------------------------------------------------------


def test_generate_map_deterministic_and_connected():
    a = generate_map(7, 16, 16, 3, 4, 0.08)
    b = generate_map(7, 16, 16, 3, 4, 0.08)
    assert a == b
    assert generate_map(7, 12, 12, 1, 0).objects == {}


@pytest.mark.parametrize("seed", range(100))
def test_generated_free_space_matches_flood_fill_oracle(seed):
    grid = generate_map(seed, 12 + seed % 5, 12 + seed % 3, 1 + seed % 3, seed % 4, 0.05 * (seed % 3))
    free = set(grid.free_cells())
    assert stack_flood(grid, next(iter(sorted(free)))) == free
    assert all(grid.rows[0][x] == "#" and grid.rows[-1][x] == "#" for x in range(grid.width))
    assert all(r[0] == "#" and r[-1] == "#" for r in grid.rows)
    assert all(grid.is_free(c) for c in grid.objects)


@pytest.mark.parametrize("args", [(1, 6, 6), (1, 10, 10, 0), (1, 10, 10, 1, 40), (1, 10, 10, 1, 0, 0.6)])
def test_infeasible_map_parameters(args):
    with pytest.raises(MapError):
        generate_map(*args)


def test_map_text_round_trip():
    grid = generate_map(3, 14, 12, 3, 5, 0.05)
    assert loads_map(dumps_map(grid)) == grid
    with pytest.raises(MapError):
        loads_map("not a map")


# -- geodesic --------------------------------------------------------------------


def test_geodesic_basics(small_map):
    assert geodesic(small_map, (2, 2), (2, 2)) == 0
    assert geodesic(small_map, (2, 2), (3, 3)) == 1
    with pytest.raises(SearchError):
        geodesic(small_map, (0, 0), (2, 2))


@pytest.mark.parametrize("seed", range(6))
def test_geodesic_matches_iddfs_oracle(seed):
    grid = generate_map(seed, 10, 10, 2, 0, 0.1)
    rng = random.Random(seed)
    free = grid.free_cells()
    for _ in range(6):
        a, b = rng.choice(free), rng.choice(free)
        assert geodesic(grid, a, b) == iddfs_distance(grid, a, b)


@given(st.integers(0, 50), st.data())
def test_geodesic_is_a_metric(seed, data):
    grid = generate_map(seed, 10, 10, 2, 0, 0.1)
    free = grid.free_cells()
    a, b, c = (data.draw(st.sampled_from(free)) for _ in range(3))
    ab, bc, ac = geodesic(grid, a, b), geodesic(grid, b, c), geodesic(grid, a, c)
    assert ab == geodesic(grid, b, a)
    assert ac <= ab + bc
    assert (ab == 0) == (a == b)


# -- vision ------------------------------------------------------------------------


def test_walls_occlude_cells_behind_them():
    grid = open_map(9, 9, walls=[(4, 3)])
    obs = observe(grid, Pose(4, 5, 0))
    cells = obs.cells
    assert cells[(4, 3)] == "#"
    assert (4, 2) not in cells
    assert (4, 4) in cells
    assert all(c[1] <= 5 for c in cells)


# -- tasks and outcomes ------------------------------------------------------------


def test_stop_within_radius_succeeds():
    grid = open_map(12, 5)
    goal = ignav_goal((9, 2))
    assert evaluate_outcome(goal, STOP, Pose(6, 2, 0), grid).success
    assert not evaluate_outcome(goal, STOP, Pose(3, 2, 0), grid).success
    with pytest.raises(OutcomeError):
        evaluate_outcome(goal, Action.answer("x"), Pose(6, 2, 0), grid)


def test_ar_answer_is_case_insensitive(small_map):
    goal = GoalSpec(TaskKind.AR, 0, goal_cell=(3, 3), target_category="chair")
    assert evaluate_outcome(goal, Action.answer("Chair"), Pose(2, 2, 0), small_map).success
    assert not evaluate_outcome(goal, Action.answer("table"), Pose(2, 2, 0), small_map).success


@pytest.mark.parametrize(
    "answer,score", [("blue chair", 100.0), ("the Blue chair", 100.0), ("red chair", 50.0), ("blue lamp", 50.0), ("red lamp", 0.0)]
)
def test_answer_score_rubric(answer, score):
    assert answer_score(answer, "blue chair") == score


def test_budget_exhaustion_fails(small_map):
    env = GridEnv(small_map, Pose(2, 2, 0), ignav_goal((3, 3)), max_steps=2)
    env.step(TURN_LEFT)
    result = env.step(TURN_RIGHT)
    assert result.done and not env.outcome.success


def test_illegal_terminal_action(small_map):
    env = GridEnv(small_map, Pose(2, 2, 0), ignav_goal((3, 3)))
    with pytest.raises(ValueError):
        env.step(Action.answer("chair"))


@pytest.mark.parametrize("kind", list(TaskKind))
def test_sample_episode_consistent_with_map(kind):
    grid = generate_map(11, 16, 16, 3, 6, 0.05)
    start, goal = sample_episode(grid, kind, random.Random(1), 3)
    assert grid.is_free(start.cell)
    if kind is TaskKind.IGNAV:
        assert geodesic(grid, start.cell, goal.goal_cell) >= 3
    elif kind is TaskKind.AR:
        assert grid.objects[goal.goal_cell].category == goal.target_category
    else:
        obj = grid.objects[goal.goal_cell]
        assert goal.answer == f"{obj.color} {obj.category}"
        assert grid.room_of(goal.goal_cell) == goal.query_room


def test_determinism_of_seed_and_actions():
    grid = generate_map(5, 12, 12, 2, 2, 0.05)
    start, goal = sample_episode(grid, TaskKind.IGNAV, random.Random(5), 2)
    rng = random.Random(0)
    actions = [rng.choice([FORWARD, TURN_LEFT, TURN_RIGHT]) for _ in range(30)]
    finals = []
    for _ in range(2):
        env = GridEnv(grid, start, goal)
        for a in actions:
            env.step(a)
        finals.append((env.pose, env.path_length, env.collisions))
    assert finals[0] == finals[1]


# -- metrics -------------------------------------------------------------------------


def test_metrics_formulae():
    assert compute_metrics([EpisodeRecord("a", True, 4, 4)]).spl == 1.0
    assert compute_metrics([EpisodeRecord("a", False, 4, 4)]).spl == 0.0
    assert compute_metrics([EpisodeRecord("a", True, 4, 8)]).spl == 0.5
    with pytest.raises(ValueError):
        compute_metrics([])


records = st.builds(
    EpisodeRecord,
    episode_id=st.just("e"),
    success=st.booleans(),
    shortest=st.integers(0, 30),
    path_length=st.integers(0, 60),
)


@given(st.lists(records, min_size=1, max_size=30))
def test_spl_bounded_by_sr(recs):
    m = compute_metrics(recs)
    assert 0.0 <= m.spl <= m.sr + 1e-12 <= 1.0 + 1e-12
