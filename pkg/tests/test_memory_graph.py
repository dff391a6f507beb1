import pytest
from hypothesis import given, settings, strategies as st

from cortexnav.gridworld import TaskKind
from cortexnav.memory_graph import (
    GraphError,
    GraphFormatError,
    MemoryGraph,
    Outcome,
    SubtaskNode,
    TrajectoryNode,
    create_episode,
    load_graph,
    save_graph,
)

from conftest import chain_graph, ignav_goal, subtask


def walk(n, y=1):
    return [(x, y, 4) for x in range(1, n + 2)]


def build(steps):
    """Graph from a list of (step_delta, n_actions); returns graph and ids."""
    graph = create_episode("ep", TaskKind.IGNAV, ignav_goal((5, 5)))
    step, ids = 0, []
    for delta, n in steps:
        step += delta
        ids.append(graph.append_subtask(step, subtask(walk(n), step=step)))
    return graph, ids


def test_first_subtask_creates_trajectory_node():
    graph, ids = build([(0, 2)])
    assert graph.node_count() == 3
    traj = graph.parent_of(ids[0])
    assert isinstance(graph.nodes[traj], TrajectoryNode)
    assert graph.parent_of(traj) == MemoryGraph.ROOT_ID
    assert graph.temporal_edges == []


def test_same_step_reuses_trajectory_node():
    graph, ids = build([(0, 1), (0, 1), (3, 1)])
    assert graph.parent_of(ids[0]) == graph.parent_of(ids[1]) != graph.parent_of(ids[2])
    assert graph.temporal_edges == [(ids[0], ids[1]), (ids[1], ids[2])]


def test_non_monotonic_step_rejected():
    graph, _ = build([(5, 1)])
    with pytest.raises(GraphError, match="non-monotonic"):
        graph.append_subtask(2, subtask(walk(1)))


def test_closed_graph_rejects_appends_and_refinalize():
    graph, _ = build([(0, 1)])
    graph.finalize(Outcome.SUCCESS)
    assert graph.root.total_steps == 1
    with pytest.raises(GraphError):
        graph.append_subtask(9, subtask(walk(1)))
    with pytest.raises(GraphError):
        graph.finalize(Outcome.FAILURE)


def test_pending_is_not_a_final_outcome():
    graph, _ = build([(0, 1)])
    with pytest.raises(GraphError):
        graph.finalize(Outcome.PENDING)


def test_subtask_shape_checked():
    with pytest.raises(GraphError):
        subtask([(1, 1, 0)], actions=[])
    with pytest.raises(GraphError):
        subtask([(1, 1, 0), (1, 2, 0)], actions=["F", "F"])


def test_collision_flags():
    node = subtask([(1, 1, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)], actions=["F", "L", "F"])
    assert node.collisions() == [True, False, False]


def test_downstream_and_window():
    graph, ids = build([(0, 1)] * 4)
    assert graph.downstream_trajectory(ids[1], 1) == [graph.nodes[ids[1]], graph.nodes[ids[2]]]
    assert len(graph.downstream_trajectory(ids[2], 10)) == 2
    assert graph.recent_window(2) == [graph.nodes[ids[2]], graph.nodes[ids[3]]]
    with pytest.raises(GraphError):
        graph.downstream_trajectory(graph.parent_of(ids[0]), 1)
    with pytest.raises(ValueError):
        graph.recent_window(0)


def test_save_and_load(tmp_path):
    graph = chain_graph("ep-7", [walk(2), walk(3)], outcome=Outcome.FAILURE)
    path = save_graph(graph, tmp_path)
    assert path.name == "ep-7.mem"
    assert load_graph(path) == graph


def test_truncated_stream_reports_byte_offset():
    data = chain_graph("ep", [walk(1), walk(2)], outcome=Outcome.SUCCESS).serialize()
    lines = data.splitlines(keepends=True)
    cut = b"".join(lines[:-1])
    with pytest.raises(GraphFormatError, match=f"byte offset {len(cut)}"):
        MemoryGraph.deserialize(cut)
    with pytest.raises(GraphFormatError, match="truncated record"):
        MemoryGraph.deserialize(data[:-3])


def test_corrupt_record_rejected():
    data = chain_graph("ep", [walk(1)]).serialize().replace(b'"rec": "sub"', b'"rec": "zzz"')
    with pytest.raises(GraphFormatError, match="unknown record kind"):
        MemoryGraph.deserialize(data)


def test_empty_episode_id_rejected():
    with pytest.raises(GraphError):
        create_episode("", TaskKind.IGNAV, ignav_goal((1, 1)))


sequences = st.lists(st.tuples(st.integers(0, 3), st.integers(1, 4)), min_size=1, max_size=25)


@settings(max_examples=300)
@given(sequences, st.sampled_from([None, Outcome.SUCCESS, Outcome.FAILURE]), st.data())
def test_append_invariants(steps, outcome, data):
    graph, ids = build(steps)
    if outcome is not None:
        graph.finalize(outcome)
    graph.validate()
    assert graph.subtask_ids() == ids
    assert len(graph.temporal_edges) == len(ids) - 1
    distinct_steps = len({sum(d for d, _ in steps[: i + 1]) for i in range(len(steps))})
    assert len(graph.trajectory_nodes()) == distinct_steps
    i = data.draw(st.integers(0, len(ids) - 1))
    k = data.draw(st.integers(0, 30))
    expected = [graph.nodes[n] for n in ids[i : i + k + 1]]
    assert graph.downstream_trajectory(ids[i], k) == expected
    assert MemoryGraph.deserialize(graph.serialize()) == graph
    assert all(isinstance(graph.nodes[n], SubtaskNode) for n in ids)
