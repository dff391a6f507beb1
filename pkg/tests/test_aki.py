import itertools

import pytest
from hypothesis import given, settings, strategies as st

from cortexnav.aki import (
    Heuristic,
    HeuristicLibrary,
    LibraryError,
    MergeError,
    MergedHeuristic,
    cluster,
    extract_heuristics,
    merge_cluster,
    select_guidance,
    update_library,
)
from cortexnav.backends.oracle import OracleHeuristicExtractor, OracleHeuristicMerger, common_template
from cortexnav.memory_graph import Outcome

from conftest import chain_graph, ignav_goal, open_map

MERGER = OracleHeuristicMerger()
PATTERNS = ["OSCILLATION", "COLLISION_STREAK", "DOOR_FIRST"]
DESCRIPTIONS = [
    "agent returned to the same pose {n} times during the episode",
    "agent collided with walls {n} times in a row",
    "agent circled the {n} rooms",
]


def h(pattern="OSCILLATION", n=3, conf=0.75, ok=False, ep="e0", text=0):
    return Heuristic(pattern, DESCRIPTIONS[text].format(n=n), "commit to a new direction", conf, Outcome.SUCCESS if ok else Outcome.FAILURE, ep)


heuristics = st.builds(
    h,
    pattern=st.sampled_from(PATTERNS),
    n=st.integers(2, 6),
    conf=st.sampled_from([0.2, 0.5, 0.75, 0.9, 1.0]),
    ok=st.booleans(),
    ep=st.sampled_from([f"e{i}" for i in range(6)]),
    text=st.integers(0, 2),
)


def test_heuristic_validation():
    with pytest.raises(ValueError):
        h(conf=1.5)
    with pytest.raises(ValueError):
        Heuristic("", "d", "s", 0.5, Outcome.SUCCESS, "e")
    with pytest.raises(ValueError):
        Heuristic("P", "d", "s", 0.5, Outcome.PENDING, "e")
    with pytest.raises(ValueError):
        MergedHeuristic("P", "d", "s", 0.5, 2, (1, 0), ("a", "b"))


def test_merge_cluster_fields():
    members = [h(n=3, conf=0.5, ok=True, ep="b"), h(n=4, conf=1.0, ep="a"), h(n=5, conf=0.75, ep="c")]
    merged = merge_cluster(members, MERGER)
    assert merged.support == 3
    assert merged.outcome_mix == (1, 2)
    assert merged.provenance == ("a", "b", "c")
    assert merged.confidence == pytest.approx(0.75)
    assert merged.description == "Caution: agent returned to the same pose * times during the episode"
    with pytest.raises(MergeError):
        merge_cluster([h(), h(pattern="DOOR_FIRST")], MERGER)
    with pytest.raises(MergeError):
        merge_cluster([], MERGER)


@pytest.mark.parametrize(
    "texts,template",
    [
        (["a b c"], "a b c"),
        (["turn left now", "turn right now"], "turn * now"),
        (["go to door", "go to the door quickly"], "go to * door *"),
        (["x", "y"], "x / y"),
    ],
)
def test_common_template(texts, template):
    assert common_template(texts) == template


def test_cluster_groups_by_pattern_and_text():
    items = [h(n=3), h(n=4), h(pattern="DOOR_FIRST", text=2), h(text=1)]
    groups = cluster(items, 0.6)
    assert [len(g) for g in groups] == [1, 1, 2]
    assert {g[0].pattern_id for g in groups} == {"OSCILLATION", "DOOR_FIRST"}
    with pytest.raises(ValueError):
        cluster(items, 1.5)


@settings(max_examples=60)
@given(st.lists(heuristics, min_size=1, max_size=4))
def test_merge_is_permutation_invariant(members):
    members = [m for m in members if m.pattern_id == members[0].pattern_id]
    reference = merge_cluster(members, MERGER)
    for perm in itertools.permutations(members):
        assert merge_cluster(list(perm), MERGER) == reference


@settings(max_examples=60)
@given(st.lists(heuristics, max_size=10), st.randoms())
def test_cluster_is_order_independent(items, rnd):
    shuffled = list(items)
    rnd.shuffle(shuffled)
    assert cluster(items, 0.85) == cluster(shuffled, 0.85)


@settings(max_examples=80)
@given(st.lists(st.lists(heuristics, max_size=4), max_size=8), st.sampled_from([0.5, 0.85, 1.0]))
def test_incremental_update_matches_rebuild(batches, threshold):
    lib = HeuristicLibrary(similarity_threshold=threshold)
    for batch in batches:
        update_library(lib, batch, threshold, MERGER)
    flat = [x for b in batches for x in b]
    fresh = HeuristicLibrary(list(flat), {}, threshold).rebuild(MERGER)
    assert lib.entries() == fresh.entries()
    assert select_guidance(lib, 0.5, 2) == select_guidance(fresh, 0.5, 2)
    lib.check_recompute(MERGER)


def test_batches_associate():
    a, b, c = [h(n=3, ep="a")], [h(n=4, ep="b")], [h(pattern="DOOR_FIRST", text=2, ep="c")]
    left = HeuristicLibrary()
    for batch in (a + b, c):
        update_library(left, batch, 0.85, MERGER)
    right = HeuristicLibrary()
    for batch in (a, b + c):
        update_library(right, batch, 0.85, MERGER)
    assert left.entries() == right.entries()


def test_select_guidance_filters_sorts_and_caps():
    lib = HeuristicLibrary(merged={
        "A": [MergedHeuristic("A", "d", "s", 0.9, 2, (2, 0), ("x", "y"))],
        "B": [MergedHeuristic("B", "d", "s", 0.95, 1, (1, 0), ("x",))],
        "C": [MergedHeuristic("C", "d", "s", 0.9, 3, (3, 0), ("x", "y", "z"))],
        "D": [MergedHeuristic("D", "d", "s", 0.6, 5, (5, 0), tuple("abcde"))],
    })
    assert [m.pattern_id for m in select_guidance(lib, 0.7, 2)] == ["C", "A"]
    assert [m.pattern_id for m in select_guidance(lib, 0.7, 2, cap=1)] == ["C"]
    assert select_guidance(HeuristicLibrary(), 0.0, 0) == []


def test_library_round_trip_and_tamper_check(tmp_path):
    lib = HeuristicLibrary()
    update_library(lib, [h(n=3, ep="a"), h(n=4, ep="b"), h(pattern="DOOR_FIRST", text=2)], 0.85, MERGER)
    lib.save(tmp_path)
    again = HeuristicLibrary.load(tmp_path)
    assert again.raw == lib.raw and again.entries() == lib.entries()
    again.raw.append(h(n=9, ep="z"))
    with pytest.raises(LibraryError):
        again.check_recompute(MERGER)
    (tmp_path / "raw.jsonl").write_text("{broken\n")
    with pytest.raises(LibraryError):
        HeuristicLibrary.load(tmp_path)


def test_extractor_finds_oscillation_and_direct_approach():
    grid = open_map(10, 10)
    extractor = OracleHeuristicExtractor(grid)
    there, back = [(2, 2, 4), (3, 2, 4)], [(3, 2, 4), (2, 2, 4)]
    failed = chain_graph("f", [there, back, there, back], ignav_goal((8, 8)), Outcome.FAILURE)
    found = extract_heuristics(extractor, failed)
    assert [x.pattern_id for x in found] == ["OSCILLATION"]
    assert found[0].outcome_tag is Outcome.FAILURE
    straight = chain_graph("s", [[(x, 2, 4), (x + 1, 2, 4)] for x in range(2, 6)], ignav_goal((6, 2)), Outcome.SUCCESS)
    found = extract_heuristics(extractor, straight)
    assert [x.pattern_id for x in found] == ["DIRECT_APPROACH"]
    assert found[0].confidence == 1.0
    with pytest.raises(LibraryError):
        extract_heuristics(extractor, chain_graph("o", [there]))
