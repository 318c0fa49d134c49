import itertools
import math

import pytest

from routemap.actions import DEFAULT_THETA, Action, compose, inverse
from routemap.canonical import CanonicalPath, validate
from routemap.envsim import (
    DatasetError,
    GeoEnvironment,
    InvalidEnvironment,
    PathDataset,
    all_triples,
    generate_environment,
    ground_truth_action,
    sample_dataset,
    score_walk,
    toy_environment,
    turn_angle,
)
from routemap.router import hop_distances
from routemap.topomap import MissingEdgeError, TopoMap

F, L, R, T = Action.FORWARD, Action.LEFT, Action.RIGHT, Action.AROUND


def small_env(points):
    names = list(points)
    return GeoEnvironment(points, [(names[1], n) for n in names if n != names[1]], names[:2])


def test_hand_computed_turns():
    env = small_env({"p": (0, -1), "o": (0, 0), "w": (-1, 0), "e": (1, 0), "n": (0, 1)})
    # heading +y; west is +90 degrees (atan2(1, 0)), east is -90
    assert turn_angle(env, "p", "o", "w") == pytest.approx(math.atan2(1, 0))
    assert ground_truth_action(env, "p", "o", "w") is L
    assert ground_truth_action(env, "p", "o", "e") is R
    assert ground_truth_action(env, "p", "o", "n") is F
    assert ground_truth_action(env, "p", "o", "p") is T
    assert ground_truth_action(env, "w", "o", "e") is F


def test_missing_edge():
    with pytest.raises(MissingEdgeError):
        ground_truth_action(toy_environment(), "n1", "n2", "n5")


def test_toy_geometry_matches_worked_example(toy_env):
    assert ground_truth_action(toy_env, "n1", "n2", "n3") is R
    assert ground_truth_action(toy_env, "n1", "n2", "n4") is F
    assert ground_truth_action(toy_env, "n2", "n4", "n5") is L
    assert ground_truth_action(toy_env, "n5", "n4", "n2") is R
    assert ground_truth_action(toy_env, "n4", "n2", "n3") is L


@pytest.mark.parametrize(
    "kwargs",
    [
        {"nodes": {"a": (0, 0), "b": (0, 0)}, "edges": [("a", "b")], "designated": ["a"]},
        {"nodes": {"a": (0, 0), "b": (1, 0), "c": (2, 0)}, "edges": [("a", "b")], "designated": ["a"]},
        {"nodes": {"a": (0, 0), "b": (1, 0)}, "edges": [("a", "b")], "designated": ["z"]},
        {"nodes": {"a": (0, 0), "b": (math.inf, 0)}, "edges": [("a", "b")], "designated": ["a"]},
        {"nodes": {"a": (0, 0), "A": (1, 0)}, "edges": [("a", "A")], "designated": ["a"]},
    ],
)
def test_invalid_environments(kwargs):
    with pytest.raises(InvalidEnvironment):
        GeoEnvironment(**kwargs)


def test_generation_deterministic_and_valid():
    a, b = generate_environment(1, 12, 5), generate_environment(1, 12, 5)
    assert a == b and a.to_json() == b.to_json()
    assert len(a.nodes) == 12 and len(a.designated) == 5
    assert generate_environment(2, 12) != a


@pytest.mark.parametrize("bad", [dict(node_count=4, designated_count=5), dict(node_count=5, designated_count=1)])
def test_generation_rejects_infeasible(bad):
    with pytest.raises(InvalidEnvironment):
        generate_environment(0, **bad)


@pytest.mark.parametrize("seed", range(20))
def test_generated_environments_keep_off_boundaries(seed):
    env = generate_environment(seed, 15)
    assert len(hop_distances(env.adjacency(), "n1")) == 15
    bounds = (DEFAULT_THETA, math.pi - DEFAULT_THETA)
    for t in all_triples(env):
        angle = abs(turn_angle(env, *t))
        assert all(abs(angle - b) > 1e-6 for b in bounds)


@pytest.mark.parametrize("seed", range(10))
def test_geometric_reversal_and_pivot_composition(seed):
    env = generate_environment(seed, 12)
    adj = env.adjacency()
    for at, nbrs in adj.items():
        for j, k in itertools.product(nbrs, repeat=2):
            direct = ground_truth_action(env, j, at, k)
            assert direct is inverse(ground_truth_action(env, k, at, j))
            for m in nbrs:
                via = compose(compose(ground_truth_action(env, j, at, m), T), ground_truth_action(env, m, at, k))
                assert via is direct


def test_environment_file_round_trip(tmp_path):
    env = generate_environment(3, 10)
    again = GeoEnvironment.from_dict(env.to_dict())
    assert again == env
    data = env.to_dict()
    assert set(data) >= {"nodes", "edges", "designated"}
    with pytest.raises(InvalidEnvironment):
        GeoEnvironment.from_dict({"nodes": {}})


def test_toy_dataset(toy_env):
    dataset = sample_dataset(toy_env, 0)
    texts = {item.instruction for item in dataset.items}
    assert any(item.path == CanonicalPath(["n1", "n2", "n3"], ["R"]) for item in dataset.items)
    assert "Depart from n1 to n2. Then, turn right and proceed to n3." in texts
    assert sample_dataset(toy_env, 0) == dataset


@pytest.mark.parametrize("seed", range(5))
def test_dataset_contract(seed):
    env = generate_environment(seed, 12)
    dataset = sample_dataset(env, seed)
    assert len(dataset.items) == 10
    assert len({(i.start, i.goal) for i in dataset.items}) == 10
    adj = env.adjacency()
    for item in dataset.items:
        assert validate(item.path) == []
        assert {item.start, item.goal} <= set(env.designated)
        assert len(item.path.waypoints) - 1 == hop_distances(adj, item.start)[item.goal]
        assert score_walk(env, item.path, item.start, item.goal).shortest
    TopoMap.from_paths(i.path for i in dataset.items)  # conflict-free
    assert PathDataset.from_dict(dataset.to_dict()) == dataset


def test_sparse_environment_rejected():
    # a single path has no other paths to be rebuilt from
    env = GeoEnvironment({"a": (0, 0), "b": (1, 0), "c": (2, 0)}, [("a", "b"), ("b", "c")], ["a", "c"])
    with pytest.raises(DatasetError):
        sample_dataset(env, 0, size=1, max_draws=5)
    with pytest.raises(DatasetError):
        sample_dataset(env, 0, size=3)


def test_score_walk(toy_env):
    good = CanonicalPath(["n5", "n4", "n2", "n3"], ["R", "L"])
    assert score_walk(toy_env, good, "n5", "n3").shortest
    wrong_turn = CanonicalPath(["n5", "n4", "n2", "n3"], ["R", "R"])
    assert not score_walk(toy_env, wrong_turn, "n5", "n3").reachable
    detour = CanonicalPath(["n1", "n2", "n4", "n2", "n3"], ["F", "T", "L"])
    s = score_walk(toy_env, detour, "n1", "n3")
    assert s.reachable and not s.shortest
    assert not score_walk(toy_env, CanonicalPath(["n1", "n3"], []), "n1", "n3").reachable
    assert not score_walk(toy_env, good, "n5", "n1").reachable
