import networkx as nx
import numpy as np
import pytest

from src.planning.constraint_sets import ConstraintSets
from src.planning.environment import Environment, RectangleObstacle, build_roadmap
from src.planning.search import time_expanded_search
from src.utils.errors import FailureReason, PlanningFailure


def constraint_sets(start, goal, valid):
    valid = tuple(frozenset(v) for v in valid)
    return ConstraintSets(
        robot=3,
        start=start,
        goal=goal,
        is_anchor=False,
        reachable=valid,
        valid=valid,
        candidate_sizes=tuple(len(v) for v in valid),
    )


def roadmap_from_points(points, radius):
    env = Environment(bounds=RectangleObstacle((-5.0, -5.0), (30.0, 30.0)))
    return build_roadmap(env, n_samples=0, connection_radius=radius, extra_nodes=points)


def assert_feasible(path, sets, roadmap):
    for t, node in enumerate(path):
        assert node in sets.valid_at(t)
    for u, v in zip(path[:-1], path[1:]):
        assert u == v or roadmap.graph.has_edge(u, v)


def test_unconstrained_search_is_shortest_path():
    env = Environment(bounds=RectangleObstacle((0.0, 0.0), (10.0, 10.0)))
    roadmap = build_roadmap(env, n_samples=150, connection_radius=2.0)
    everything = set(range(roadmap.n_nodes))
    rng = np.random.default_rng(0)
    component = max(nx.connected_components(roadmap.graph), key=len)
    for _ in range(10):
        start, goal = (int(n) for n in rng.choice(sorted(component), size=2, replace=False))
        horizon = nx.eccentricity(roadmap.graph.subgraph(component), start) + 1
        sets = constraint_sets(start, goal, [{start}] + [everything] * horizon)
        path = time_expanded_search(sets, roadmap)
        expected = nx.dijkstra_path_length(roadmap.graph, start, goal, weight="length")
        assert roadmap.path_length(path) == pytest.approx(expected, abs=1e-9)
        assert path[0] == start and path[-1] == goal


def test_waits_until_the_corridor_opens():
    roadmap = roadmap_from_points([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)], 1.01)
    sets = constraint_sets(0, 3, [{0}] * 5 + [{0, 1, 2, 3}])
    path = time_expanded_search(sets, roadmap)
    assert path[:5] == [0] * 5
    assert path[-1] == 3
    assert roadmap.path_length(path) == pytest.approx(3.0)
    assert_feasible(path, sets, roadmap)


def test_early_arrival_must_stay_valid():
    roadmap = roadmap_from_points([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 1.01)
    # the goal (node 1) is forbidden at t = 2
    sets = constraint_sets(0, 1, [{0}, {0, 1, 2}, {0, 2}, {0, 1, 2}])
    assert time_expanded_search(sets, roadmap) == [0, 0, 0, 1]


def test_equal_cost_paths_break_ties_lexicographically():
    # diamond: 0 -> {1, 2} -> 3 with equal lengths
    roadmap = roadmap_from_points([(0.0, 0.0), (1.0, 1.0), (1.0, -1.0), (2.0, 0.0)], 1.5)
    sets = constraint_sets(0, 3, [{0}, {0, 1, 2, 3}, {0, 1, 2, 3}])
    assert time_expanded_search(sets, roadmap) == [0, 1, 3]


def test_tie_is_decided_by_the_first_differing_node():
    # 0 -> 1 -> 4 -> 5 and 0 -> 2 -> 3 -> 5 have the same length
    points = [(0.0, 0.0), (1.0, 1.0), (1.0, -1.0), (2.0, -1.0), (2.0, 1.0), (3.0, 0.0)]
    roadmap = roadmap_from_points(points, 1.5)
    everything = set(range(6))
    sets = constraint_sets(0, 5, [{0}] + [everything] * 4)
    assert time_expanded_search(sets, roadmap) == [0, 1, 4, 5]


def test_equal_cost_timings_move_as_early_as_possible():
    roadmap = roadmap_from_points([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 1.01)
    sets = constraint_sets(0, 2, [{0}] + [{0, 1, 2}] * 5)
    assert time_expanded_search(sets, roadmap) == [0, 1, 2]


def test_trailing_goal_waits_are_trimmed():
    roadmap = roadmap_from_points([(0.0, 0.0), (1.0, 0.0)], 1.01)
    sets = constraint_sets(0, 1, [{0}] + [{0, 1}] * 6)
    assert time_expanded_search(sets, roadmap) == [0, 1]


def test_goal_outside_final_set():
    roadmap = roadmap_from_points([(0.0, 0.0), (1.0, 0.0)], 1.01)
    with pytest.raises(ValueError):
        time_expanded_search(constraint_sets(0, 1, [{0}, {0}]), roadmap)


def test_unreachable_goal():
    # the goal is valid at the horizon but no roadmap edge leads to it
    roadmap = roadmap_from_points([(0.0, 0.0), (5.0, 0.0)], 1.0)
    with pytest.raises(PlanningFailure) as excinfo:
        time_expanded_search(constraint_sets(0, 1, [{0}, {0, 1}]), roadmap)
    assert excinfo.value.reason == FailureReason.NO_PATH
