import dataclasses
import math

import networkx as nx
import numpy as np
import pytest

from src.localization.fim import IndicatorCounter, LocalizabilityConstraints
from src.localization.network import MeasurementModel
from src.planning.baselines import (
    PotentialFieldGains,
    RRTParams,
    potential_field_baseline,
    prioritized_astar_baseline,
    prioritized_rrt_baseline,
    resample_polyline,
)
from src.planning.environment import Environment, RectangleObstacle, build_roadmap
from src.planning.lcgp import (
    check_start_configuration,
    lcgp_plan,
    reorder_and_retry,
    sweep_localizability,
)
from src.planning.trajectory import PlanningOrder
from src.utils.errors import FailureReason, ScenarioError
from tests.conftest import TRIVIAL, make_scenario, translated_formation

WALL = RectangleObstacle((8.0, 0.0), (9.0, 10.0))


def assert_continuous(plan, roadmap):
    for path in plan.node_paths:
        for u, v in zip(path[:-1], path[1:]):
            assert u == v or roadmap.graph.has_edge(u, v)


def assert_endpoints(plan, scenario):
    np.testing.assert_allclose(plan.positions[:, 0], scenario.starts)
    np.testing.assert_allclose(plan.positions[:, -1], scenario.goals)


class TestLcgp:
    def test_plan_satisfies_the_constraints_at_every_timestep(self, formation_scenario):
        roadmap = formation_scenario.build_roadmap()
        counter = IndicatorCounter()
        plan = reorder_and_retry(
            formation_scenario,
            roadmap,
            formation_scenario.constraints,
            max_orderings=3,
            seed=0,
            counter=counter,
        )

        assert plan.success
        assert plan.orderings_tried == 1
        assert_endpoints(plan, formation_scenario)
        assert_continuous(plan, roadmap)
        sweep = sweep_localizability(
            plan.positions,
            formation_scenario.n_anchor,
            formation_scenario.model,
            formation_scenario.constraints,
        )
        assert sweep.all_satisfied
        assert sweep.violations() == []
        assert all(report.e_opt >= 0.05 for report in sweep.reports)
        assert counter.calls > 0
        assert counter.disconnected_calls == 0

    def test_no_shorter_than_independent_shortest_paths(self, formation_scenario):
        roadmap = formation_scenario.build_roadmap()
        lcgp = reorder_and_retry(
            formation_scenario, roadmap, formation_scenario.constraints, 1, seed=0
        )
        astar = prioritized_astar_baseline(formation_scenario, roadmap)
        assert astar.success and lcgp.success
        assert np.all(astar.travelled_distances() <= lcgp.travelled_distances() + 1e-9)

    def test_set_sizes_are_recorded_per_robot(self, formation_scenario):
        roadmap = formation_scenario.build_roadmap()
        order = PlanningOrder.identity(3, 4)
        plan = lcgp_plan(formation_scenario, roadmap, formation_scenario.constraints, order)
        assert plan.order == (0, 1, 2, 3)
        assert set(plan.metadata["set_sizes"]) == {"0", "1", "2", "3"}
        sizes = plan.metadata["set_sizes"]["3"]
        assert len(sizes["valid"]) == len(sizes["reachable"])
        assert all(v <= r for v, r in zip(sizes["valid"], sizes["reachable"]))

    def test_invalid_start_configuration(self):
        starts, goals = translated_formation()
        scenario = make_scenario(starts, goals, constraints=LocalizabilityConstraints(beta=10.0))
        with pytest.raises(ScenarioError):
            check_start_configuration(scenario, scenario.constraints)
        with pytest.raises(ScenarioError):
            lcgp_plan(
                scenario,
                scenario.build_roadmap(),
                scenario.constraints,
                PlanningOrder.identity(3, 4),
            )

    def test_reshuffle_recovers_a_relay_order(self):
        # robot 1 ends 11 from the anchor and is only in range of robot 2's goal
        scenario = make_scenario(
            [(2.0, 5.0), (3.0, 5.0), (3.0, 6.5)],
            [(2.0, 5.0), (13.0, 5.0), (7.5, 6.5)],
            n_anchor=1,
        )
        roadmap = scenario.build_roadmap()
        identity = lcgp_plan(scenario, roadmap, TRIVIAL, PlanningOrder.identity(1, 3))
        assert identity.failure_reason == FailureReason.STEADY_STATE

        plan = reorder_and_retry(scenario, roadmap, TRIVIAL, max_orderings=20, seed=0)
        assert plan.success
        assert plan.orderings_tried > 1
        assert plan.order == (0, 2, 1)
        assert_endpoints(plan, scenario)
        assert_continuous(plan, roadmap)
        sweep = sweep_localizability(plan.positions, 1, scenario.model, TRIVIAL)
        assert sweep.all_satisfied
        rho = scenario.model.sensing_radius
        for t in range(plan.positions.shape[1]):
            relay = plan.positions[2, t]
            assert np.linalg.norm(relay - plan.positions[0, t]) <= rho
            assert min(
                np.linalg.norm(plan.positions[1, t] - plan.positions[r, t]) for r in (0, 2)
            ) <= rho

    def test_unreachable_goals_exhaust_the_orderings(self):
        scenario = make_scenario(
            [(2.0, 5.0), (3.0, 5.5), (3.0, 4.5)],
            [(15.0, 5.0), (16.0, 5.5), (16.0, 4.5)],
            n_anchor=1,
            obstacles=[WALL],
        )
        roadmap = scenario.build_roadmap()
        plan = reorder_and_retry(scenario, roadmap, TRIVIAL, max_orderings=2, seed=4)
        assert not plan.success
        assert plan.failure_reason == FailureReason.ORDERINGS_EXHAUSTED
        assert plan.orderings_tried == 2
        assert plan.metadata["attempt_reasons"] == ["steady_state", "steady_state"]

        single = reorder_and_retry(scenario, roadmap, TRIVIAL, max_orderings=1, seed=4)
        assert single.failure_reason == FailureReason.STEADY_STATE

    def test_orderings_must_be_positive(self, formation_scenario):
        with pytest.raises(ValueError):
            reorder_and_retry(
                formation_scenario,
                formation_scenario.build_roadmap(),
                TRIVIAL,
                max_orderings=0,
                seed=0,
            )

    def test_trivial_constraints_match_shortest_path_cost(self):
        env = Environment(bounds=RectangleObstacle((0.0, 0.0), (10.0, 10.0)))
        model = MeasurementModel(gamma=1, sigma=1.0, sensing_radius=1000.0)
        rng = np.random.default_rng(42)
        for k in range(20):
            skip = 37 * k
            base = build_roadmap(env, n_samples=150, connection_radius=2.0, skip=skip)
            component = sorted(max(nx.connected_components(base.graph), key=len))
            picks = rng.choice(component, size=8, replace=False)
            points = [tuple(base.nodes[p]) for p in picks]
            scenario = make_scenario(
                points[:4],
                points[4:],
                bounds=((0.0, 0.0), (10.0, 10.0)),
                model=model,
                n_samples=150,
                skip=skip,
            )
            roadmap = scenario.build_roadmap()
            lcgp = reorder_and_retry(scenario, roadmap, TRIVIAL, max_orderings=1, seed=0)
            astar = prioritized_astar_baseline(scenario, roadmap)

            assert lcgp.success and astar.success
            assert roadmap.path_length(lcgp.node_paths[3]) == pytest.approx(
                roadmap.path_length(astar.node_paths[3]), abs=1e-9
            )


class TestAstarBaseline:
    def test_paths_are_shortest_and_parked(self, formation_scenario):
        roadmap = formation_scenario.build_roadmap()
        plan = prioritized_astar_baseline(formation_scenario, roadmap)
        assert plan.success
        assert_endpoints(plan, formation_scenario)
        assert_continuous(plan, roadmap)
        for robot, path in enumerate(plan.node_paths):
            expected = nx.dijkstra_path_length(
                roadmap.graph, path[0], path[-1], weight="length"
            )
            assert plan.travelled_distances()[robot] == pytest.approx(expected)

    def test_wall_blocks_every_path(self):
        scenario = make_scenario(
            [(2.0, 5.0), (3.0, 5.0)], [(15.0, 5.0), (16.0, 5.0)], n_anchor=1, obstacles=[WALL]
        )
        plan = prioritized_astar_baseline(scenario, scenario.build_roadmap())
        assert not plan.success
        assert plan.failure_reason == FailureReason.NO_PATH
        assert plan.metadata["failed_robot"] == 0


class TestRrtBaseline:
    @pytest.fixture
    def scenario(self):
        starts, goals = translated_formation()
        return make_scenario(
            starts, goals, obstacles=[RectangleObstacle((8.0, 3.5), (9.0, 6.5))]
        )

    def test_same_seed_same_plan(self, scenario):
        first = prioritized_rrt_baseline(scenario, seed=3)
        second = prioritized_rrt_baseline(scenario, seed=3)
        assert first.success
        np.testing.assert_array_equal(first.positions, second.positions)

    def test_plan_is_collision_free_and_stepwise(self, scenario):
        plan = prioritized_rrt_baseline(scenario, seed=8)
        assert plan.success
        assert_endpoints(plan, scenario)
        steps = np.linalg.norm(np.diff(plan.positions, axis=1), axis=-1)
        assert steps.max() <= 1.0 + 1e-9
        for robot in range(scenario.n_robots):
            for p, q in zip(plan.positions[robot, :-1], plan.positions[robot, 1:]):
                assert scenario.environment.segment_is_free(p, q)
            straight = math.dist(scenario.starts[robot], scenario.goals[robot])
            assert plan.travelled_distances()[robot] >= straight - 1e-9

    def test_iteration_cap(self):
        scenario = make_scenario(
            [(2.0, 5.0), (3.0, 5.0)], [(15.0, 5.0), (16.0, 5.0)], n_anchor=1, obstacles=[WALL]
        )
        plan = prioritized_rrt_baseline(scenario, seed=0, params=RRTParams(max_iterations=200))
        assert plan.failure_reason == FailureReason.ITERATION_CAP

    def test_resample_polyline(self):
        points = [np.array([0.0, 0.0]), np.array([2.5, 0.0]), np.array([2.5, 0.0])]
        samples = resample_polyline(points, step=1.0)
        np.testing.assert_allclose(samples[:, 0], [0.0, 2.5 / 3, 5.0 / 3, 2.5])


def triangle_formation(center, radius=1.5):
    """Anchors on an equilateral triangle, the non-anchor at its centroid."""
    cx, cy = center
    anchors = [
        (cx + radius * math.cos(angle), cy + radius * math.sin(angle))
        for angle in (math.pi / 2, 7 * math.pi / 6, 11 * math.pi / 6)
    ]
    return anchors + [(cx, cy)]


class TestPotentialField:
    def test_open_workspace_reaches_the_goals(self):
        # lambda_min is at a symmetric maximum, so the ascent term stays quiet
        scenario = make_scenario(triangle_formation((3.0, 5.0)), triangle_formation((13.0, 5.0)))
        plan = potential_field_baseline(scenario, scenario.model)
        assert plan.success
        assert_endpoints(plan, scenario)
        steps = np.linalg.norm(np.diff(plan.positions, axis=1), axis=-1)
        assert steps.max() <= 1.0 + 1e-9

    def test_e_optimality_ascent_shapes_the_descent(self, formation_scenario):
        capped = PotentialFieldGains(max_iterations=5)
        plain = dataclasses.replace(capped, e_opt_weight=0.0)
        model = formation_scenario.model
        with_ascent = potential_field_baseline(formation_scenario, model, capped)
        without = potential_field_baseline(formation_scenario, model, plain)
        assert not np.allclose(
            with_ascent.metadata["last_configuration"], without.metadata["last_configuration"]
        )

    def test_wall_across_the_route_is_a_local_minimum(self):
        starts, goals = translated_formation()
        scenario = make_scenario(starts, goals, obstacles=[WALL])
        plan = potential_field_baseline(scenario, scenario.model, seed=1)
        assert not plan.success
        assert plan.failure_reason == FailureReason.LOCAL_MINIMUM
        last = np.asarray(plan.metadata["last_configuration"])
        assert np.all(last[:, 0] < WALL.lower[0])
        assert plan.metadata["seed"] == 1

    def test_iteration_cap(self, formation_scenario):
        gains = PotentialFieldGains(max_iterations=5)
        plan = potential_field_baseline(formation_scenario, formation_scenario.model, gains)
        assert plan.failure_reason == FailureReason.ITERATION_CAP
