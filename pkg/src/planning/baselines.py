from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Optional, Sequence

import networkx as nx
import numpy as np

from src.localization.fim import lambda_min_gradient
from src.localization.network import MeasurementModel
from src.planning.environment import Environment, Roadmap
from src.planning.trajectory import TrajectoryPlan, pad_to_horizon
from src.utils.errors import FailureReason, PlanningFailure

if TYPE_CHECKING:
    from src.utils.scenarios import Scenario

logger = logging.getLogger(__name__)


def prioritized_astar_baseline(scenario: Scenario, roadmap: Roadmap) -> TrajectoryPlan:
    """Independent shortest roadmap path per robot, parked at the goal."""
    start_time = time.perf_counter()

    def heuristic(u: int, v: int) -> float:
        return float(np.linalg.norm(roadmap.nodes[u] - roadmap.nodes[v]))

    paths = []
    for robot in range(scenario.n_robots):
        start = roadmap.node_of(scenario.starts[robot])
        goal = roadmap.node_of(scenario.goals[robot])
        try:
            path = nx.astar_path(roadmap.graph, start, goal, heuristic, weight="length")
        except nx.NetworkXNoPath:
            logger.info("A*: no roadmap path for robot %d", robot)
            return TrajectoryPlan.failed(
                "astar",
                FailureReason.NO_PATH,
                planning_time=time.perf_counter() - start_time,
                metadata={"failed_robot": robot},
            )
        paths.append([int(node) for node in path])

    horizon = max(len(path) - 1 for path in paths)
    paths = pad_to_horizon(paths, horizon)
    return TrajectoryPlan(
        planner_name="astar",
        positions=roadmap.nodes[np.asarray(paths, dtype=int)],
        success=True,
        planning_time=time.perf_counter() - start_time,
        node_paths=paths,
        order=tuple(range(scenario.n_robots)),
    )


@dataclass(frozen=True)
class RRTParams:
    step_size: float = 1.0
    goal_bias: float = 0.05
    max_iterations: int = 20000


def _rrt(
    env: Environment,
    start: np.ndarray,
    goal: np.ndarray,
    rng: np.random.Generator,
    params: RRTParams,
) -> list[np.ndarray]:
    lower = np.asarray(env.bounds.lower, dtype=float)
    size = env.size
    nodes = np.empty((params.max_iterations + 2, 2))
    parents = np.full(params.max_iterations + 2, -1, dtype=int)
    nodes[0] = start
    count = 1

    def path_to(index: int) -> list[np.ndarray]:
        path = []
        while index >= 0:
            path.append(nodes[index].copy())
            index = parents[index]
        return path[::-1]

    if np.linalg.norm(goal - start) <= params.step_size and env.segment_is_free(start, goal):
        return [start, goal]

    for _ in range(params.max_iterations):
        if rng.random() < params.goal_bias:
            sample = goal
        else:
            sample = lower + rng.random(2) * size
        nearest = int(np.argmin(np.linalg.norm(nodes[:count] - sample, axis=1)))
        direction = sample - nodes[nearest]
        distance = float(np.linalg.norm(direction))
        if distance == 0.0:
            continue
        new = nodes[nearest] + direction * min(1.0, params.step_size / distance)
        if not env.is_free(new) or not env.segment_is_free(nodes[nearest], new):
            continue
        nodes[count] = new
        parents[count] = nearest
        count += 1
        if np.linalg.norm(goal - new) <= params.step_size and env.segment_is_free(new, goal):
            nodes[count] = goal
            parents[count] = count - 1
            return path_to(count)

    raise PlanningFailure(FailureReason.ITERATION_CAP)


def resample_polyline(points: Sequence[np.ndarray], step: float = 1.0) -> np.ndarray:
    """Split every segment into ceil(length / step) equal pieces, one per timestep."""
    samples = [np.asarray(points[0], dtype=float)]
    for a, b in zip(points[:-1], points[1:]):
        length = float(np.linalg.norm(b - a))
        if length == 0.0:
            continue
        pieces = math.ceil(length / step)
        for m in range(1, pieces + 1):
            samples.append(a + (b - a) * (m / pieces))
    samples[-1] = np.asarray(points[-1], dtype=float)
    return np.stack(samples)


def prioritized_rrt_baseline(
    scenario: Scenario, seed: int, params: Optional[RRTParams] = None
) -> TrajectoryPlan:
    """One RRT per robot in index order, sharing a single seeded generator."""
    params = params or RRTParams()
    start_time = time.perf_counter()
    rng = np.random.default_rng(seed)
    env = scenario.environment

    trajectories = []
    for robot in range(scenario.n_robots):
        start = np.asarray(scenario.starts[robot], dtype=float)
        goal = np.asarray(scenario.goals[robot], dtype=float)
        try:
            polyline = _rrt(env, start, goal, rng, params)
        except PlanningFailure as failure:
            logger.info("RRT: robot %d hit the iteration cap", robot)
            return TrajectoryPlan.failed(
                "rrt",
                failure.reason,
                planning_time=time.perf_counter() - start_time,
                metadata={"failed_robot": robot, "params": asdict(params), "seed": seed},
            )
        trajectories.append(list(resample_polyline(polyline, params.step_size)))

    horizon = max(len(trajectory) - 1 for trajectory in trajectories)
    positions = np.asarray(pad_to_horizon(trajectories, horizon), dtype=float)
    return TrajectoryPlan(
        planner_name="rrt",
        positions=positions,
        success=True,
        planning_time=time.perf_counter() - start_time,
        order=tuple(range(scenario.n_robots)),
        metadata={"params": asdict(params), "seed": seed},
    )


@dataclass(frozen=True)
class PotentialFieldGains:
    attractive: float = 1.0
    repulsive: float = 5.0
    influence_radius: float = 2.0
    e_opt_weight: float = 10.0
    step: float = 0.05
    max_displacement: float = 1.0
    goal_tolerance: float = 0.5
    stall_window: int = 50
    stall_tolerance: float = 1e-3
    progress_window: int = 500
    max_iterations: int = 20000
    gradient_step: float = 1e-5


def _repulsion(env: Environment, point: np.ndarray, gains: PotentialFieldGains) -> np.ndarray:
    force = np.zeros(2)
    for obstacle in env.obstacles:
        distance, closest = obstacle.distance(point)
        if 0.0 < distance <= gains.influence_radius:
            magnitude = gains.repulsive * (1.0 / distance - 1.0 / gains.influence_radius)
            force += magnitude / distance**2 * (point - closest) / distance
    return force


def potential_field_baseline(
    scenario: Scenario,
    model: MeasurementModel,
    gains: Optional[PotentialFieldGains] = None,
    seed: Optional[int] = None,
) -> TrajectoryPlan:
    """Synchronous gradient descent of all robots on a shared potential.

    The descent is deterministic; ``seed`` is recorded only.
    """
    gains = gains or PotentialFieldGains()
    start_time = time.perf_counter()
    env = scenario.environment
    n_anchor = scenario.n_anchor
    has_nonanchors = n_anchor < scenario.n_robots
    positions = np.asarray(scenario.starts, dtype=float).copy()
    goals = np.asarray(scenario.goals, dtype=float)
    history = [positions.copy()]
    metadata = {"gains": asdict(gains), "seed": seed}
    best_remaining, best_step = math.inf, 0

    def failed(reason: FailureReason) -> TrajectoryPlan:
        logger.info(
            "potential field failed (%s) after %d steps", reason.value, len(history) - 1
        )
        return TrajectoryPlan.failed(
            "potential_field",
            reason,
            planning_time=time.perf_counter() - start_time,
            metadata={**metadata, "last_configuration": positions.tolist()},
        )

    for _ in range(gains.max_iterations):
        if np.all(np.linalg.norm(positions - goals, axis=1) <= gains.goal_tolerance):
            break

        force = gains.attractive * (goals - positions)
        for robot in range(positions.shape[0]):
            force[robot] += _repulsion(env, positions[robot], gains)
        if has_nonanchors:
            force += gains.e_opt_weight * lambda_min_gradient(
                positions, n_anchor, model, gains.gradient_step
            )

        displacement = gains.step * force
        norms = np.linalg.norm(displacement, axis=1, keepdims=True)
        displacement *= np.minimum(1.0, gains.max_displacement / np.maximum(norms, 1e-300))
        proposal = positions + displacement
        for robot in range(positions.shape[0]):
            if env.is_free(proposal[robot]) and env.segment_is_free(
                positions[robot], proposal[robot]
            ):
                positions[robot] = proposal[robot]
        history.append(positions.copy())

        if len(history) > gains.stall_window:
            window_motion = np.linalg.norm(
                history[-1] - history[-1 - gains.stall_window], axis=1
            ).max()
            if window_motion < gains.stall_tolerance:
                return failed(FailureReason.LOCAL_MINIMUM)

        # oscillating against an obstacle face: moving, but no closer
        remaining = float(np.linalg.norm(positions - goals, axis=1).sum())
        if remaining < best_remaining - gains.stall_tolerance:
            best_remaining, best_step = remaining, len(history)
        elif len(history) - best_step >= gains.progress_window:
            return failed(FailureReason.LOCAL_MINIMUM)
    else:
        return failed(FailureReason.ITERATION_CAP)

    # final hop onto the goals, all within the tolerance
    for robot in range(positions.shape[0]):
        if env.segment_is_free(positions[robot], goals[robot]):
            positions[robot] = goals[robot]
    history.append(positions.copy())
    return TrajectoryPlan(
        planner_name="potential_field",
        positions=np.stack(history, axis=1),
        success=True,
        planning_time=time.perf_counter() - start_time,
        order=tuple(range(scenario.n_robots)),
        metadata=metadata,
    )
