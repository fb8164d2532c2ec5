from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from src.localization.fim import (
    IndicatorCounter,
    LocalizabilityConstraints,
    OptimalityReport,
    assemble_fim,
    optimality_report,
    satisfies_constraints,
)
from src.localization.network import MeasurementModel, NetworkSnapshot
from src.planning.constraint_sets import PlannedTraces, construct_valid_sets
from src.planning.environment import Roadmap
from src.planning.search import time_expanded_search
from src.planning.trajectory import PlanningOrder, TrajectoryPlan, pad_to_horizon
from src.utils.errors import (
    DegenerateGeometryError,
    FailureReason,
    PlanningFailure,
    ScenarioError,
)

if TYPE_CHECKING:
    from src.utils.scenarios import Scenario

logger = logging.getLogger(__name__)

PLANNER_NAME = "lcgp"


def check_start_configuration(
    scenario: Scenario, constraints: LocalizabilityConstraints
) -> None:
    """Raise ScenarioError unless the start configuration satisfies the constraints."""
    if constraints.is_trivial:
        return
    snapshot = NetworkSnapshot(np.asarray(scenario.starts), scenario.n_anchor)
    if not satisfies_constraints(snapshot, scenario.model, constraints):
        raise ScenarioError(
            "start configuration violates the localizability constraints "
            f"(alpha={constraints.alpha}, beta={constraints.beta})"
        )


def lcgp_plan(
    scenario: Scenario,
    roadmap: Roadmap,
    constraints: LocalizabilityConstraints,
    order: PlanningOrder,
    max_horizon: Optional[int] = None,
    counter: Optional[IndicatorCounter] = None,
) -> TrajectoryPlan:
    """Plan every robot in ``order``; a failed plan carries the reason.

    Args:
        roadmap: must contain every start and goal as a node
        max_horizon: cap on each robot's set construction (default: 10 times
            the roadmap diameter plus the horizon planned so far)
        counter: collects indicator call statistics
    """
    start_time = time.perf_counter()
    check_start_configuration(scenario, constraints)
    model = scenario.model
    sequence = order.sequence

    traces = PlannedTraces(roadmap)
    node_paths: dict[int, list[int]] = {}
    set_sizes: dict[int, dict[str, list[int]]] = {}
    for rank, robot in enumerate(sequence):
        start = roadmap.node_of(scenario.starts[robot])
        goal = roadmap.node_of(scenario.goals[robot])
        try:
            valid_sets = construct_valid_sets(
                rank,
                start,
                goal,
                traces,
                roadmap,
                model,
                constraints,
                scenario.n_anchor,
                max_horizon=max_horizon,
                counter=counter,
            )
            path = time_expanded_search(valid_sets, roadmap)
        except PlanningFailure as failure:
            logger.info(
                "order %s: robot %d failed (%s)", sequence, robot, failure.reason.value
            )
            return TrajectoryPlan.failed(
                PLANNER_NAME,
                failure.reason,
                planning_time=time.perf_counter() - start_time,
                metadata={"failed_robot": robot, **failure.details},
            )
        traces = traces.extended(path)
        node_paths[robot] = path
        set_sizes[robot] = valid_sets.set_sizes()

    paths = pad_to_horizon(
        [node_paths[robot] for robot in range(len(sequence))], traces.horizon
    )
    return TrajectoryPlan(
        planner_name=PLANNER_NAME,
        positions=roadmap.nodes[np.asarray(paths, dtype=int)],
        success=True,
        planning_time=time.perf_counter() - start_time,
        node_paths=paths,
        order=sequence,
        metadata={
            "set_sizes": {str(robot): sizes for robot, sizes in set_sizes.items()}
        },
    )


def reorder_and_retry(
    scenario: Scenario,
    roadmap: Roadmap,
    constraints: LocalizabilityConstraints,
    max_orderings: int,
    seed: int,
    max_horizon: Optional[int] = None,
    counter: Optional[IndicatorCounter] = None,
) -> TrajectoryPlan:
    """Identity order first, then seeded uniform reshuffles of the non-anchors.

    planning_time of the returned plan covers every attempt.
    """
    if max_orderings < 1:
        raise ValueError(f"max_orderings must be at least 1, got {max_orderings}")
    start_time = time.perf_counter()
    rng = np.random.default_rng(seed)
    n_robots, n_anchor = scenario.n_robots, scenario.n_anchor
    order = PlanningOrder.identity(n_anchor, n_robots)

    reasons = []
    for attempt in range(1, max_orderings + 1):
        if attempt > 1:
            permutation = rng.permutation(np.arange(n_anchor, n_robots))
            order = PlanningOrder(n_anchor, n_robots, tuple(int(r) for r in permutation))
        plan = lcgp_plan(scenario, roadmap, constraints, order, max_horizon, counter)
        if plan.success:
            plan.orderings_tried = attempt
            plan.planning_time = time.perf_counter() - start_time
            logger.info("LCGP succeeded after %d ordering(s)", attempt)
            return plan
        reasons.append(plan.failure_reason.value)

    logger.warning("LCGP failed for all %d orderings: %s", max_orderings, reasons)
    if max_orderings > 1:
        reason = FailureReason.ORDERINGS_EXHAUSTED
    else:
        reason = FailureReason(reasons[0])
    return TrajectoryPlan.failed(
        PLANNER_NAME,
        reason,
        planning_time=time.perf_counter() - start_time,
        orderings_tried=max_orderings,
        metadata={"attempt_reasons": reasons},
    )


@dataclass(frozen=True)
class LocalizabilitySweep:
    satisfied: tuple[bool, ...]
    reports: tuple[OptimalityReport, ...]

    @property
    def all_satisfied(self) -> bool:
        return all(self.satisfied)

    @property
    def satisfied_fraction(self) -> float:
        return float(np.mean(self.satisfied)) if self.satisfied else 1.0

    def violations(self) -> list[int]:
        return [t for t, ok in enumerate(self.satisfied) if not ok]


def sweep_localizability(
    positions: np.ndarray,
    n_anchor: int,
    model: MeasurementModel,
    constraints: LocalizabilityConstraints,
) -> LocalizabilitySweep:
    """Recheck the full network at every timestep of a trajectory.

    Args:
        positions: array (n_robots, horizon + 1, d)
    """
    positions = np.asarray(positions, dtype=float)
    satisfied = []
    reports = []
    for t in range(positions.shape[1]):
        snapshot = NetworkSnapshot(positions[:, t, :], n_anchor)
        try:
            report = optimality_report(assemble_fim(snapshot, model))
        except DegenerateGeometryError:
            # coincident robots
            report = OptimalityReport(-math.inf, 0.0, 0.0, True)
        reports.append(report)
        satisfied.append(satisfies_constraints(snapshot, model, constraints))
    return LocalizabilitySweep(tuple(satisfied), tuple(reports))
