from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from src.localization.fim import IndicatorCounter, LocalizabilityConstraints, lc_indicator
from src.localization.network import MeasurementModel
from src.planning.environment import Roadmap
from src.utils.errors import FailureReason, PlanningFailure

logger = logging.getLogger(__name__)

HORIZON_CAP_FACTOR = 10


class PlannedTraces:
    """Node sequences of the robots planned so far, in planning order.

    A robot stays parked at its last node once its sequence ends.
    """

    def __init__(self, roadmap: Roadmap, traces: Optional[Sequence[Sequence[int]]] = None):
        self.roadmap = roadmap
        self.traces: list[list[int]] = [list(trace) for trace in traces or ()]
        for trace in self.traces:
            if not trace:
                raise ValueError("every trace needs at least its start node")

    def __len__(self) -> int:
        return len(self.traces)

    @property
    def horizon(self) -> int:
        """Last timestep at which some planned robot still moves."""
        return max((len(trace) - 1 for trace in self.traces), default=0)

    def nodes_at(self, t: int) -> list[int]:
        return [trace[min(t, len(trace) - 1)] for trace in self.traces]

    def positions_at(self, t: int) -> np.ndarray:
        return self.roadmap.nodes[self.nodes_at(t)].reshape(-1, 2)

    def extended(self, trace: Sequence[int]) -> PlannedTraces:
        return PlannedTraces(self.roadmap, self.traces + [list(trace)])


@dataclass(frozen=True)
class ConstraintSets:
    """Reachable and valid node sets of one robot for t = 0..horizon.

    candidate_sizes[t] is |R_t ∩ C_t|, the number of LC evaluations at t
    (equal to |R_t| for anchors, which are never evaluated).
    """

    robot: int
    start: int
    goal: int
    is_anchor: bool
    reachable: tuple[frozenset[int], ...]
    valid: tuple[frozenset[int], ...]
    candidate_sizes: tuple[int, ...]

    @property
    def horizon(self) -> int:
        return len(self.valid) - 1

    def valid_at(self, t: int) -> frozenset[int]:
        """Valid set at t; the sets are stationary after the horizon."""
        return self.valid[min(t, self.horizon)]

    def set_sizes(self) -> dict[str, list[int]]:
        return {
            "reachable": [len(s) for s in self.reachable],
            "candidates": list(self.candidate_sizes),
            "valid": [len(s) for s in self.valid],
        }


def reachable_step(prev_valid: Iterable[int], roadmap: Roadmap) -> frozenset[int]:
    """prev_valid together with its roadmap neighbours (waiting is allowed)."""
    prev_valid = frozenset(prev_valid)
    if not prev_valid:
        raise ValueError("previous valid set is empty")
    return prev_valid | roadmap.neighbor_closure(prev_valid)


def connected_mask(
    points: np.ndarray, planned_positions_at_t: np.ndarray, rho: float
) -> np.ndarray:
    """Per point, whether it lies within the sensing radius of a planned robot.

    With nothing planned (first robot of an anchor-free team) every point is
    connected.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    planned = np.asarray(planned_positions_at_t, dtype=float).reshape(-1, 2)
    if planned.shape[0] == 0:
        return np.ones(points.shape[0], dtype=bool)
    if points.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    return cdist(points, planned).min(axis=1) <= rho


def connected_predicate(
    candidate: Sequence[float], planned_positions_at_t: np.ndarray, rho: float
) -> bool:
    return bool(connected_mask(candidate, planned_positions_at_t, rho)[0])


def _connected_nodes(
    nodes: Sequence[int], roadmap: Roadmap, planned: np.ndarray, rho: float
) -> list[int]:
    mask = connected_mask(roadmap.nodes[list(nodes)], planned, rho)
    return [node for node, keep in zip(nodes, mask) if keep]


def construct_valid_sets(
    robot: int,
    start: int,
    goal: int,
    traces: PlannedTraces,
    roadmap: Roadmap,
    model: MeasurementModel,
    constraints: LocalizabilityConstraints,
    n_anchor: int,
    max_horizon: Optional[int] = None,
    counter: Optional[IndicatorCounter] = None,
) -> ConstraintSets:
    """Grow the valid sets of the robot at priority ``robot`` (= len(traces)).

    Anchors take V_t = R_t. Non-anchors keep the candidates of R_t ∩ C_t that
    pass the LC indicator. Construction succeeds once the sets stop changing
    with the goal inside, after every earlier robot has parked.

    Raises:
        PlanningFailure: empty valid set, steady state without the goal, or
            the horizon cap
    """
    if robot != len(traces):
        raise ValueError(f"robot {robot} planned after {len(traces)} robots")
    is_anchor = robot < n_anchor
    if max_horizon is None:
        max_horizon = HORIZON_CAP_FACTOR * max(roadmap.diameter, 1) + traces.horizon
    settle_after = 0 if is_anchor else traces.horizon

    reachable = [frozenset({start})]
    valid = [frozenset({start})]
    candidate_sizes = [1]
    t = 0
    while True:
        t += 1
        if t > max_horizon:
            raise PlanningFailure(
                FailureReason.HORIZON_CAP, robot, {"max_horizon": max_horizon}
            )
        reach = reachable_step(valid[-1], roadmap)
        if is_anchor:
            next_valid = reach
            candidate_sizes.append(len(reach))
        else:
            planned = traces.positions_at(t)
            candidates = _connected_nodes(
                sorted(reach), roadmap, planned, model.sensing_radius
            )
            candidate_sizes.append(len(candidates))
            next_valid = frozenset(
                node
                for node in candidates
                if lc_indicator(
                    roadmap.nodes[node], planned, n_anchor, model, constraints, counter
                )
            )
        reachable.append(reach)
        valid.append(next_valid)

        if not next_valid:
            raise PlanningFailure(FailureReason.EMPTY, robot, {"t": t})
        if t > settle_after and next_valid == valid[-2]:
            if goal in next_valid:
                break
            raise PlanningFailure(FailureReason.STEADY_STATE, robot, {"t": t})

    logger.debug(
        "robot %d: valid sets settled at t=%d (%d nodes)", robot, t, len(valid[-1])
    )
    return ConstraintSets(
        robot=robot,
        start=start,
        goal=goal,
        is_anchor=is_anchor,
        reachable=tuple(reachable),
        valid=tuple(valid),
        candidate_sizes=tuple(candidate_sizes),
    )
