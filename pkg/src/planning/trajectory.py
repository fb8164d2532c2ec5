from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from src.utils.errors import FailureReason


@dataclass(frozen=True)
class PlanningOrder:
    """Anchors in fixed order followed by a permutation of the non-anchors."""

    n_anchor: int
    n_robots: int
    nonanchor_order: tuple[int, ...]

    def __post_init__(self):
        expected = set(range(self.n_anchor, self.n_robots))
        if sorted(self.nonanchor_order) != sorted(expected) or len(
            self.nonanchor_order
        ) != len(expected):
            raise ValueError(
                f"{self.nonanchor_order} is not a permutation of the non-anchors "
                f"{sorted(expected)}"
            )

    @classmethod
    def identity(cls, n_anchor: int, n_robots: int) -> PlanningOrder:
        return cls(n_anchor, n_robots, tuple(range(n_anchor, n_robots)))

    @property
    def sequence(self) -> tuple[int, ...]:
        return tuple(range(self.n_anchor)) + tuple(self.nonanchor_order)


def pad_to_horizon(sequences: Sequence[Sequence[Any]], horizon: int) -> list[list[Any]]:
    """Repeat the last element of each sequence (goal parking) up to horizon + 1."""
    return [
        list(seq) + [seq[-1]] * (horizon + 1 - len(seq)) for seq in sequences
    ]


@dataclass
class TrajectoryPlan:
    """Positions of every robot (original indexing) at every timestep.

    Args:
        planner_name: lcgp, astar, rrt or potential_field
        positions: array (n_robots, horizon + 1, 2); empty when planning failed
        node_paths: roadmap node sequences for the graph planners
        orderings_tried: number of planning orders attempted (LCGP)
        order: the planning sequence that produced the plan
    """

    planner_name: str
    positions: np.ndarray
    success: bool
    planning_time: float = 0.0
    orderings_tried: int = 1
    failure_reason: Optional[FailureReason] = None
    node_paths: Optional[list[list[int]]] = None
    order: Optional[tuple[int, ...]] = None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return max(self.positions.shape[1] - 1, 0) if self.positions.size else 0

    @property
    def n_robots(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def failed(
        cls,
        planner_name: str,
        reason: FailureReason,
        planning_time: float = 0.0,
        orderings_tried: int = 1,
        metadata: Optional[dict[str, Any]] = None,
    ) -> TrajectoryPlan:
        return cls(
            planner_name=planner_name,
            positions=np.zeros((0, 0, 2)),
            success=False,
            planning_time=planning_time,
            orderings_tried=orderings_tried,
            failure_reason=FailureReason(reason),
            metadata=metadata or {},
        )

    def travelled_distances(self) -> np.ndarray:
        """Summed per-step displacement of each robot; waits add nothing."""
        steps = np.diff(self.positions, axis=1)
        return np.linalg.norm(steps, axis=-1).sum(axis=1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "planner": self.planner_name,
            "success": self.success,
            "failure_reason": self.failure_reason.value if self.failure_reason else None,
            "planning_time": self.planning_time,
            "orderings_tried": self.orderings_tried,
            "order": list(self.order) if self.order is not None else None,
            "positions": self.positions.tolist(),
            "node_paths": self.node_paths,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TrajectoryPlan:
        positions = np.asarray(data.get("positions") or [], dtype=float)
        if positions.size == 0:
            positions = np.zeros((0, 0, 2))
        reason = data.get("failure_reason")
        return cls(
            planner_name=data["planner"],
            positions=positions,
            success=bool(data["success"]),
            planning_time=float(data.get("planning_time", 0.0)),
            orderings_tried=int(data.get("orderings_tried", 1)),
            failure_reason=FailureReason(reason) if reason else None,
            node_paths=data.get("node_paths"),
            order=tuple(data["order"]) if data.get("order") is not None else None,
            metadata=dict(data.get("metadata") or {}),
        )
