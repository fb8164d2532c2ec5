from __future__ import annotations

from enum import Enum
from typing import Any, Optional


class FailureReason(str, Enum):
    EMPTY = "empty"
    STEADY_STATE = "steady_state"
    HORIZON_CAP = "horizon_cap"
    NO_PATH = "no_path"
    ITERATION_CAP = "iteration_cap"
    LOCAL_MINIMUM = "local_minimum"
    ORDERINGS_EXHAUSTED = "orderings_exhausted"


class LocalizationPlanningError(Exception):
    """Base class for every error raised by this package."""


class DegenerateGeometryError(LocalizationPlanningError, ValueError):
    """Two robots share a position, so a range of length zero would be used."""


class ScenarioError(LocalizationPlanningError, ValueError):
    """The scenario content is inconsistent (bad counts, starts in obstacles, ...)."""


class ScenarioValidationError(ScenarioError):
    """The scenario file violates the schema.

    Args:
        diagnostics: one ``field.path: message`` string per violation
    """

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class PlanningFailure(LocalizationPlanningError):
    """A planner could not produce a trajectory.

    Args:
        reason: why planning stopped
        robot: robot being planned when the failure happened, if any
        details: free-form diagnostics (e.g. the last configuration)
    """

    def __init__(
        self,
        reason: FailureReason,
        robot: Optional[int] = None,
        details: Optional[dict[str, Any]] = None,
    ):
        self.reason = FailureReason(reason)
        self.robot = robot
        self.details = details or {}
        message = f"planning failed: {self.reason.value}"
        if robot is not None:
            message += f" (robot {robot})"
        super().__init__(message)
