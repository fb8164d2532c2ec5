from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from src.localization.network import (
    EdgeKind,
    MeasurementGraph,
    MeasurementModel,
    NetworkSnapshot,
    build_measurement_graph,
)
from src.utils.errors import DegenerateGeometryError

logger = logging.getLogger(__name__)

SINGULARITY_THRESHOLD = 1e-10
PSD_TOLERANCE = 1e-9


class PairKind(str, Enum):
    DIFFERENCE = "difference"
    SINGLE = "single"


@dataclass(frozen=True)
class LocalizabilityConstraints:
    """Lower bounds on the A-optimality (alpha) and E-optimality (beta)."""

    alpha: float = -math.inf
    beta: float = 0.0

    def __post_init__(self):
        if math.isnan(self.alpha) or math.isnan(self.beta):
            raise ValueError("constraints must not be NaN")
        if self.beta < 0.0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")

    @property
    def is_trivial(self) -> bool:
        return self.alpha == -math.inf and self.beta <= 0.0


@dataclass(frozen=True, eq=False)
class Fim:
    dim: int
    n_nonanchor: int
    matrix: np.ndarray

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return spectrum(self)


@dataclass(frozen=True)
class OptimalityReport:
    a_opt: float
    e_opt: float
    lambda_min: float
    singular: bool


def _pair_weight(
    snapshot: NetworkSnapshot, model: MeasurementModel, i: int, j: int
) -> np.ndarray:
    delta = snapshot.positions[i] - snapshot.positions[j]
    length = float(np.linalg.norm(delta))
    if length == 0.0:
        raise DegenerateGeometryError(f"robots {i} and {j} are coincident")
    return delta / (model.sigma * length**model.gamma)


def pair_vector(
    snapshot: NetworkSnapshot,
    model: MeasurementModel,
    i: int,
    j: int,
    kind: PairKind,
) -> np.ndarray:
    """Block vector relating robots i (non-anchor) and j.

    Block i holds w = (x_i - x_j) / (sigma * L^gamma); for kind=difference
    block j holds -w, which requires j to be a non-anchor.
    """
    kind = PairKind(kind)
    if snapshot.is_anchor(i):
        raise ValueError(f"robot {i} must be a non-anchor")
    if kind == PairKind.DIFFERENCE and snapshot.is_anchor(j):
        raise ValueError(f"difference vector needs a non-anchor j, got anchor {j}")

    d = snapshot.dim
    weight = _pair_weight(snapshot, model, i, j)
    vector = np.zeros(d * snapshot.n_nonanchor)
    block_i = snapshot.nonanchor_block(i)
    vector[d * block_i : d * (block_i + 1)] = weight
    if kind == PairKind.DIFFERENCE:
        block_j = snapshot.nonanchor_block(j)
        vector[d * block_j : d * (block_j + 1)] = -weight
    return vector


def assemble_fim(
    snapshot: NetworkSnapshot,
    model: MeasurementModel,
    graph: Optional[MeasurementGraph] = None,
) -> Fim:
    """One d-block per non-anchor, anchor rows and columns removed.

    NN edges add a difference vector (+w in block i, -w in block j), NA edges
    a single-block vector, with w = (x_i - x_j) / (sigma * L^gamma). AA edges
    carry no information.
    """
    if graph is None:
        graph = build_measurement_graph(snapshot, model)
    d = snapshot.dim
    matrix = np.zeros((d * snapshot.n_nonanchor, d * snapshot.n_nonanchor))

    # Rank-one updates written block-wise; equal to summing the outer
    # products of pair_vector over the edges.
    for i, j, kind in graph:
        if kind == EdgeKind.AA:
            continue
        weight = _pair_weight(snapshot, model, i, j)
        block = np.outer(weight, weight)
        bi = d * snapshot.nonanchor_block(i)
        matrix[bi : bi + d, bi : bi + d] += block
        if kind == EdgeKind.NN:
            bj = d * snapshot.nonanchor_block(j)
            matrix[bj : bj + d, bj : bj + d] += block
            matrix[bi : bi + d, bj : bj + d] -= block
            matrix[bj : bj + d, bi : bi + d] -= block

    matrix.setflags(write=False)
    return Fim(dim=d, n_nonanchor=snapshot.n_nonanchor, matrix=matrix)


def spectrum(fim: Fim) -> np.ndarray:
    """Ascending eigenvalues of the (symmetric) FIM."""
    if not np.all(np.isfinite(fim.matrix)):
        raise ValueError("FIM has non-finite entries")
    return np.linalg.eigvalsh(fim.matrix)


def _is_singular(eigenvalues: np.ndarray) -> bool:
    return bool(
        eigenvalues[0] <= SINGULARITY_THRESHOLD * max(1.0, float(eigenvalues[-1]))
    )


def a_optimality(fim: Fim) -> float:
    """-trace(F^-1), or -inf when F is singular."""
    eigenvalues = fim.eigenvalues
    if eigenvalues.size == 0:
        return 0.0
    if _is_singular(eigenvalues):
        return -math.inf
    return -float(np.sum(1.0 / eigenvalues))


def e_optimality(fim: Fim) -> float:
    """Smallest eigenvalue, reported as 0 when F is singular."""
    eigenvalues = fim.eigenvalues
    if eigenvalues.size == 0:
        return math.inf
    if _is_singular(eigenvalues):
        return 0.0
    return float(eigenvalues[0])


def optimality_report(fim: Fim) -> OptimalityReport:
    eigenvalues = fim.eigenvalues
    if eigenvalues.size == 0:
        return OptimalityReport(0.0, math.inf, math.inf, False)
    lambda_min = float(eigenvalues[0])
    if lambda_min < -PSD_TOLERANCE * max(1.0, float(eigenvalues[-1])):
        logger.warning("FIM is not positive semidefinite: lambda_min=%g", lambda_min)
    return OptimalityReport(
        a_opt=a_optimality(fim),
        e_opt=e_optimality(fim),
        lambda_min=lambda_min,
        singular=_is_singular(eigenvalues),
    )


def connectivity_prescreen(graph: MeasurementGraph, snapshot: NetworkSnapshot) -> bool:
    """False if some non-anchor has fewer than d NA/NN neighbours.

    Passing is necessary, not sufficient, for a nonsingular FIM.
    """
    return all(
        graph.localizing_neighbor_count(robot) >= snapshot.dim
        for robot in range(snapshot.n_anchor, snapshot.n_robots)
    )


def satisfies_constraints(
    snapshot: NetworkSnapshot,
    model: MeasurementModel,
    constraints: LocalizabilityConstraints,
    graph: Optional[MeasurementGraph] = None,
) -> bool:
    """(a_opt >= alpha) and (e_opt >= beta) for a complete network."""
    if constraints.is_trivial:
        return True
    try:
        if graph is None:
            graph = build_measurement_graph(snapshot, model)
        if not connectivity_prescreen(graph, snapshot):
            return False
        fim = assemble_fim(snapshot, model, graph)
    except DegenerateGeometryError:
        return False
    return a_optimality(fim) >= constraints.alpha and e_optimality(fim) >= constraints.beta


@dataclass
class IndicatorCounter:
    """Counts indicator evaluations, separating those on candidates that are
    outside the sensing radius of every planned robot."""

    calls: int = 0
    disconnected_calls: int = 0
    by_robot: dict[int, int] = field(default_factory=dict)

    def record(self, robot: int, connected: bool):
        self.calls += 1
        self.by_robot[robot] = self.by_robot.get(robot, 0) + 1
        if not connected:
            self.disconnected_calls += 1


def lc_indicator(
    candidate: Sequence[float],
    planned_positions: np.ndarray,
    n_anchor: int,
    model: MeasurementModel,
    constraints: LocalizabilityConstraints,
    counter: Optional[IndicatorCounter] = None,
) -> bool:
    """Whether robot i = len(planned_positions) at ``candidate`` keeps the
    partial network {candidate} + planned_positions within the constraints.

    planned_positions holds robots 0..i-1 at the same timestep, anchors first.
    """
    candidate = np.asarray(candidate, dtype=float)
    planned_positions = np.asarray(planned_positions, dtype=float).reshape(
        -1, candidate.shape[0]
    )
    robot = planned_positions.shape[0]

    if counter is not None:
        connected = bool(
            planned_positions.shape[0]
            and cdist(candidate[None, :], planned_positions).min()
            <= model.sensing_radius
        )
        counter.record(robot, connected)

    if constraints.is_trivial:
        return True
    snapshot = NetworkSnapshot(
        positions=np.vstack([planned_positions, candidate[None, :]]),
        n_anchor=min(n_anchor, robot + 1),
    )
    return satisfies_constraints(snapshot, model, constraints)


def lambda_min_of_positions(
    positions: np.ndarray, n_anchor: int, model: MeasurementModel
) -> float:
    """Smallest FIM eigenvalue of a configuration; coincident robots give 0."""
    snapshot = NetworkSnapshot(positions=positions, n_anchor=n_anchor)
    try:
        fim = assemble_fim(snapshot, model)
    except DegenerateGeometryError:
        return 0.0
    if fim.eigenvalues.size == 0:
        return math.inf
    return float(fim.eigenvalues[0])


def lambda_min_gradient(
    positions: np.ndarray,
    n_anchor: int,
    model: MeasurementModel,
    step: float = 1e-5,
) -> np.ndarray:
    """Central finite-difference gradient of lambda_min w.r.t. every coordinate."""
    positions = np.asarray(positions, dtype=float)
    gradient = np.zeros_like(positions)
    for robot in range(positions.shape[0]):
        for axis in range(positions.shape[1]):
            forward = positions.copy()
            backward = positions.copy()
            forward[robot, axis] += step
            backward[robot, axis] -= step
            gradient[robot, axis] = (
                lambda_min_of_positions(forward, n_anchor, model)
                - lambda_min_of_positions(backward, n_anchor, model)
            ) / (2.0 * step)
    return gradient


def lambda_min_gradient_analytic(
    positions: np.ndarray, n_anchor: int, model: MeasurementModel
) -> np.ndarray:
    """Gradient of a simple lambda_min as v^T (dF/dp) v, v its unit eigenvector.

    With the measurement graph held fixed, v^T F v = sum over edges of
    (w . u_e)^2 where u_e is the block difference of v along the edge, so the
    derivative follows from dw/dx_i = (I - gamma * n n^T) / (sigma L^gamma).
    """
    snapshot = NetworkSnapshot(positions=positions, n_anchor=n_anchor)
    graph = build_measurement_graph(snapshot, model)
    fim = assemble_fim(snapshot, model, graph)
    _, vectors = np.linalg.eigh(fim.matrix)
    d = snapshot.dim
    v = vectors[:, 0].reshape(-1, d)

    gradient = np.zeros_like(snapshot.positions)
    for i, j, kind in graph:
        if kind == EdgeKind.AA:
            continue
        delta = snapshot.positions[i] - snapshot.positions[j]
        length = float(np.linalg.norm(delta))
        unit = delta / length
        weight = delta / (model.sigma * length**model.gamma)
        u = v[snapshot.nonanchor_block(i)].copy()
        if kind == EdgeKind.NN:
            u -= v[snapshot.nonanchor_block(j)]
        jacobian = (np.eye(d) - model.gamma * np.outer(unit, unit)) / (
            model.sigma * length**model.gamma
        )
        contribution = 2.0 * float(weight @ u) * (jacobian @ u)
        gradient[i] += contribution
        gradient[j] -= contribution
    return gradient
