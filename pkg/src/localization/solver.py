from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from src.localization.network import MeasurementModel, RangeObservationSet

logger = logging.getLogger(__name__)

MIN_RANGE = 1e-12


@dataclass(frozen=True)
class SolverTolerances:
    step: float = 1e-10
    relative_cost_change: float = 1e-12
    max_iterations: int = 200
    initial_damping: float = 1e-3
    damping_increase: float = 10.0
    damping_decrease: float = 0.1


@dataclass(frozen=True, eq=False)
class LocalizationProblem:
    """One timestep to localize.

    Args:
        anchors: array (n_anchor, d) of known positions
        truth: array (n_nonanchor, d) of true non-anchor positions
        observations: ranges indexed by global robot index (anchors first)
    """

    anchors: np.ndarray
    truth: np.ndarray
    observations: RangeObservationSet
    model: MeasurementModel

    @property
    def n_anchor(self) -> int:
        return self.anchors.shape[0]

    @property
    def dim(self) -> int:
        return self.truth.shape[1]

    def observation_counts(self) -> np.ndarray:
        """Observations per non-anchor."""
        counts = self.observations.counts_per_robot(self.n_anchor + self.truth.shape[0])
        return counts[self.n_anchor :]

    def is_well_posed(self) -> bool:
        return bool(np.all(self.observation_counts() >= self.dim))


@dataclass(frozen=True, eq=False)
class SolveResult:
    estimate: np.ndarray
    iterations: int
    final_cost: float
    converged: bool
    ill_posed: bool = False


def _positions(problem: LocalizationProblem, nonanchors: np.ndarray) -> np.ndarray:
    nonanchors = np.asarray(nonanchors, dtype=float).reshape(-1, problem.dim)
    return np.vstack([problem.anchors, nonanchors])


def _edge_arrays(problem: LocalizationProblem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    obs = problem.observations.observations
    i = np.fromiter((o.i for o in obs), dtype=int, count=len(obs))
    j = np.fromiter((o.j for o in obs), dtype=int, count=len(obs))
    measured = np.fromiter((o.measured_range for o in obs), dtype=float, count=len(obs))
    return i, j, measured


def residuals(problem: LocalizationProblem, nonanchors: np.ndarray) -> np.ndarray:
    """(m - L) / sigma for gamma=1, (ln m - ln L) / sigma for gamma=2."""
    positions = _positions(problem, nonanchors)
    i, j, measured = _edge_arrays(problem)
    lengths = np.maximum(np.linalg.norm(positions[i] - positions[j], axis=1), MIN_RANGE)
    if problem.model.gamma == 1:
        return (measured - lengths) / problem.model.sigma
    return (np.log(measured) - np.log(lengths)) / problem.model.sigma


def jacobian(problem: LocalizationProblem, nonanchors: np.ndarray) -> np.ndarray:
    """d residuals / d (flattened non-anchor positions)."""
    positions = _positions(problem, nonanchors)
    i, j, _ = _edge_arrays(problem)
    d = problem.dim
    n_anchor = problem.n_anchor
    deltas = positions[i] - positions[j]
    lengths = np.maximum(np.linalg.norm(deltas, axis=1), MIN_RANGE)
    # d r / d x_i for every edge; d r / d x_j is its negative
    rows = -deltas / (problem.model.sigma * lengths[:, None] ** problem.model.gamma)

    jac = np.zeros((len(i), d * problem.truth.shape[0]))
    for e, (a, b) in enumerate(zip(i, j)):
        if a >= n_anchor:
            block = a - n_anchor
            jac[e, d * block : d * (block + 1)] += rows[e]
        if b >= n_anchor:
            block = b - n_anchor
            jac[e, d * block : d * (block + 1)] -= rows[e]
    return jac


def solve_snapshot(
    problem: LocalizationProblem,
    initial_guess: np.ndarray,
    tolerances: SolverTolerances = SolverTolerances(),
) -> SolveResult:
    """Damped Gauss-Newton from ``initial_guess`` (array (n_nonanchor, d)).

    Ill-posed problems (a non-anchor with fewer than d ranges) are returned
    unsolved with ill_posed set; non-convergence is flagged, the last iterate
    is kept.
    """
    x = np.asarray(initial_guess, dtype=float).reshape(-1).copy()
    shape = (-1, problem.dim)
    if not problem.is_well_posed():
        return SolveResult(
            estimate=x.reshape(shape),
            iterations=0,
            final_cost=float("nan"),
            converged=False,
            ill_posed=True,
        )

    damping = tolerances.initial_damping
    r = residuals(problem, x)
    cost = float(r @ r)
    converged = False
    iteration = 0
    while iteration < tolerances.max_iterations:
        iteration += 1
        jac = jacobian(problem, x)
        normal = jac.T @ jac + damping * np.eye(x.size)
        try:
            step = -cho_solve(cho_factor(normal), jac.T @ r)
        except LinAlgError:
            damping *= tolerances.damping_increase
            continue

        candidate = x + step
        candidate_r = residuals(problem, candidate)
        candidate_cost = float(candidate_r @ candidate_r)
        step_norm = float(np.linalg.norm(step))
        if candidate_cost <= cost:
            change = cost - candidate_cost
            x, r = candidate, candidate_r
            previous_cost, cost = cost, candidate_cost
            damping *= tolerances.damping_decrease
            if (
                step_norm < tolerances.step
                or cost == 0.0
                or change <= tolerances.relative_cost_change * previous_cost
            ):
                converged = True
                break
        else:
            damping *= tolerances.damping_increase
            if step_norm < tolerances.step:
                converged = True
                break

    if not converged:
        logger.debug("solver stopped after %d iterations, cost %g", iteration, cost)
    return SolveResult(
        estimate=x.reshape(shape),
        iterations=iteration,
        final_cost=cost,
        converged=converged,
    )
