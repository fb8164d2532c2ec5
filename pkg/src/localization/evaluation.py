from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Union

import numpy as np
import pandas as pd

from src.localization.network import (
    MeasurementModel,
    NetworkSnapshot,
    build_measurement_graph,
    simulate_ranges,
)
from src.localization.solver import LocalizationProblem, SolverTolerances, solve_snapshot
from src.planning.trajectory import TrajectoryPlan
from src.utils.errors import DegenerateGeometryError

if TYPE_CHECKING:
    from src.utils.scenarios import Scenario

logger = logging.getLogger(__name__)

INIT_PERTURBATION_SIGMAS = 3.0
METRICS_COLUMNS = ["t", "mean_error", "max_robot_error", "n_illposed"]


@dataclass
class EvaluationReport:
    """Localization metrics of one trajectory, averaged over noise trials.

    mean_error[t] is NaN where every trial was ill-posed at t; mle is the
    maximum of that series and ale the mean of every well-posed error.
    """

    ale: float
    mle: float
    ad: float
    mean_error: np.ndarray
    max_robot_error: np.ndarray
    n_illposed: np.ndarray
    robot_distances: np.ndarray
    trials: int
    seed: int
    noise_scale: float = 1.0
    solver: dict[str, Any] = field(default_factory=dict)

    @property
    def illposed_timesteps(self) -> list[int]:
        return [int(t) for t in np.flatnonzero(self.n_illposed)]

    @property
    def has_illposed(self) -> bool:
        return bool(np.any(self.n_illposed))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": np.arange(self.mean_error.shape[0]),
                "mean_error": self.mean_error,
                "max_robot_error": self.max_robot_error,
                "n_illposed": self.n_illposed.astype(int),
            },
            columns=METRICS_COLUMNS,
        )

    def to_dict(self) -> dict[str, Any]:
        def number(value: float):
            return None if math.isnan(value) else float(value)

        return {
            "ale": number(self.ale),
            "mle": number(self.mle),
            "ad": float(self.ad),
            "trials": self.trials,
            "seed": self.seed,
            "noise_scale": self.noise_scale,
            "illposed_timesteps": self.illposed_timesteps,
            "mean_error": [number(v) for v in self.mean_error],
            "max_robot_error": [number(v) for v in self.max_robot_error],
            "n_illposed": self.n_illposed.astype(int).tolist(),
            "robot_distances": self.robot_distances.tolist(),
            "solver": self.solver,
        }


def write_metrics_csv(report: EvaluationReport, path: Union[str, Path]) -> Path:
    """One row per timestep; ill-posed cells are left empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report.to_frame().to_csv(
        path, index=False, float_format="%.9g", na_rep="", lineterminator="\n"
    )
    return path


def timestep_seed(seed: int, trial: int, t: int) -> int:
    return int(np.random.SeedSequence([seed, trial, t]).generate_state(1)[0])


def evaluate_trajectory(
    plan: TrajectoryPlan,
    scenario: Scenario,
    model: MeasurementModel,
    seed: int,
    trials: int = 10,
    noise_scale: float = 1.0,
    tolerances: SolverTolerances = SolverTolerances(),
) -> EvaluationReport:
    """Localize every timestep of a successful plan ``trials`` times.

    t = 0 starts from the truth perturbed by Normal(0, (3 sigma)^2) per
    coordinate, later timesteps from the previous estimate. Timesteps where a
    non-anchor has fewer than d ranges (or robots coincide) are ill-posed and
    excluded from the error metrics.
    """
    if not plan.success or plan.positions.size == 0:
        raise ValueError("only successful plans can be evaluated")
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")

    n_anchor = scenario.n_anchor
    positions = plan.positions
    n_steps = positions.shape[1]
    n_nonanchor = positions.shape[0] - n_anchor
    d = positions.shape[2]
    errors = np.full((trials, n_steps, n_nonanchor), np.nan)
    iterations, costs, not_converged = [], [], 0

    for trial in range(trials):
        init_rng = np.random.default_rng(np.random.SeedSequence([seed, trial]))
        estimate = None
        for t in range(n_steps):
            snapshot = NetworkSnapshot(positions[:, t, :], n_anchor)
            truth = snapshot.positions[n_anchor:]
            if estimate is None:
                estimate = truth + init_rng.normal(
                    0.0,
                    INIT_PERTURBATION_SIGMAS * model.sigma * noise_scale,
                    size=(n_nonanchor, d),
                )
            try:
                graph = build_measurement_graph(snapshot, model)
                observations = simulate_ranges(
                    snapshot, model, timestep_seed(seed, trial, t), noise_scale, graph
                )
            except (DegenerateGeometryError, ValueError) as exc:
                logger.debug("trial %d, t=%d: no usable ranges (%s)", trial, t, exc)
                continue

            problem = LocalizationProblem(
                anchors=snapshot.positions[:n_anchor],
                truth=truth,
                observations=observations,
                model=model,
            )
            result = solve_snapshot(problem, estimate, tolerances)
            if result.ill_posed:
                continue
            iterations.append(result.iterations)
            costs.append(result.final_cost)
            not_converged += not result.converged
            errors[trial, t] = np.linalg.norm(result.estimate - truth, axis=1)
            estimate = result.estimate

    if n_nonanchor:
        illposed = np.isnan(errors).any(axis=2)
    else:
        illposed = np.zeros((trials, n_steps), dtype=bool)
    n_illposed = illposed.sum(axis=0)
    mean_error = np.full(n_steps, np.nan)
    max_robot_error = np.full(n_steps, np.nan)
    for t in range(n_steps):
        valid = ~illposed[:, t]
        if valid.any() and n_nonanchor:
            per_robot = errors[valid, t].mean(axis=0)
            mean_error[t] = per_robot.mean()
            max_robot_error[t] = per_robot.max()

    well_posed = ~np.isnan(mean_error)
    mle = float(mean_error[well_posed].max()) if well_posed.any() else math.nan
    valid_errors = errors[~illposed]
    ale = float(valid_errors.mean()) if valid_errors.size else math.nan
    distances = plan.travelled_distances()

    report = EvaluationReport(
        ale=ale,
        mle=mle,
        ad=float(distances.mean()),
        mean_error=mean_error,
        max_robot_error=max_robot_error,
        n_illposed=n_illposed,
        robot_distances=distances,
        trials=trials,
        seed=seed,
        noise_scale=noise_scale,
        solver={
            "mean_iterations": float(np.mean(iterations)) if iterations else 0.0,
            "mean_final_cost": float(np.mean(costs)) if costs else None,
            "not_converged": int(not_converged),
        },
    )
    if report.has_illposed:
        logger.warning(
            "%s: %d ill-posed timestep(s) excluded from ALE/MLE: %s",
            plan.planner_name,
            len(report.illposed_timesteps),
            report.illposed_timesteps,
        )
    return report
