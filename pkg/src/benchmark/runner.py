from __future__ import annotations

import json
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Optional, Union

import pandas as pd
import wandb
import yaml
from tabulate import tabulate

from src.localization.evaluation import (
    EvaluationReport,
    evaluate_trajectory,
    write_metrics_csv,
)
from src.localization.fim import IndicatorCounter
from src.planning.baselines import (
    PotentialFieldGains,
    RRTParams,
    potential_field_baseline,
    prioritized_astar_baseline,
    prioritized_rrt_baseline,
)
from src.planning.lcgp import reorder_and_retry, sweep_localizability
from src.planning.trajectory import TrajectoryPlan
from src.utils.errors import PlanningFailure, ScenarioError
from src.utils.scenarios import PLANNERS, Scenario, load_scenario, scenario_from_dict
from src.visualization.visualize import export_trajectory_csv, log_trajectory

logger = logging.getLogger(__name__)

TOOL_VERSION = "0.1.0"
RUN_FORMAT_VERSION = 1
DEFAULT_SEEDS = 10

RUN_COLUMNS = [
    "scenario",
    "planner",
    "seed",
    "status",
    "failure_reason",
    "n_robots",
    "complexity",
    "orderings_tried",
    "horizon",
    "ale",
    "mle",
    "ad",
    "n_illposed_timesteps",
    "lc_satisfied_fraction",
    "indicator_calls",
    "disconnected_indicator_calls",
]
SUMMARY_COLUMNS = [
    "scenario",
    "planner",
    "n_robots",
    "complexity",
    "runs",
    "successes",
    "orderings_tried",
    "ale",
    "mle",
    "ad",
    "lc_satisfied_fraction",
]
TIMING_COLUMNS = ["scenario", "planner", "seed", "planning_time"]


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    text = frame.to_csv(index=False, float_format="%.9g", na_rep="", lineterminator="\n")
    return atomic_write_text(path, text)


@dataclass
class RunRecord:
    """One planner run on one scenario, with everything needed to recompute
    its metrics (scenario content and seeds)."""

    scenario: dict[str, Any]
    scenario_digest: str
    planner: str
    seed: int
    plan: TrajectoryPlan
    evaluation: Optional[dict[str, Any]] = None
    lc_satisfied_fraction: Optional[float] = None
    indicator: dict[str, int] = field(default_factory=dict)
    tool_version: str = TOOL_VERSION

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": RUN_FORMAT_VERSION,
            "tool_version": self.tool_version,
            "scenario_digest": self.scenario_digest,
            "scenario": self.scenario,
            "planner": self.planner,
            "seed": self.seed,
            "planning_time": self.plan.planning_time,
            "orderings_tried": self.plan.orderings_tried,
            "lc_satisfied_fraction": self.lc_satisfied_fraction,
            "indicator": self.indicator,
            "plan": self.plan.to_dict(),
            "evaluation": self.evaluation,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunRecord:
        if data.get("format_version") != RUN_FORMAT_VERSION:
            raise ScenarioError(f"unsupported run format {data.get('format_version')!r}")
        try:
            return cls(
                scenario=data["scenario"],
                scenario_digest=data["scenario_digest"],
                planner=data["planner"],
                seed=int(data["seed"]),
                plan=TrajectoryPlan.from_dict(data["plan"]),
                evaluation=data.get("evaluation"),
                lc_satisfied_fraction=data.get("lc_satisfied_fraction"),
                indicator=dict(data.get("indicator") or {}),
                tool_version=data.get("tool_version", TOOL_VERSION),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"malformed run file: {exc!r}") from exc

    def save(self, path: Union[str, Path]) -> Path:
        return atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> RunRecord:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ScenarioError(
                f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
        return cls.from_dict(data)


def run_planner(
    scenario: Scenario,
    planner: str,
    seed: int,
    counter: Optional[IndicatorCounter] = None,
    max_orderings: Optional[int] = None,
) -> TrajectoryPlan:
    """Run one planner; planning_time includes building the roadmap."""
    if planner not in PLANNERS:
        raise ValueError(f"unknown planner {planner!r}")
    params = scenario.planner.params if scenario.planner.name == planner else {}
    start_time = time.perf_counter()
    try:
        rrt_params = RRTParams(**params) if planner == "rrt" else None
        gains = PotentialFieldGains(**params) if planner == "potential_field" else None
    except TypeError as exc:
        raise ScenarioError(f"invalid {planner} parameters: {exc}") from exc

    if planner == "lcgp":
        roadmap = scenario.build_roadmap()
        plan = reorder_and_retry(
            scenario,
            roadmap,
            scenario.constraints,
            max_orderings or scenario.max_orderings,
            seed,
            max_horizon=params.get("max_horizon"),
            counter=counter,
        )
    elif planner == "astar":
        roadmap = scenario.build_roadmap()
        plan = prioritized_astar_baseline(scenario, roadmap)
    elif planner == "rrt":
        plan = prioritized_rrt_baseline(scenario, seed, rrt_params)
    else:
        plan = potential_field_baseline(scenario, scenario.model, gains, seed)

    plan.planning_time = time.perf_counter() - start_time
    return plan


def lc_satisfied_fraction(plan: TrajectoryPlan, scenario: Scenario) -> Optional[float]:
    """Share of timesteps whose full network meets the scenario's constraints."""
    if not plan.success:
        return None
    sweep = sweep_localizability(
        plan.positions, scenario.n_anchor, scenario.model, scenario.constraints
    )
    return sweep.satisfied_fraction


def _default_run_path(config, scenario: Scenario, planner: str, seed: int) -> Path:
    return Path(config["output_dir"]) / f"{scenario.name}_{planner}_seed{seed}.json"


def run_plan(config) -> RunRecord:
    """Plan one scenario file and write the run JSON plus the trajectory CSV.

    Raises:
        PlanningFailure: after the run file is written, if the planner failed
    """
    scenario = load_scenario(config["scenario_file"])
    planner = config.get("planner") or scenario.planner.name
    seed = config["seed"] if config.get("seed") is not None else scenario.planner_seed
    counter = IndicatorCounter()
    plan = run_planner(scenario, planner, seed, counter, config.get("max_orderings"))
    if not config.get("dump_sets"):
        plan.metadata.pop("set_sizes", None)

    record = RunRecord(
        scenario=scenario.to_dict(),
        scenario_digest=scenario.digest,
        planner=planner,
        seed=seed,
        plan=plan,
        lc_satisfied_fraction=lc_satisfied_fraction(plan, scenario),
        indicator={
            "calls": counter.calls,
            "disconnected_calls": counter.disconnected_calls,
        },
    )
    out = Path(config.get("out") or _default_run_path(config, scenario, planner, seed))
    record.save(out)
    logger.info("run written to %s", out)
    wandb.log(
        {
            "success": int(plan.success),
            "planning_time": plan.planning_time,
            "orderings_tried": plan.orderings_tried,
        }
    )

    if not plan.success:
        raise PlanningFailure(plan.failure_reason, details=plan.metadata)
    trajectory_path = out.with_name(out.stem + "_trajectory.csv")
    export_trajectory_csv(plan, scenario.n_anchor, trajectory_path)
    log_trajectory(plan, scenario.n_anchor)
    logger.info(
        "%s: horizon %d, orderings tried %d, %.3f s",
        planner,
        plan.horizon,
        plan.orderings_tried,
        plan.planning_time,
    )
    return record


def run_evaluate(config) -> EvaluationReport:
    """Evaluate a run file; writes <out>.csv and <out>.json."""
    run_file = Path(config["run_file"])
    record = RunRecord.load(run_file)
    if not record.plan.success or record.plan.positions.size == 0:
        raise ScenarioError(f"{run_file} holds no successful trajectory")
    scenario = scenario_from_dict(record.scenario)

    trials = config.get("trials") or scenario.trials
    noise_seed = (
        config["noise_seed"] if config.get("noise_seed") is not None else scenario.noise_seed
    )
    report = evaluate_trajectory(
        record.plan,
        scenario,
        scenario.model,
        noise_seed,
        trials,
        noise_scale=0.0 if config.get("zero_noise") else 1.0,
    )

    prefix = Path(config.get("out") or run_file.with_name(run_file.stem + "_metrics"))
    write_metrics_csv(report, prefix.with_suffix(".csv"))
    atomic_write_text(
        prefix.with_suffix(".json"),
        json.dumps(
            {
                "format_version": RUN_FORMAT_VERSION,
                "run_file": str(run_file),
                "scenario_digest": record.scenario_digest,
                "planner": record.planner,
                "metrics": report.to_dict(),
            },
            indent=2,
        )
        + "\n",
    )
    wandb.log({"ale": report.ale, "mle": report.mle, "ad": report.ad})
    logger.info(
        "ALE %.4f  MLE %.4f  AD %.3f (%d trials)", report.ale, report.mle, report.ad, trials
    )
    return report


def load_suite(path: Union[str, Path]) -> dict[str, Any]:
    """Suite YAML: ``scenarios`` (paths relative to the suite file), optional
    ``planners`` and ``seeds``."""
    path = Path(path)
    try:
        suite = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    scenarios = suite.get("scenarios")
    if not isinstance(scenarios, list) or not scenarios:
        raise ScenarioError(f"{path}: 'scenarios' must list at least one scenario file")
    planners = suite.get("planners") or list(PLANNERS)
    unknown = set(planners) - set(PLANNERS)
    if unknown:
        raise ScenarioError(f"{path}: unknown planners {sorted(unknown)}")
    return {
        "scenarios": [str((path.parent / s).resolve()) for s in scenarios],
        "planners": list(planners),
        "seeds": suite.get("seeds"),
    }


def _run_cell(cell: dict[str, Any]) -> dict[str, Any]:
    """Plan and evaluate one (scenario, planner, seed); never raises."""
    label = Path(cell["scenario_file"]).stem
    row: dict[str, Any] = {
        "scenario": label,
        "planner": cell["planner"],
        "seed": cell["seed"],
    }
    try:
        scenario = load_scenario(cell["scenario_file"])
    except ScenarioError as exc:
        logger.error("%s: %s", label, exc)
        row.update(status="error", failure_reason=str(exc).splitlines()[0])
        return {"row": row, "planning_time": math.nan}

    counter = IndicatorCounter()
    try:
        plan = run_planner(scenario, cell["planner"], cell["seed"], counter)
    except ScenarioError as exc:
        logger.error("%s/%s: %s", label, cell["planner"], exc)
        row.update(status="error", failure_reason=str(exc))
        return {"row": row, "planning_time": math.nan}

    row.update(
        status="ok" if plan.success else "failed",
        failure_reason=plan.failure_reason.value if plan.failure_reason else None,
        n_robots=scenario.n_robots,
        complexity=scenario.environment.complexity.value,
        orderings_tried=plan.orderings_tried if plan.success else None,
        indicator_calls=counter.calls,
        disconnected_indicator_calls=counter.disconnected_calls,
    )
    evaluation = None
    fraction = lc_satisfied_fraction(plan, scenario)
    if plan.success:
        trials = cell.get("trials") or scenario.trials
        report = evaluate_trajectory(
            plan, scenario, scenario.model, scenario.noise_seed + cell["seed"], trials
        )
        evaluation = report.to_dict()
        row.update(
            horizon=plan.horizon,
            ale=report.ale,
            mle=report.mle,
            ad=report.ad,
            n_illposed_timesteps=len(report.illposed_timesteps),
            lc_satisfied_fraction=fraction,
        )

    plan.metadata.pop("set_sizes", None)
    record = RunRecord(
        scenario=scenario.to_dict(),
        scenario_digest=scenario.digest,
        planner=cell["planner"],
        seed=cell["seed"],
        plan=plan,
        evaluation=evaluation,
        lc_satisfied_fraction=fraction,
        indicator={"calls": counter.calls, "disconnected_calls": counter.disconnected_calls},
    )
    run_name = f"{label}_{cell['planner']}_seed{cell['seed']}.json"
    record.save(Path(cell["output_dir"]) / "runs" / run_name)
    logger.info(
        "%s/%s/seed %d: %s", label, cell["planner"], cell["seed"], row["status"]
    )
    return {"row": row, "planning_time": plan.planning_time}


def _first_known(column: pd.Series):
    known = column.dropna()
    return known.iloc[0] if len(known) else None


def summarize(runs: pd.DataFrame) -> pd.DataFrame:
    """Medians over the successful seeds of every (scenario, planner)."""
    rows = []
    for (scenario, planner), group in runs.groupby(["scenario", "planner"], sort=False):
        ok = group[group["status"] == "ok"]
        row = {
            "scenario": scenario,
            "planner": planner,
            "n_robots": _first_known(group["n_robots"]),
            "complexity": _first_known(group["complexity"]),
            "runs": len(group),
            "successes": len(ok),
        }
        for column in ("orderings_tried", "ale", "mle", "ad", "lc_satisfied_fraction"):
            row[column] = ok[column].astype(float).median() if len(ok) else math.nan
        rows.append(row)
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def run_benchmark(config) -> pd.DataFrame:
    """Run every scenario x planner x seed cell and write runs.csv,
    summary.csv and timings.csv to the output directory."""
    suite = load_suite(config["suite_file"])
    n_seeds = config.get("seeds") or suite["seeds"] or DEFAULT_SEEDS
    planners = config.get("planners") or suite["planners"]
    output_dir = Path(config["output_dir"])
    cells = [
        {
            "scenario_file": scenario_file,
            "planner": planner,
            "seed": seed,
            "trials": config.get("trials"),
            "output_dir": str(output_dir),
        }
        for scenario_file in suite["scenarios"]
        for planner in planners
        for seed in range(n_seeds)
    ]
    logger.info("benchmark: %d cells on %d worker(s)", len(cells), config["threads"])

    if config["threads"] > 1:
        with Pool(processes=config["threads"]) as pool:
            results = pool.map(_run_cell, cells)
    else:
        results = [_run_cell(cell) for cell in cells]

    runs = pd.DataFrame([result["row"] for result in results], columns=RUN_COLUMNS)
    summary = summarize(runs)
    timings = pd.DataFrame(
        [
            {
                "scenario": result["row"]["scenario"],
                "planner": result["row"]["planner"],
                "seed": result["row"]["seed"],
                "planning_time": result["planning_time"],
            }
            for result in results
        ],
        columns=TIMING_COLUMNS,
    )
    write_csv(runs, output_dir / "runs.csv")
    write_csv(summary, output_dir / "summary.csv")
    write_csv(timings, output_dir / "timings.csv")

    print(
        tabulate(
            summary, headers="keys", tablefmt="github", showindex=False, floatfmt=".4g"
        )
    )
    wandb.log({"summary": wandb.Table(dataframe=summary)})
    failures = runs[runs["status"] != "ok"]
    if len(failures):
        logger.warning("%d of %d cells did not succeed", len(failures), len(runs))
    return summary
