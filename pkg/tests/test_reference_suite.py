# Long-running checks over the five reference scenarios; deselect with
# pytest -m "not slow".
from functools import lru_cache

import numpy as np
import pytest

from src.benchmark.runner import run_planner
from src.localization.evaluation import evaluate_trajectory
from src.localization.fim import IndicatorCounter
from src.planning.baselines import potential_field_baseline
from src.planning.lcgp import sweep_localizability
from src.utils.errors import FailureReason
from src.utils.reference_scenarios import REFERENCE_CASES, reference_scenario

pytestmark = pytest.mark.slow

SOUNDNESS_SEEDS = range(5)
TREND_SEEDS = range(10)


@lru_cache(maxsize=None)
def planned(name, planner, seed):
    scenario = reference_scenario(name)
    counter = IndicatorCounter()
    plan = run_planner(scenario, planner, seed, counter)
    return scenario, plan, counter


@pytest.mark.parametrize("name", sorted(REFERENCE_CASES))
def test_lcgp_plans_hold_the_bound_at_every_timestep(name):
    successes = 0
    for seed in SOUNDNESS_SEEDS:
        scenario, plan, counter = planned(name, "lcgp", seed)
        assert counter.disconnected_calls == 0
        if not plan.success:
            continue
        successes += 1
        sweep = sweep_localizability(
            plan.positions, scenario.n_anchor, scenario.model, scenario.constraints
        )
        assert sweep.violations() == []
        assert min(report.e_opt for report in sweep.reports) >= scenario.constraints.beta
    assert successes > 0


def test_lcgp_localizes_better_than_rrt_on_the_high_complexity_case():
    metrics = {"lcgp": {"mle": [], "ad": []}, "rrt": {"mle": [], "ad": []}}
    for planner, values in metrics.items():
        for seed in TREND_SEEDS:
            scenario, plan, _ = planned("case3", planner, seed)
            if not plan.success:
                continue
            report = evaluate_trajectory(
                plan, scenario, scenario.model, scenario.noise_seed + seed, scenario.trials
            )
            values["mle"].append(report.mle)
            values["ad"].append(report.ad)

    for values in metrics.values():
        assert len(values["mle"]) > 0
    assert np.nanmedian(metrics["lcgp"]["mle"]) < np.nanmedian(metrics["rrt"]["mle"])
    assert np.median(metrics["lcgp"]["ad"]) < np.median(metrics["rrt"]["ad"])


def test_potential_field_fails_only_among_obstacles():
    open_case = reference_scenario("case1")
    assert potential_field_baseline(open_case, open_case.model).success

    for name in ("case2", "case3"):
        scenario = reference_scenario(name)
        plan = potential_field_baseline(scenario, scenario.model)
        assert not plan.success
        assert plan.failure_reason == FailureReason.LOCAL_MINIMUM
