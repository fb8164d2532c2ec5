import copy
import json
import math

import numpy as np
import pytest

from src.localization.fim import LocalizabilityConstraints
from src.planning.lcgp import check_start_configuration
from src.utils.errors import ScenarioError, ScenarioValidationError
from src.utils.reference_scenarios import (
    REFERENCE_CASES,
    make_reference_scenarios,
    reference_scenario,
)
from src.utils.scenarios import (
    load_scenario,
    parse_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    validate_scenario_dict,
)


@pytest.fixture
def scenario_dict():
    return scenario_to_dict(reference_scenario("case2"))


def test_round_trip_keeps_content(scenario_dict, tmp_path):
    scenario = scenario_from_dict(scenario_dict)
    path = save_scenario(scenario, tmp_path / "case2.json")
    loaded = load_scenario(path)
    assert loaded.digest == scenario.digest
    assert loaded.environment == scenario.environment
    assert loaded.starts == scenario.starts
    assert loaded.constraints == scenario.constraints
    assert path.read_bytes().endswith(b"}\n")


def test_null_alpha_means_unbounded(scenario_dict):
    assert scenario_dict["constraints"]["alpha"] is None
    assert scenario_from_dict(scenario_dict).constraints.alpha == -math.inf
    scenario_dict["constraints"]["alpha"] = -25.0
    assert scenario_from_dict(scenario_dict).constraints.alpha == -25.0


def test_digest_tracks_content(scenario_dict):
    first = scenario_from_dict(scenario_dict).digest
    assert scenario_from_dict(copy.deepcopy(scenario_dict)).digest == first
    scenario_dict["seeds"]["noise"] = 99
    assert scenario_from_dict(scenario_dict).digest != first


class TestValidation:
    def test_missing_beta_names_the_field(self, scenario_dict):
        del scenario_dict["constraints"]["beta"]
        with pytest.raises(ScenarioValidationError) as excinfo:
            scenario_from_dict(scenario_dict)
        assert excinfo.value.diagnostics == ["constraints: 'beta' is a required property"]

    def test_every_violation_is_reported(self, scenario_dict):
        scenario_dict["model"]["gamma"] = 3
        scenario_dict["roadmap"]["n_samples"] = -1
        scenario_dict["environment"]["obstacles"][0]["type"] = "triangle"
        diagnostics = validate_scenario_dict(scenario_dict)
        assert len(diagnostics) == 3
        assert any(d.startswith("model.gamma: ") for d in diagnostics)
        assert any(d.startswith("roadmap.n_samples: ") for d in diagnostics)
        assert any(d.startswith("environment.obstacles.0: ") for d in diagnostics)

    def test_top_level_violation(self):
        assert validate_scenario_dict([]) == ["<root>: [] is not of type 'object'"]

    def test_json_syntax_error_reports_the_position(self):
        with pytest.raises(ScenarioValidationError) as excinfo:
            parse_scenario('{\n  "format_version": 1,\n  oops\n}')
        assert excinfo.value.diagnostics[0].startswith("line 3, column 3: ")

    def test_unknown_format_version(self, scenario_dict):
        scenario_dict["format_version"] = 2
        with pytest.raises(ScenarioValidationError):
            scenario_from_dict(scenario_dict)

    def test_anchor_count_exceeds_robots(self, scenario_dict):
        scenario_dict["robots"]["n_anchor"] = 9
        with pytest.raises(ScenarioError):
            scenario_from_dict(scenario_dict)

    def test_goal_inside_obstacle(self, scenario_dict):
        scenario_dict["robots"]["goals"][0] = [23.0, 12.0]
        with pytest.raises(ScenarioError):
            scenario_from_dict(scenario_dict)

    def test_mismatched_counts(self, scenario_dict):
        scenario_dict["robots"]["goals"].pop()
        with pytest.raises(ScenarioError):
            scenario_from_dict(scenario_dict)


class TestReferenceScenarios:
    @pytest.mark.parametrize(
        "name,n_robots,n_obstacles",
        [("case1", 6, 0), ("case2", 8, 2), ("case3", 8, 2), ("case4", 12, 2), ("case5", 20, 2)],
    )
    def test_case_layout(self, name, n_robots, n_obstacles):
        scenario = reference_scenario(name)
        assert scenario.n_robots == n_robots
        assert scenario.n_anchor == 3
        assert len(scenario.environment.obstacles) == n_obstacles
        assert scenario.constraints == LocalizabilityConstraints(alpha=-math.inf, beta=0.1)
        # the goal formation is the start formation translated
        shift = np.subtract(scenario.goals, scenario.starts)
        np.testing.assert_allclose(shift, np.broadcast_to(shift[0], shift.shape), atol=1e-8)

    @pytest.mark.parametrize("name", sorted(REFERENCE_CASES))
    def test_start_configuration_is_localizable(self, name):
        scenario = reference_scenario(name)
        check_start_configuration(scenario, scenario.constraints)

    def test_written_files_validate(self, tmp_path):
        paths = make_reference_scenarios(tmp_path)
        assert [p.name for p in paths] == [f"case{k}.json" for k in range(1, 6)]
        for path in paths:
            data = json.loads(path.read_text())
            assert validate_scenario_dict(data) == []
            assert load_scenario(path).digest == reference_scenario(path.stem).digest
