from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

from jsonschema import Draft7Validator

from src.localization.fim import LocalizabilityConstraints
from src.localization.network import MeasurementModel
from src.planning.environment import (
    CircleObstacle,
    Complexity,
    Environment,
    RectangleObstacle,
    Roadmap,
    build_roadmap,
)
from src.utils.errors import ScenarioError, ScenarioValidationError

FORMAT_VERSION = 1
PLANNERS = ("lcgp", "astar", "rrt", "potential_field")

_POINT = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}

SCENARIO_SCHEMA: dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": [
        "format_version",
        "environment",
        "robots",
        "model",
        "constraints",
        "roadmap",
    ],
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "name": {"type": "string"},
        "environment": {
            "type": "object",
            "required": ["bounds"],
            "properties": {
                "bounds": {
                    "type": "object",
                    "required": ["min", "max"],
                    "properties": {"min": _POINT, "max": _POINT},
                },
                "obstacles": {
                    "type": "array",
                    "items": {
                        "oneOf": [
                            {
                                "type": "object",
                                "required": ["type", "min", "max"],
                                "properties": {
                                    "type": {"const": "rectangle"},
                                    "min": _POINT,
                                    "max": _POINT,
                                },
                                "additionalProperties": False,
                            },
                            {
                                "type": "object",
                                "required": ["type", "center", "radius"],
                                "properties": {
                                    "type": {"const": "circle"},
                                    "center": _POINT,
                                    "radius": {"type": "number", "exclusiveMinimum": 0},
                                },
                                "additionalProperties": False,
                            },
                        ]
                    },
                },
                "complexity": {"enum": [c.value for c in Complexity]},
            },
        },
        "robots": {
            "type": "object",
            "required": ["starts", "goals", "n_anchor"],
            "properties": {
                "starts": {"type": "array", "items": _POINT, "minItems": 1},
                "goals": {"type": "array", "items": _POINT, "minItems": 1},
                "n_anchor": {"type": "integer", "minimum": 0},
            },
        },
        "model": {
            "type": "object",
            "required": ["gamma", "sigma", "rho"],
            "properties": {
                "gamma": {"enum": [1, 2]},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "rho": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "constraints": {
            "type": "object",
            "required": ["alpha", "beta"],
            "properties": {
                "alpha": {"type": ["number", "null"]},
                "beta": {"type": "number", "minimum": 0},
            },
        },
        "roadmap": {
            "type": "object",
            "required": ["n_samples", "connection_radius"],
            "properties": {
                "n_samples": {"type": "integer", "minimum": 0},
                "connection_radius": {"type": "number", "exclusiveMinimum": 0},
                "halton": {
                    "type": "object",
                    "properties": {
                        "bases": {
                            "type": "array",
                            "items": {"type": "integer", "minimum": 2},
                            "minItems": 2,
                            "maxItems": 2,
                        },
                        "skip": {"type": "integer", "minimum": 0},
                    },
                },
            },
        },
        "planner": {
            "type": "object",
            "required": ["name"],
            "properties": {
                "name": {"enum": list(PLANNERS)},
                "params": {"type": "object"},
            },
        },
        "seeds": {
            "type": "object",
            "properties": {
                "planner": {"type": "integer", "minimum": 0},
                "noise": {"type": "integer", "minimum": 0},
            },
        },
        "max_orderings": {"type": "integer", "minimum": 1},
        "trials": {"type": "integer", "minimum": 1},
    },
}


@dataclass(frozen=True)
class RoadmapParams:
    n_samples: int = 1000
    connection_radius: float = 2.0
    halton_bases: tuple[int, int] = (2, 3)
    halton_skip: int = 0


@dataclass(frozen=True)
class PlannerConfig:
    name: str = "lcgp"
    params: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to plan and evaluate one experiment.

    starts and goals are (x, y) tuples in robot order, anchors first.
    """

    environment: Environment
    starts: tuple[tuple[float, float], ...]
    goals: tuple[tuple[float, float], ...]
    n_anchor: int
    model: MeasurementModel
    constraints: LocalizabilityConstraints
    roadmap: RoadmapParams = RoadmapParams()
    planner: PlannerConfig = PlannerConfig()
    planner_seed: int = 0
    noise_seed: int = 0
    max_orderings: int = 10
    trials: int = 10
    name: str = "scenario"

    def __post_init__(self):
        if len(self.starts) != len(self.goals):
            raise ScenarioError(
                f"{len(self.starts)} starts but {len(self.goals)} goals"
            )
        if not 0 <= self.n_anchor <= len(self.starts):
            raise ScenarioError(
                f"n_anchor={self.n_anchor} inconsistent with {len(self.starts)} robots"
            )
        for kind, points in (("start", self.starts), ("goal", self.goals)):
            for robot, point in enumerate(points):
                if not self.environment.is_free(point):
                    raise ScenarioError(
                        f"{kind} of robot {robot} at {point} is not collision-free"
                    )
            if len(set(points)) != len(points):
                raise ScenarioError(f"two robots share a {kind} position")

    @property
    def n_robots(self) -> int:
        return len(self.starts)

    def build_roadmap(self) -> Roadmap:
        """Shared roadmap with every start and goal inserted as a node."""
        return build_roadmap(
            self.environment,
            n_samples=self.roadmap.n_samples,
            connection_radius=self.roadmap.connection_radius,
            extra_nodes=list(self.starts) + list(self.goals),
            bases=self.roadmap.halton_bases,
            skip=self.roadmap.halton_skip,
        )

    def to_dict(self) -> dict[str, Any]:
        return scenario_to_dict(self)

    @property
    def digest(self) -> str:
        return scenario_digest(self)


def _point(values) -> tuple[float, float]:
    return (float(values[0]), float(values[1]))


def _obstacle_from_dict(data: dict[str, Any]):
    if data["type"] == "rectangle":
        return RectangleObstacle(_point(data["min"]), _point(data["max"]))
    return CircleObstacle(_point(data["center"]), float(data["radius"]))


def validate_scenario_dict(data: Any) -> list[str]:
    """Schema diagnostics, one ``field.path: message`` per violation."""
    validator = Draft7Validator(SCENARIO_SCHEMA)
    diagnostics = []
    for error in sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path)):
        location = ".".join(str(part) for part in error.absolute_path) or "<root>"
        diagnostics.append(f"{location}: {error.message}")
    return diagnostics


def scenario_from_dict(data: dict[str, Any]) -> Scenario:
    diagnostics = validate_scenario_dict(data)
    if diagnostics:
        raise ScenarioValidationError(diagnostics)

    env_data = data["environment"]
    bounds = env_data["bounds"]
    try:
        environment = Environment(
            bounds=RectangleObstacle(_point(bounds["min"]), _point(bounds["max"])),
            obstacles=tuple(_obstacle_from_dict(o) for o in env_data.get("obstacles", [])),
            complexity=Complexity(env_data.get("complexity", Complexity.LOW.value)),
        )
        model = MeasurementModel(
            gamma=int(data["model"]["gamma"]),
            sigma=float(data["model"]["sigma"]),
            sensing_radius=float(data["model"]["rho"]),
        )
        alpha = data["constraints"]["alpha"]
        constraints = LocalizabilityConstraints(
            alpha=-math.inf if alpha is None else float(alpha),
            beta=float(data["constraints"]["beta"]),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc

    roadmap = data["roadmap"]
    halton = roadmap.get("halton", {})
    planner = data.get("planner", {"name": "lcgp"})
    seeds = data.get("seeds", {})
    return Scenario(
        environment=environment,
        starts=tuple(_point(p) for p in data["robots"]["starts"]),
        goals=tuple(_point(p) for p in data["robots"]["goals"]),
        n_anchor=int(data["robots"]["n_anchor"]),
        model=model,
        constraints=constraints,
        roadmap=RoadmapParams(
            n_samples=int(roadmap["n_samples"]),
            connection_radius=float(roadmap["connection_radius"]),
            halton_bases=tuple(halton.get("bases", (2, 3))),
            halton_skip=int(halton.get("skip", 0)),
        ),
        planner=PlannerConfig(planner["name"], dict(planner.get("params", {}))),
        planner_seed=int(seeds.get("planner", 0)),
        noise_seed=int(seeds.get("noise", 0)),
        max_orderings=int(data.get("max_orderings", 10)),
        trials=int(data.get("trials", 10)),
        name=data.get("name", "scenario"),
    )


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    env = scenario.environment
    alpha = scenario.constraints.alpha
    return {
        "format_version": FORMAT_VERSION,
        "name": scenario.name,
        "environment": {
            "bounds": {"min": list(env.bounds.lower), "max": list(env.bounds.upper)},
            "obstacles": [obstacle.to_dict() for obstacle in env.obstacles],
            "complexity": env.complexity.value,
        },
        "robots": {
            "starts": [list(p) for p in scenario.starts],
            "goals": [list(p) for p in scenario.goals],
            "n_anchor": scenario.n_anchor,
        },
        "model": {
            "gamma": scenario.model.gamma,
            "sigma": scenario.model.sigma,
            "rho": scenario.model.sensing_radius,
        },
        "constraints": {
            "alpha": None if alpha == -math.inf else alpha,
            "beta": scenario.constraints.beta,
        },
        "roadmap": {
            "n_samples": scenario.roadmap.n_samples,
            "connection_radius": scenario.roadmap.connection_radius,
            "halton": {
                "bases": list(scenario.roadmap.halton_bases),
                "skip": scenario.roadmap.halton_skip,
            },
        },
        "planner": {"name": scenario.planner.name, "params": dict(scenario.planner.params)},
        "seeds": {"planner": scenario.planner_seed, "noise": scenario.noise_seed},
        "max_orderings": scenario.max_orderings,
        "trials": scenario.trials,
    }


def scenario_digest(scenario: Scenario) -> str:
    canonical = json.dumps(scenario_to_dict(scenario), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_scenario(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioValidationError(
            [f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]
        ) from exc
    return scenario_from_dict(data)


def load_scenario(path: Union[str, Path]) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fd:
        json.dump(scenario_to_dict(scenario), fd, indent=2)
        fd.write("\n")
    return path

