from __future__ import annotations

import math
from pathlib import Path
from typing import Union

import numpy as np

from src.localization.fim import LocalizabilityConstraints
from src.localization.network import MeasurementModel
from src.planning.environment import (
    CircleObstacle,
    Complexity,
    Environment,
    RectangleObstacle,
)
from src.utils.scenarios import RoadmapParams, Scenario, save_scenario

N_ANCHOR = 3
BETA = 0.1
# The formations are tuned to sigma = 0.5: at sigma = 1 the case1 start
# formation has lambda_min near 0.07, below BETA.
MODEL = MeasurementModel(gamma=1, sigma=0.5, sensing_radius=6.0)

SMALL_OBSTACLES = (
    RectangleObstacle((22.0, 11.0), (24.0, 13.0)),
    CircleObstacle((38.0, 9.5), 1.2),
)
LARGE_OBSTACLES = (
    RectangleObstacle((30.0, 14.0), (36.0, 28.0)),
    RectangleObstacle((60.0, 12.0), (66.0, 26.0)),
)

REFERENCE_CASES = {
    "case1": {
        "n_robots": 6,
        "complexity": Complexity.LOW,
        "bounds": ((0.0, 0.0), (50.0, 20.0)),
        "obstacles": (),
        "start_center": (7.0, 10.0),
        "goal_center": (43.0, 10.0),
        "rings": ((2.5, 6),),
        "n_samples": 1000,
    },
    "case2": {
        "n_robots": 8,
        "complexity": Complexity.MEDIUM,
        "bounds": ((0.0, 0.0), (60.0, 24.0)),
        "obstacles": SMALL_OBSTACLES,
        "start_center": (8.0, 12.0),
        "goal_center": (53.0, 12.0),
        "rings": ((2.8, 8),),
        "n_samples": 1500,
    },
    "case3": {
        "n_robots": 8,
        "complexity": Complexity.HIGH,
        "bounds": ((0.0, 0.0), (100.0, 40.0)),
        "obstacles": LARGE_OBSTACLES,
        "start_center": (10.0, 20.0),
        "goal_center": (88.0, 20.0),
        "rings": ((2.8, 8),),
        "n_samples": 2500,
    },
    "case4": {
        "n_robots": 12,
        "complexity": Complexity.HIGH,
        "bounds": ((0.0, 0.0), (100.0, 40.0)),
        "obstacles": LARGE_OBSTACLES,
        "start_center": (10.0, 20.0),
        "goal_center": (88.0, 20.0),
        "rings": ((2.9, 12),),
        "n_samples": 2500,
    },
    "case5": {
        "n_robots": 20,
        "complexity": Complexity.HIGH,
        "bounds": ((0.0, 0.0), (100.0, 40.0)),
        "obstacles": LARGE_OBSTACLES,
        "start_center": (10.0, 20.0),
        "goal_center": (88.0, 20.0),
        "rings": ((2.9, 12), (1.5, 8)),
        "n_samples": 2500,
    },
}


def ring_formation(center, rings) -> np.ndarray:
    """Robots evenly spaced on concentric rings, anchors first.

    The anchors sit at 0, 120 and 240 degrees on the outer ring; the robot at
    0 degrees leads the formation along +x.
    """
    outer_radius, outer_count = rings[0]
    outer = [
        (outer_radius, 2.0 * math.pi * k / outer_count) for k in range(outer_count)
    ]
    anchor_slots = [round(k * outer_count / N_ANCHOR) for k in range(N_ANCHOR)]
    ordered = [outer[k] for k in anchor_slots] + [
        polar for k, polar in enumerate(outer) if k not in anchor_slots
    ]
    for radius, count in rings[1:]:
        offset = math.pi / count
        ordered += [(radius, offset + 2.0 * math.pi * k / count) for k in range(count)]

    cx, cy = center
    return np.array(
        [(cx + r * math.cos(angle), cy + r * math.sin(angle)) for r, angle in ordered]
    )


def reference_scenario(name: str) -> Scenario:
    case = REFERENCE_CASES[name]
    starts = ring_formation(case["start_center"], case["rings"])
    shift = np.subtract(case["goal_center"], case["start_center"])
    goals = starts + shift
    if len(starts) != case["n_robots"]:
        raise ValueError(f"{name}: ring layout has {len(starts)} robots")
    lower, upper = case["bounds"]
    return Scenario(
        environment=Environment(
            bounds=RectangleObstacle(lower, upper),
            obstacles=case["obstacles"],
            complexity=case["complexity"],
        ),
        starts=tuple((round(float(x), 9), round(float(y), 9)) for x, y in starts),
        goals=tuple((round(float(x), 9), round(float(y), 9)) for x, y in goals),
        n_anchor=N_ANCHOR,
        model=MODEL,
        constraints=LocalizabilityConstraints(alpha=-math.inf, beta=BETA),
        roadmap=RoadmapParams(n_samples=case["n_samples"], connection_radius=2.0),
        name=name,
    )


def reference_scenarios() -> list[Scenario]:
    return [reference_scenario(name) for name in REFERENCE_CASES]


def make_reference_scenarios(out_dir: Union[str, Path]) -> list[Path]:
    """Write case1.json .. case5.json into out_dir."""
    out_dir = Path(out_dir)
    return [
        save_scenario(scenario, out_dir / f"{scenario.name}.json")
        for scenario in reference_scenarios()
    ]
