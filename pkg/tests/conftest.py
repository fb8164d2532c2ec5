import math

import numpy as np
import pytest

from src.localization.fim import LocalizabilityConstraints
from src.localization.network import MeasurementModel, NetworkSnapshot
from src.planning.environment import Environment, RectangleObstacle, build_roadmap
from src.utils.scenarios import RoadmapParams, Scenario

TRIVIAL = LocalizabilityConstraints(alpha=-math.inf, beta=0.0)

# anchors first: (-1, 0), (0, -1), (1, -1); non-anchors (0, 0) and (1, 0)
FIVE_ROBOT_POSITIONS = np.array(
    [[-1.0, 0.0], [0.0, -1.0], [1.0, -1.0], [0.0, 0.0], [1.0, 0.0]]
)


@pytest.fixture
def unit_model():
    return MeasurementModel(gamma=1, sigma=1.0, sensing_radius=6.0)


@pytest.fixture
def five_robot_network():
    """Two non-anchors whose FIM has the eigenvalues (3 -+ sqrt 5) / 2, 1, 1.

    The radius keeps exactly the NA edges 3-0, 3-1, 4-2, the NN edge 3-4 and
    the AA edge 1-2, with no pair at the boundary.
    """
    model = MeasurementModel(gamma=1, sigma=1.0, sensing_radius=1.2)
    return NetworkSnapshot(FIVE_ROBOT_POSITIONS, n_anchor=3), model


def grid_roadmap(width, height, spacing=1.0):
    """4-connected grid roadmap on an obstacle-free workspace."""
    env = Environment(
        bounds=RectangleObstacle((-1.0, -1.0), (width * spacing + 1.0, height * spacing + 1.0))
    )
    points = [(i * spacing, j * spacing) for j in range(height) for i in range(width)]
    return build_roadmap(env, n_samples=0, connection_radius=spacing * 1.01, extra_nodes=points)


@pytest.fixture
def make_grid():
    return grid_roadmap


def translated_formation(offset=(10.0, 0.0)):
    """Three anchors around one non-anchor, and the same formation shifted."""
    starts = ((2.0, 5.0), (4.0, 7.0), (4.0, 3.0), (3.5, 4.5))
    goals = tuple((x + offset[0], y + offset[1]) for x, y in starts)
    return starts, goals


def make_scenario(
    starts,
    goals,
    n_anchor=3,
    obstacles=(),
    bounds=((0.0, 0.0), (20.0, 10.0)),
    constraints=TRIVIAL,
    model=None,
    n_samples=300,
    connection_radius=2.0,
    skip=0,
    name="test",
):
    return Scenario(
        environment=Environment(
            bounds=RectangleObstacle(*bounds), obstacles=tuple(obstacles)
        ),
        starts=tuple(tuple(map(float, p)) for p in starts),
        goals=tuple(tuple(map(float, p)) for p in goals),
        n_anchor=n_anchor,
        model=model or MeasurementModel(gamma=1, sigma=1.0, sensing_radius=6.0),
        constraints=constraints,
        roadmap=RoadmapParams(
            n_samples=n_samples, connection_radius=connection_radius, halton_skip=skip
        ),
        name=name,
    )


@pytest.fixture
def scenario_factory():
    return make_scenario


@pytest.fixture
def formation_scenario():
    """A four-robot formation crossing an open workspace, E-opt bound 0.05."""
    starts, goals = translated_formation()
    return make_scenario(
        starts, goals, constraints=LocalizabilityConstraints(beta=0.05)
    )
