from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform

from src.utils.errors import DegenerateGeometryError


@dataclass(frozen=True)
class MeasurementModel:
    """Range sensor model.

    Args:
        gamma: 1 for Gaussian ranges, 2 for log-normal ranges
        sigma: standard deviation of the range noise (meters for gamma=1,
            log-units for gamma=2)
        sensing_radius: maximum distance at which a range is measured
    """

    gamma: int = 1
    sigma: float = 1.0
    sensing_radius: float = 6.0

    def __post_init__(self):
        if self.gamma not in (1, 2):
            raise ValueError(f"gamma must be 1 or 2, got {self.gamma}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.sensing_radius > 0.0:
            raise ValueError(
                f"sensing_radius must be positive, got {self.sensing_radius}"
            )


@dataclass(frozen=True, eq=False)
class NetworkSnapshot:
    """Positions of every robot at one timestep, anchors first.

    Args:
        positions: array of shape (n, d)
        n_anchor: number of anchors, i.e. robots 0..n_anchor-1
    """

    positions: np.ndarray
    n_anchor: int

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float)
        if positions.ndim != 2 or positions.shape[1] < 2:
            raise ValueError(
                f"positions must have shape (n, d) with d >= 2, got {positions.shape}"
            )
        if not np.all(np.isfinite(positions)):
            raise ValueError("positions must be finite")
        if not 0 <= self.n_anchor <= positions.shape[0]:
            raise ValueError(
                f"n_anchor={self.n_anchor} inconsistent with {positions.shape[0]} robots"
            )
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def n_robots(self) -> int:
        return self.positions.shape[0]

    @property
    def n_nonanchor(self) -> int:
        return self.n_robots - self.n_anchor

    def is_anchor(self, robot: int) -> bool:
        return robot < self.n_anchor

    def nonanchor_block(self, robot: int) -> int:
        """Index of the d-block of a non-anchor in the FIM."""
        if self.is_anchor(robot):
            raise ValueError(f"robot {robot} is an anchor and has no FIM block")
        return robot - self.n_anchor


class EdgeKind(str, Enum):
    NN = "NN"
    NA = "NA"
    AA = "AA"


@dataclass(frozen=True)
class MeasurementGraph:
    """Undirected measurement graph.

    Pairs are stored once; NA pairs carry the non-anchor first, the other kinds
    are stored with the smaller index first.
    """

    n_robots: int
    n_anchor: int
    edges: tuple[tuple[int, int], ...]
    kinds: tuple[EdgeKind, ...]
    _incident: dict[int, tuple[int, ...]] = field(repr=False, compare=False)

    def __iter__(self) -> Iterator[tuple[int, int, EdgeKind]]:
        for (i, j), kind in zip(self.edges, self.kinds):
            yield i, j, kind

    def __len__(self) -> int:
        return len(self.edges)

    def edges_of_kind(self, kind: EdgeKind) -> list[tuple[int, int]]:
        return [edge for edge, k in zip(self.edges, self.kinds) if k == kind]

    def has_edge(self, i: int, j: int) -> bool:
        return j in self._incident.get(i, ())

    def neighbors(self, robot: int) -> tuple[int, ...]:
        self._check_index(robot)
        return self._incident.get(robot, ())

    def neighbor_count(self, robot: int) -> int:
        """Number of incident edges of every kind."""
        return len(self.neighbors(robot))

    def localizing_neighbor_count(self, robot: int) -> int:
        """Number of incident NA and NN edges, the ones that carry information."""
        neighbors = self.neighbors(robot)
        if robot < self.n_anchor:
            return sum(1 for j in neighbors if j >= self.n_anchor)
        return len(neighbors)

    def _check_index(self, robot: int):
        if not 0 <= robot < self.n_robots:
            raise IndexError(f"robot {robot} out of range for {self.n_robots} robots")


def _edge_kind(i: int, j: int, n_anchor: int) -> EdgeKind:
    anchors = (i < n_anchor) + (j < n_anchor)
    return (EdgeKind.NN, EdgeKind.NA, EdgeKind.AA)[anchors]


def build_measurement_graph(
    snapshot: NetworkSnapshot,
    model: MeasurementModel,
    allow_coincident: bool = False,
) -> MeasurementGraph:
    """Pairs of robots within the sensing radius (boundary inclusive).

    Raises:
        DegenerateGeometryError: if two robots coincide and allow_coincident is False
    """
    n = snapshot.n_robots
    if n > 1:
        distances = squareform(pdist(snapshot.positions))
    else:
        distances = np.zeros((n, n))
    rows, cols = np.nonzero(np.triu(distances <= model.sensing_radius, k=1))

    edges, kinds = [], []
    incident: dict[int, list[int]] = {}
    for i, j in zip(rows.tolist(), cols.tolist()):
        if distances[i, j] == 0.0 and not allow_coincident:
            raise DegenerateGeometryError(f"robots {i} and {j} are coincident")
        kind = _edge_kind(i, j, snapshot.n_anchor)
        if kind == EdgeKind.NA:
            # non-anchor first
            i, j = j, i
        edges.append((i, j))
        kinds.append(kind)
        incident.setdefault(i, []).append(j)
        incident.setdefault(j, []).append(i)

    return MeasurementGraph(
        n_robots=n,
        n_anchor=snapshot.n_anchor,
        edges=tuple(edges),
        kinds=tuple(kinds),
        _incident={k: tuple(sorted(v)) for k, v in incident.items()},
    )


def neighbor_count(graph: MeasurementGraph, robot: int) -> int:
    return graph.neighbor_count(robot)


@dataclass(frozen=True)
class RangeObservation:
    i: int
    j: int
    measured_range: float


@dataclass(frozen=True)
class RangeObservationSet:
    observations: tuple[RangeObservation, ...]
    rng_seed: int

    def __len__(self) -> int:
        return len(self.observations)

    def __iter__(self) -> Iterator[RangeObservation]:
        return iter(self.observations)

    def counts_per_robot(self, n_robots: int) -> np.ndarray:
        counts = np.zeros(n_robots, dtype=int)
        for obs in self.observations:
            counts[obs.i] += 1
            counts[obs.j] += 1
        return counts


def simulate_ranges(
    snapshot: NetworkSnapshot,
    model: MeasurementModel,
    seed: int,
    noise_scale: float = 1.0,
    graph: Optional[MeasurementGraph] = None,
) -> RangeObservationSet:
    """Draw one noisy range per NA/NN edge of the measurement graph.

    Gaussian ranges (gamma=1) are L + e and are redrawn until positive;
    log-normal ranges (gamma=2) are L * exp(e), with e ~ Normal(0, sigma^2).
    noise_scale multiplies e, so noise_scale=0 yields the true ranges.
    """
    if graph is None:
        graph = build_measurement_graph(snapshot, model)
    rng = np.random.default_rng(seed)
    std = model.sigma * noise_scale

    observations = []
    for i, j, kind in graph:
        if kind == EdgeKind.AA:
            continue
        true_range = float(np.linalg.norm(snapshot.positions[i] - snapshot.positions[j]))
        if model.gamma == 1:
            measured = true_range + std * rng.standard_normal()
            while measured <= 0.0:
                measured = true_range + std * rng.standard_normal()
        else:
            measured = true_range * float(np.exp(std * rng.standard_normal()))
        observations.append(RangeObservation(i, j, float(measured)))

    if not observations:
        raise ValueError("measurement graph has no NA or NN edges to observe")
    return RangeObservationSet(observations=tuple(observations), rng_seed=seed)
