from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from src.utils.errors import ScenarioError

logger = logging.getLogger(__name__)

DETERMINANT_TOLERANCE = 1e-12


class Complexity(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


@dataclass(frozen=True)
class RectangleObstacle:
    """Closed axis-aligned rectangle [lower, upper]."""

    lower: tuple[float, float]
    upper: tuple[float, float]

    def __post_init__(self):
        if not all(lo < hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"degenerate rectangle {self.lower} -> {self.upper}")

    def contains(self, point: Sequence[float]) -> bool:
        return all(lo <= p <= hi for p, lo, hi in zip(point, self.lower, self.upper))

    def intersects_segment(self, p: Sequence[float], q: Sequence[float]) -> bool:
        # Liang-Barsky clipping with closed slabs.
        t_enter, t_exit = 0.0, 1.0
        for axis in range(2):
            start = p[axis]
            delta = q[axis] - p[axis]
            lo, hi = self.lower[axis], self.upper[axis]
            if abs(delta) <= DETERMINANT_TOLERANCE:
                if start < lo or start > hi:
                    return False
                continue
            t0 = (lo - start) / delta
            t1 = (hi - start) / delta
            if t0 > t1:
                t0, t1 = t1, t0
            t_enter = max(t_enter, t0)
            t_exit = min(t_exit, t1)
            if t_enter > t_exit + DETERMINANT_TOLERANCE:
                return False
        return True

    def distance(self, point: Sequence[float]) -> tuple[float, np.ndarray]:
        """Distance to the rectangle and the closest point on it."""
        closest = np.clip(np.asarray(point, dtype=float), self.lower, self.upper)
        return float(np.linalg.norm(np.asarray(point) - closest)), closest

    def to_dict(self) -> dict:
        return {"type": "rectangle", "min": list(self.lower), "max": list(self.upper)}


@dataclass(frozen=True)
class CircleObstacle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError(f"circle radius must be positive, got {self.radius}")

    def contains(self, point: Sequence[float]) -> bool:
        return math.dist(point, self.center) <= self.radius

    def intersects_segment(self, p: Sequence[float], q: Sequence[float]) -> bool:
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        c = np.asarray(self.center, dtype=float)
        direction = q - p
        length_sq = float(direction @ direction)
        if length_sq <= DETERMINANT_TOLERANCE:
            closest = p
        else:
            t = float(np.clip((c - p) @ direction / length_sq, 0.0, 1.0))
            closest = p + t * direction
        return float(np.linalg.norm(closest - c)) <= self.radius + DETERMINANT_TOLERANCE

    def distance(self, point: Sequence[float]) -> tuple[float, np.ndarray]:
        offset = np.asarray(point, dtype=float) - self.center
        norm = float(np.linalg.norm(offset))
        if norm == 0.0:
            return 0.0, np.asarray(point, dtype=float)
        closest = np.asarray(self.center) + offset * min(1.0, self.radius / norm)
        return max(0.0, norm - self.radius), closest

    def to_dict(self) -> dict:
        return {"type": "circle", "center": list(self.center), "radius": self.radius}


Obstacle = Union[RectangleObstacle, CircleObstacle]


def segment_obstacle_intersect(
    p: Sequence[float], q: Sequence[float], obstacle: Obstacle
) -> bool:
    """True iff the closed segment pq touches the closed obstacle."""
    return obstacle.intersects_segment(p, q)


@dataclass(frozen=True)
class Environment:
    bounds: RectangleObstacle
    obstacles: tuple[Obstacle, ...] = ()
    complexity: Complexity = Complexity.LOW

    def __post_init__(self):
        for obstacle in self.obstacles:
            if isinstance(obstacle, RectangleObstacle):
                corners = (obstacle.lower, obstacle.upper)
            else:
                cx, cy = obstacle.center
                r = obstacle.radius
                corners = ((cx - r, cy - r), (cx + r, cy + r))
            if not all(self.bounds.contains(corner) for corner in corners):
                raise ScenarioError(f"obstacle {obstacle} leaves the workspace bounds")

    @property
    def size(self) -> np.ndarray:
        return np.asarray(self.bounds.upper) - np.asarray(self.bounds.lower)

    def is_free(self, point: Sequence[float]) -> bool:
        return self.bounds.contains(point) and not any(
            obstacle.contains(point) for obstacle in self.obstacles
        )

    def segment_is_free(self, p: Sequence[float], q: Sequence[float]) -> bool:
        return not any(
            segment_obstacle_intersect(p, q, obstacle) for obstacle in self.obstacles
        )


def _radical_inverse(indices: np.ndarray, base: int) -> np.ndarray:
    result = np.zeros(indices.shape, dtype=float)
    remaining = indices.copy()
    scale = 1.0 / base
    while np.any(remaining > 0):
        remaining, digit = np.divmod(remaining, base)
        result += digit * scale
        scale /= base
    return result


def halton_points(
    count: int, bases: tuple[int, int] = (2, 3), skip: int = 0
) -> np.ndarray:
    """Halton points in the unit square, starting at sequence index skip + 1.

    Returns:
        array of shape (count, len(bases))
    """
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")
    for a in range(len(bases)):
        for b in range(a + 1, len(bases)):
            if math.gcd(bases[a], bases[b]) != 1:
                raise ValueError(f"Halton bases must be coprime, got {bases}")
    indices = np.arange(skip + 1, skip + 1 + count, dtype=np.int64)
    return np.stack([_radical_inverse(indices, base) for base in bases], axis=-1)


@dataclass(frozen=True, eq=False)
class Roadmap:
    """Undirected roadmap; node i sits at nodes[i], edges carry their length."""

    nodes: np.ndarray
    graph: nx.Graph = field(repr=False)
    connection_radius: float
    environment: Environment = field(repr=False)
    _index: dict[tuple[float, float], int] = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted(tuple(sorted(edge)) for edge in self.graph.edges)

    def neighbors(self, node: int) -> list[int]:
        return sorted(self.graph.neighbors(node))

    def neighbor_closure(self, nodes: Iterable[int]) -> set[int]:
        """Ng: every node adjacent to at least one member of ``nodes``."""
        closure: set[int] = set()
        for node in nodes:
            closure.update(self.graph.adj[node])
        return closure

    def node_of(self, point: Sequence[float]) -> int:
        key = (float(point[0]), float(point[1]))
        if key not in self._index:
            raise KeyError(f"{key} is not a roadmap node")
        return self._index[key]

    def edge_length(self, u: int, v: int) -> float:
        return self.graph.edges[u, v]["length"]

    def path_length(self, path: Sequence[int]) -> float:
        return float(
            sum(self.edge_length(u, v) for u, v in zip(path[:-1], path[1:]) if u != v)
        )

    @cached_property
    def diameter(self) -> int:
        """Largest hop eccentricity over the connected components."""
        if self.n_nodes == 0:
            return 0
        return max(
            nx.diameter(self.graph.subgraph(component), usebounds=True)
            for component in nx.connected_components(self.graph)
        )


def build_roadmap(
    env: Environment,
    n_samples: int = 1000,
    connection_radius: float = 2.0,
    extra_nodes: Optional[Sequence[Sequence[float]]] = None,
    bases: tuple[int, int] = (2, 3),
    skip: int = 0,
) -> Roadmap:
    """Halton-sampled roadmap with every collision-free edge within the radius.

    extra_nodes (robot starts and goals) are appended after the samples.
    """
    lower = np.asarray(env.bounds.lower, dtype=float)
    samples = lower + halton_points(n_samples, bases, skip) * env.size
    points = [tuple(map(float, p)) for p in samples if env.is_free(p)]

    index: dict[tuple[float, float], int] = {}
    for point in points:
        index.setdefault(point, len(index))
    for point in extra_nodes or ():
        point = (float(point[0]), float(point[1]))
        if not env.is_free(point):
            raise ScenarioError(f"start/goal {point} is not collision-free")
        index.setdefault(point, len(index))

    nodes = np.array(list(index), dtype=float).reshape(-1, 2)
    nodes.setflags(write=False)

    graph = nx.Graph()
    graph.add_nodes_from(range(nodes.shape[0]))
    if nodes.shape[0] > 1:
        pairs = sorted(cKDTree(nodes).query_pairs(connection_radius))
        for u, v in pairs:
            if env.segment_is_free(nodes[u], nodes[v]):
                graph.add_edge(u, v, length=float(np.linalg.norm(nodes[u] - nodes[v])))

    logger.debug(
        "roadmap: %d nodes (%d sampled), %d edges",
        nodes.shape[0],
        len(points),
        graph.number_of_edges(),
    )
    return Roadmap(
        nodes=nodes,
        graph=graph,
        connection_radius=connection_radius,
        environment=env,
        _index=index,
    )
