from __future__ import annotations

import heapq
import math

import numpy as np

from src.planning.constraint_sets import ConstraintSets
from src.planning.environment import Roadmap
from src.utils.errors import FailureReason, PlanningFailure

# costs closer than this are the same cost for tie-breaking
COST_DECIMALS = 9


def _cost_key(cost: float) -> float:
    return round(cost, COST_DECIMALS)


def time_expanded_search(valid_sets: ConstraintSets, roadmap: Roadmap) -> list[int]:
    """Minimum-distance node sequence from start to goal through the valid sets.

    States are (node, t) with node in V_t; moves are a wait (cost 0) or one
    roadmap edge (cost = its length). The time index saturates at the horizon
    T, where the valid sets are stationary, and the search targets (goal, T),
    so an early arrival is only kept if the goal stays valid until T.

    Among equal-cost plans the smallest visited node sequence (waits left
    out) wins; plans along the same route prefer the earliest moves. Both
    orders survive appending a common suffix, so the first label settled at
    a state is final. The frontier is ordered by (f, g, label, node, t).

    Returns:
        the node occupied at every timestep until the robot last moves
    """
    horizon = valid_sets.horizon
    start, goal = valid_sets.start, valid_sets.goal
    if goal not in valid_sets.valid_at(horizon):
        raise ValueError(f"goal {goal} is not valid at the horizon {horizon}")

    goal_xy = roadmap.nodes[goal]

    def heuristic(node: int) -> float:
        return float(np.linalg.norm(roadmap.nodes[node] - goal_xy))

    # label = (cost key, route without waits, arrival time of every move)
    start_state = (start, 0)
    start_label = (0.0, (start,), ())
    best = {start_state: (0.0, start_label)}
    frontier = [(_cost_key(heuristic(start)), 0.0, start_label, start, 0)]
    closed: set[tuple[int, int]] = set()

    while frontier:
        _, _, label, node, t = heapq.heappop(frontier)
        state = (node, t)
        if state in closed or best[state][1] != label:
            continue
        closed.add(state)
        if node == goal and t == horizon:
            return _unroll(label)

        cost = best[state][0]
        _, route, move_times = label
        next_t = min(t + 1, horizon)
        next_valid = valid_sets.valid_at(next_t)
        moves = [(node, 0.0)] + [
            (neighbor, roadmap.edge_length(node, neighbor))
            for neighbor in roadmap.neighbors(node)
        ]
        for successor, step_cost in moves:
            if successor == node and next_t == t:
                continue
            if successor not in next_valid:
                continue
            successor_state = (successor, next_t)
            if successor_state in closed:
                continue
            new_cost = cost + step_cost
            if successor == node:
                new_label = (_cost_key(new_cost), route, move_times)
            else:
                new_label = (
                    _cost_key(new_cost),
                    route + (successor,),
                    move_times + (next_t,),
                )
            known = best.get(successor_state)
            if known is not None and known[1] <= new_label:
                continue
            best[successor_state] = (new_cost, new_label)
            heapq.heappush(
                frontier,
                (
                    _cost_key(new_cost + heuristic(successor)),
                    new_label[0],
                    new_label,
                    successor,
                    next_t,
                ),
            )

    raise PlanningFailure(FailureReason.NO_PATH, valid_sets.robot)


def _unroll(label) -> list[int]:
    """Node per timestep up to the last move; trailing goal waits are implied
    by parking."""
    _, route, move_times = label
    nodes = [route[0]]
    for node, arrival in zip(route[1:], move_times):
        nodes.extend([nodes[-1]] * (arrival - len(nodes)))
        nodes.append(node)
    return nodes
