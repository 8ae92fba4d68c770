"""Battery-driven flight range and per-goal feasibility.

Range follows from state of charge through the cruise power budget
(motors + payload + electronics); a goal is feasible when the minimum
open-path tour over its waypoints fits inside the current range.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PowerProfile",
    "Assignment",
    "TourResult",
    "flight_range",
    "assignment_distance",
    "assignment_tour",
    "feasibility_flags",
    "EXACT_WAYPOINT_LIMIT",
]

# Exact solution bound; larger instances fall back to nearest-neighbor + 2-opt.
EXACT_WAYPOINT_LIMIT = 12


class EnergyInputError(ValueError):
    """Raised on malformed power profiles or assignments."""


@dataclass(frozen=True)
class PowerProfile:
    """Cruise power budget and battery parameters.

    p_m, p_p, p_e: motor / payload / electronics draw in watts (minimum
    cruise values); bc: battery capacity in ampere-seconds; v: nominal
    voltage; delta: average ground speed in m/s.
    """

    p_m: float
    p_p: float
    p_e: float
    bc: float
    v: float
    delta: float

    def __post_init__(self):
        for name in ("p_m", "p_p", "p_e", "bc", "v", "delta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise EnergyInputError(f"{name} must be finite and > 0, got {value}")

    @property
    def p_uav(self) -> float:
        """Total minimum cruise power draw."""
        return self.p_m + self.p_p + self.p_e

    @property
    def max_flight_duration(self) -> float:
        """Flight duration on a full battery, in seconds."""
        return self.bc * self.v / self.p_uav


@dataclass(frozen=True)
class Assignment:
    """A goal's waypoint set (2-D region centroids, meters)."""

    id: int
    waypoints: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.waypoints) == 0:
            raise EnergyInputError(f"assignment {self.id} has no waypoints")
        object.__setattr__(
            self,
            "waypoints",
            tuple((float(x), float(y)) for x, y in self.waypoints),
        )


@dataclass(frozen=True)
class TourResult:
    distance: float
    order: tuple[int, ...]
    exact: bool


def flight_range(soc: float, profile: PowerProfile) -> float:
    """Maximum range in meters at the given state of charge."""
    if not (math.isfinite(soc) and 0.0 <= soc <= 1.0):
        raise EnergyInputError(f"soc must be in [0, 1], got {soc}")
    return soc * profile.max_flight_duration * profile.delta


def _path_length(points: np.ndarray, order) -> float:
    total = 0.0
    prev = points[0]
    for idx in order:
        nxt = points[idx + 1]
        total += float(np.hypot(nxt[0] - prev[0], nxt[1] - prev[1]))
        prev = nxt
    return total


def _exact_open_tour(dist: np.ndarray) -> tuple[float, tuple[int, ...]]:
    """Held-Karp over subsets: exact min-sum open path from node 0."""
    m = dist.shape[0] - 1  # waypoint count; node 0 is the start
    full = (1 << m) - 1
    # best[mask][j]: shortest path from start visiting mask, ending at waypoint j
    best = [dict() for _ in range(1 << m)]
    parent = [dict() for _ in range(1 << m)]
    for j in range(m):
        best[1 << j][j] = dist[0, j + 1]
        parent[1 << j][j] = -1
    for mask in range(1, full + 1):
        layer = best[mask]
        if not layer:
            continue
        for j, cost in layer.items():
            for nxt in range(m):
                bit = 1 << nxt
                if mask & bit:
                    continue
                new_mask = mask | bit
                cand = cost + dist[j + 1, nxt + 1]
                if cand < best[new_mask].get(nxt, math.inf):
                    best[new_mask][nxt] = cand
                    parent[new_mask][nxt] = j
    end = min(best[full], key=lambda j: (best[full][j], j))
    order = []
    mask, j = full, end
    while j != -1:
        order.append(j)
        prev = parent[mask][j]
        mask ^= 1 << j
        j = prev
    order.reverse()
    return best[full][end], tuple(order)


def _two_opt_tour(dist: np.ndarray) -> tuple[float, tuple[int, ...]]:
    """Nearest-neighbor seed plus 2-opt improvement (approximate)."""
    m = dist.shape[0] - 1
    unvisited = set(range(m))
    order = []
    cur = 0
    while unvisited:
        nxt = min(unvisited, key=lambda j: dist[cur, j + 1])
        order.append(nxt)
        unvisited.remove(nxt)
        cur = nxt + 1
    improved = True
    while improved:
        improved = False
        for i in range(len(order) - 1):
            for k in range(i + 1, len(order)):
                cand = order[:i] + order[i : k + 1][::-1] + order[k + 1 :]
                nodes = [0] + [j + 1 for j in order]
                cand_nodes = [0] + [j + 1 for j in cand]
                old = sum(dist[nodes[t], nodes[t + 1]] for t in range(len(order)))
                new = sum(
                    dist[cand_nodes[t], cand_nodes[t + 1]] for t in range(len(order))
                )
                if new < old - 1e-12:
                    order = cand
                    improved = True
    length = dist[0, order[0] + 1] + sum(
        dist[order[t] + 1, order[t + 1] + 1] for t in range(len(order) - 1)
    )
    return length, tuple(order)


def assignment_tour(
    assignment: Assignment, start_location: tuple[float, float]
) -> TourResult:
    """Min-sum open path start -> all waypoints; exact up to the
    enumeration bound, flagged approximate beyond it."""
    pts = np.array([start_location] + list(assignment.waypoints), dtype=float)
    if not np.isfinite(pts).all():
        raise EnergyInputError("non-finite coordinates")
    n = len(assignment.waypoints)
    dist = np.hypot(
        pts[:, 0][:, None] - pts[:, 0][None, :],
        pts[:, 1][:, None] - pts[:, 1][None, :],
    )
    if n == 1:
        return TourResult(float(dist[0, 1]), (0,), True)
    if n <= EXACT_WAYPOINT_LIMIT:
        length, order = _exact_open_tour(dist)
        return TourResult(length, order, True)
    length, order = _two_opt_tour(dist)
    return TourResult(length, order, False)


def assignment_distance(
    assignment: Assignment, start_location: tuple[float, float]
) -> float:
    return assignment_tour(assignment, start_location).distance


def brute_force_distance(
    assignment: Assignment, start_location: tuple[float, float]
) -> float:
    """Exhaustive permutation oracle; only sensible for small waypoint sets."""
    pts = np.array([start_location] + list(assignment.waypoints), dtype=float)
    n = len(assignment.waypoints)
    return min(
        _path_length(pts, perm) for perm in itertools.permutations(range(n))
    )


def feasibility_flags(
    soc: float,
    profile: PowerProfile,
    assignments: list[Assignment],
    start_location: tuple[float, float],
) -> list[int]:
    """1 per assignment whose min-sum tour fits in range (inclusive bound)."""
    r = flight_range(soc, profile)
    return [
        1 if r >= assignment_distance(a, start_location) else 0 for a in assignments
    ]
