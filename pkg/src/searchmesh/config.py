"""Mission configuration: problem size, geometry, cost and kernel parameters.

A single TOML file drives model construction, simulation and the CLI.
``MissionConfig.case_study()`` is the built-in three-goal / two-UAV /
eight-region configuration; ``MissionConfig.reduced()`` is a scaled-down
instance small enough for dense oracle checks.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .energymodel import PowerProfile

__all__ = ["MissionConfig", "ConfigError", "CASE_STUDY_TOML"]


class ConfigError(ValueError):
    """Raised on inconsistent mission configuration."""


def _default_centroids(q: int) -> list[list[float]]:
    # Two-row grid of 1 km cells, region 1 at the south-west corner.
    cols = (q + 1) // 2
    out = []
    for i in range(q):
        row, col = divmod(i, cols)
        out.append([500.0 + 1000.0 * col, 500.0 + 1000.0 * row])
    return out


@dataclass
class MissionConfig:
    # problem size
    k: int = 3  # number of goals
    q: int = 8  # number of search regions
    z: int = 2  # number of UAVs
    gamma: float = 0.95

    # geometry (meters); regions are 1-based everywhere in the public API
    centroids: list[list[float]] = field(default_factory=lambda: _default_centroids(8))
    goal_regions: list[int] = field(default_factory=lambda: [2, 5, 6])
    goal_waypoints: list[list[int]] = field(default_factory=lambda: [[2], [5], [6]])

    # UAV-level cost parameters
    eta: list[float] = field(default_factory=lambda: [50.0, 70.0, 100.0])
    delta_cost: list[float] = field(default_factory=lambda: [50.0, 70.0, 100.0])
    # fault/range cost multiplier by tier: f <= 4 / 4 < f < 10 / f > 9
    fault_range_cost: list[float] = field(default_factory=lambda: [50.0, 200.0, 500.0])
    # pursue_cost[j][l-1] = movement cost of pursuing goal j+1 from region l
    pursue_cost: list[list[float]] = field(
        default_factory=lambda: [
            [1, 0, 1, 1, 1, 2, 2, 2],
            [2, 1, 1, 1, 0, 1, 1, 1],
            [2, 2, 2, 1, 1, 0, 1, 1],
        ]
    )

    # stochastic kernels (shared by both decision levels)
    p_fault_onset: float = 0.1  # healthy -> mild
    p_mild_worsen: float = 0.4  # mild -> worse (exits the mild tier)
    p_worsen_camera_share: float = 0.6  # of worsened mass, share landing in f > 9
    p_severe_worsen: float = 0.4  # severe (5..9) -> camera tier
    p_recur: float = 0.05  # achieved goal re-arrives
    # Share of re-arrivals that land at high priority. Default 0: recurring
    # goals come back at low priority. A high-priority re-arrival rate makes
    # an achieved goal a liability (a held low-priority goal "shields"
    # against an expensive respawn), and the optimal policy then farms live
    # goals instead of achieving them.
    p_recur_high: float = 0.0
    p_drift: float = 0.0  # unassigned priority drift between 1 and 2
    achieve_healthy: float = 0.9
    achieve_faulty: float = 0.2  # any fault short of camera loss, UAV level
    achieve_camera: float = 0.0

    # deterministic UAV dynamics: goals whose reach flag survives pursuing
    # goal j (1-based). Default: the goal-2 sortie (corner region 5) costs
    # reach of goal 1, the farthest cross-goal leg (1414 m); every other
    # leg stays within 1000 m and keeps all flags.
    reach_keep: list[list[int]] = field(
        default_factory=lambda: [[1, 2, 3], [2, 3], [1, 2, 3]]
    )

    # fleet-level cost parameters
    zeta: list[float] = field(default_factory=lambda: [100.0, 100.0, 100.0])
    h1_mild: float = 50.0
    h1_severe: float = 100.0
    h2_prior_assigned: float = 1.0  # offline expectation of the preference rank
    h2_unassigned: float = 2.0
    h3_unavailable: float = 20.0
    fleet_achieve_healthy: float = 0.9
    fleet_achieve_mild: float = 0.2  # partially faulty: f in {2, 3, 4}
    fleet_achieve_severe: float = 0.0

    # power / battery
    p_m: float = 180.0
    p_p: float = 15.0
    p_e: float = 5.0
    bc: float = 18000.0
    v: float = 22.2
    speed: float = 5.0

    def __post_init__(self):
        self.validate()

    # -- derived -----------------------------------------------------------

    @property
    def power_profile(self) -> PowerProfile:
        return PowerProfile(
            p_m=self.p_m, p_p=self.p_p, p_e=self.p_e,
            bc=self.bc, v=self.v, delta=self.speed,
        )

    @property
    def uav_state_count(self) -> int:
        return 18 * 2**self.k * 3**self.k * self.q * (self.k + 1)

    @property
    def fleet_state_count(self) -> int:
        return 3**self.k * (self.k + 1) ** self.z * 18**self.z * 2**self.z

    @property
    def uav_action_count(self) -> int:
        return self.k + 3

    def centroid(self, region: int) -> tuple[float, float]:
        """Centroid of a 1-based region index."""
        x, y = self.centroids[region - 1]
        return (x, y)

    def goal_waypoint_coords(self, goal: int) -> tuple[tuple[float, float], ...]:
        """Waypoint coordinates for a 1-based goal index."""
        return tuple(self.centroid(r) for r in self.goal_waypoints[goal - 1])

    # -- validation ----------------------------------------------------------

    def validate(self):
        if self.k < 1 or self.q < 1 or self.z < 1:
            raise ConfigError("k, q, z must all be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must be in (0,1), got {self.gamma}")
        if len(self.centroids) != self.q:
            raise ConfigError(f"need {self.q} region centroids, got {len(self.centroids)}")
        for name in ("goal_regions", "goal_waypoints", "eta", "delta_cost",
                     "pursue_cost", "zeta", "reach_keep"):
            if len(getattr(self, name)) != self.k:
                raise ConfigError(f"{name} must have one entry per goal ({self.k})")
        for j, row in enumerate(self.pursue_cost):
            if len(row) != self.q:
                raise ConfigError(f"pursue_cost[{j}] must have {self.q} entries")
        for r in self.goal_regions + [w for ws in self.goal_waypoints for w in ws]:
            if not 1 <= r <= self.q:
                raise ConfigError(f"region index {r} outside 1..{self.q}")
        for ks in self.reach_keep:
            for g in ks:
                if not 1 <= g <= self.k:
                    raise ConfigError(f"reach_keep goal {g} outside 1..{self.k}")
        probs = [self.p_fault_onset, self.p_mild_worsen, self.p_worsen_camera_share,
                 self.p_severe_worsen, self.p_recur, self.p_recur_high,
                 self.p_drift,
                 self.achieve_healthy, self.achieve_faulty, self.achieve_camera,
                 self.fleet_achieve_healthy, self.fleet_achieve_mild,
                 self.fleet_achieve_severe]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ConfigError("all kernel probabilities must lie in [0, 1]")
        if len(self.fault_range_cost) != 3:
            raise ConfigError("fault_range_cost needs exactly 3 tier values")

    # -- constructors --------------------------------------------------------

    @classmethod
    def case_study(cls) -> "MissionConfig":
        return cls()

    @classmethod
    def reduced(cls) -> "MissionConfig":
        """Oracle-scale instance: one goal, two regions, one UAV."""
        return cls(
            k=1, q=2, z=1,
            centroids=_default_centroids(2),
            goal_regions=[2],
            goal_waypoints=[[2]],
            eta=[50.0],
            delta_cost=[50.0],
            pursue_cost=[[1, 0]],
            zeta=[100.0],
            reach_keep=[[1]],
        )

    @classmethod
    def from_toml(cls, path: str | Path) -> "MissionConfig":
        raw = tomllib.loads(Path(path).read_text())
        flat: dict = {}
        for section in raw.values():
            if isinstance(section, dict):
                flat.update(section)
            else:
                raise ConfigError("top level must contain only [sections]")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(flat) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**flat)

    def to_dict(self) -> dict:
        return asdict(self)


CASE_STUDY_TOML = """\
# Three goals, two UAVs, eight search regions.
[mission]
k = 3
q = 8
z = 2
gamma = 0.95

[geometry]
centroids = [
    [500.0, 500.0], [1500.0, 500.0], [2500.0, 500.0], [3500.0, 500.0],
    [500.0, 1500.0], [1500.0, 1500.0], [2500.0, 1500.0], [3500.0, 1500.0],
]
goal_regions = [2, 5, 6]
goal_waypoints = [[2], [5], [6]]

[uav_cost]
eta = [50.0, 70.0, 100.0]
delta_cost = [50.0, 70.0, 100.0]
fault_range_cost = [50.0, 200.0, 500.0]
pursue_cost = [
    [1, 0, 1, 1, 1, 2, 2, 2],
    [2, 1, 1, 1, 0, 1, 1, 1],
    [2, 2, 2, 1, 1, 0, 1, 1],
]

[kernels]
p_fault_onset = 0.1
p_mild_worsen = 0.4
p_worsen_camera_share = 0.6
p_severe_worsen = 0.4
p_recur = 0.05
p_recur_high = 0.0
p_drift = 0.0
achieve_healthy = 0.9
achieve_faulty = 0.2
achieve_camera = 0.0

[uav_dynamics]
reach_keep = [[1, 2, 3], [2, 3], [1, 2, 3]]

[fleet_cost]
zeta = [100.0, 100.0, 100.0]
h1_mild = 50.0
h1_severe = 100.0
h2_prior_assigned = 1.0
h2_unassigned = 2.0
h3_unavailable = 20.0
fleet_achieve_healthy = 0.9
fleet_achieve_mild = 0.2
fleet_achieve_severe = 0.0

[power]
p_m = 180.0
p_p = 15.0
p_e = 5.0
bc = 18000.0
v = 22.2
speed = 5.0
"""
