"""Fault-tolerant dynamic task assignment for cooperative UAV search teams.

Two-level decision architecture: each UAV solves a local goal-bidding MDP
and communicates per-goal task values to a base station, which runs a
fleet-level assignment MDP. Precomputed policies are executed in an
event-driven closed-loop mission simulator with live operator input.
"""

__version__ = "0.1.0"

from .config import MissionConfig, ConfigError  # noqa: E402
from .mdpcore import (  # noqa: E402
    MdpModel,
    NotConvergedError,
    ValueFunction,
    extract_policy,
    load_snapshot,
    save_snapshot,
    solve,
)
from .uavbidder import (  # noqa: E402
    BidVector,
    UavPolicy,
    UavState,
    UavStateCodec,
    build_uav_mdp,
    compute_bids,
)
from .fleetassigner import (  # noqa: E402
    FleetPolicy,
    FleetState,
    FleetStateCodec,
    build_fleet_mdp,
    decide_assignment,
)
from .missionsim import (  # noqa: E402
    MissionScenario,
    MissionTrace,
    UavInit,
    compare_baselines,
    load_scenario,
    run_scenario,
)

__all__ = [
    "__version__",
    "MissionConfig",
    "ConfigError",
    "MdpModel",
    "ValueFunction",
    "NotConvergedError",
    "solve",
    "extract_policy",
    "save_snapshot",
    "load_snapshot",
    "BidVector",
    "UavState",
    "UavStateCodec",
    "UavPolicy",
    "build_uav_mdp",
    "compute_bids",
    "FleetState",
    "FleetStateCodec",
    "FleetPolicy",
    "build_fleet_mdp",
    "decide_assignment",
    "MissionScenario",
    "MissionTrace",
    "UavInit",
    "load_scenario",
    "run_scenario",
    "compare_baselines",
]
