"""Shared fixtures.

The case-study models are expensive to solve, so they are solved exactly
once per session (in extended precision, which the convergence acceptance
criterion needs) and shared by every test that exercises the full-size
policies. Reduced-instance fixtures cover the fast unit/oracle tests.
"""

import numpy as np
import pytest

from searchmesh.config import MissionConfig
from searchmesh.fleetassigner import FleetPolicy, build_fleet_mdp
from searchmesh.mdpcore import solve
from searchmesh.uavbidder import UavPolicy, UavStateCodec, build_uav_mdp


@pytest.fixture(scope="session")
def cfg() -> MissionConfig:
    return MissionConfig.case_study()


@pytest.fixture(scope="session")
def reduced_cfg() -> MissionConfig:
    return MissionConfig.reduced()


@pytest.fixture(scope="session")
def case_solutions(cfg):
    """Both case-study models solved once, in extended precision."""
    uav_model = build_uav_mdp(cfg)
    fleet_model = build_fleet_mdp(cfg)
    uav_vf = solve(uav_model, dtype=np.longdouble)
    fleet_vf = solve(fleet_model, dtype=np.longdouble)
    codec = UavStateCodec(cfg.k, cfg.q)
    return {
        "uav_model": uav_model,
        "fleet_model": fleet_model,
        "uav_vf": uav_vf,
        "fleet_vf": fleet_vf,
        "codec": codec,
        "uav_policy": UavPolicy(uav_model, uav_vf, codec),
        "fleet_policy": FleetPolicy(fleet_model, fleet_vf),
    }


@pytest.fixture(scope="session")
def reduced_solutions(reduced_cfg):
    """Reduced-instance models and tight solutions for oracle checks."""
    uav_model = build_uav_mdp(reduced_cfg)
    fleet_model = build_fleet_mdp(reduced_cfg)
    uav_vf = solve(uav_model, eta=1e-10)
    fleet_vf = solve(fleet_model, eta=1e-10)
    codec = UavStateCodec(reduced_cfg.k, reduced_cfg.q)
    return {
        "uav_model": uav_model,
        "fleet_model": fleet_model,
        "uav_vf": uav_vf,
        "fleet_vf": fleet_vf,
        "codec": codec,
        "uav_policy": UavPolicy(uav_model, uav_vf, codec),
        "fleet_policy": FleetPolicy(fleet_model, fleet_vf),
    }
