import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from searchmesh.cli import main
from searchmesh.config import MissionConfig

REDUCED_TOML = """\
[mission]
k = 1
q = 2
z = 1

[geometry]
centroids = [[500.0, 500.0], [500.0, 1500.0]]
goal_regions = [2]
goal_waypoints = [[2]]

[uav_cost]
eta = [50.0]
delta_cost = [50.0]
pursue_cost = [[1, 0]]

[uav_dynamics]
reach_keep = [[1]]

[fleet_cost]
zeta = [100.0]
"""

SCENARIO_TOML = """\
[scenario]
goal_pri = [2]
mode = "expected"
epoch_limit = 6

[[uav]]
loc = 1
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "reduced.toml").write_text(REDUCED_TOML)
    (root / "scenario.toml").write_text(SCENARIO_TOML)
    return root


@pytest.fixture(scope="module")
def solved(workdir):
    out = workdir / "solved"
    result = CliRunner().invoke(
        main,
        ["solve", "--config", str(workdir / "reduced.toml"), "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    return out


def _manifest(out: Path) -> dict:
    return json.loads((out / "manifest.json").read_text())


def test_reduced_toml_matches_builtin(workdir):
    assert MissionConfig.from_toml(workdir / "reduced.toml") == MissionConfig.reduced()


def test_solve_artifacts(solved):
    for name in ("uav_snapshot.npz", "fleet_snapshot.npz", "convergence.csv",
                 "manifest.json"):
        assert (solved / name).exists()
    mani = _manifest(solved)
    assert mani["command"] == "solve"
    for model in ("uav", "fleet"):
        assert mani["meta"][model]["converged"] is True
    rows = list(csv.DictReader((solved / "convergence.csv").open()))
    assert {r["model"] for r in rows} == {"uav", "fleet"}


def test_solve_is_deterministic(workdir, solved):
    out2 = workdir / "solved2"
    result = CliRunner().invoke(
        main,
        ["solve", "--config", str(workdir / "reduced.toml"), "--out", str(out2)],
    )
    assert result.exit_code == 0, result.output
    a, b = _manifest(solved), _manifest(out2)
    for name in ("uav_snapshot", "fleet_snapshot", "convergence_log"):
        assert a["artifacts"][name]["sha256"] == b["artifacts"][name]["sha256"]


def test_solve_loose_eta_takes_fewer_sweeps(workdir, solved):
    out = workdir / "loose"
    result = CliRunner().invoke(
        main,
        ["solve", "--config", str(workdir / "reduced.toml"),
         "--out", str(out), "--eta", "0.1"],
    )
    assert result.exit_code == 0, result.output
    tight, loose = _manifest(solved), _manifest(out)
    for model in ("uav", "fleet"):
        assert loose["meta"][model]["sweeps"] < tight["meta"][model]["sweeps"]


def test_solve_unconverged_fails(workdir):
    out = workdir / "truncated"
    result = CliRunner().invoke(
        main,
        ["solve", "--config", str(workdir / "reduced.toml"),
         "--out", str(out), "--max-sweeps", "1"],
    )
    assert result.exit_code != 0
    assert "did not converge" in result.output


def test_simulate_single_run(workdir, solved):
    out = workdir / "sim"
    result = CliRunner().invoke(
        main,
        ["simulate", "--config", str(workdir / "reduced.toml"),
         "--scenario", str(workdir / "scenario.toml"),
         "--snapshots", str(solved), "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert (out / "trace.csv").exists() and (out / "trace.json").exists()
    events = json.loads((out / "trace.json").read_text())
    assert events and events[0]["epoch"] == 1
    assert _manifest(out)["meta"]["epochs"] == len(events)


def test_simulate_monte_carlo(workdir, solved):
    out = workdir / "mc"
    result = CliRunner().invoke(
        main,
        ["simulate", "--config", str(workdir / "reduced.toml"),
         "--scenario", str(workdir / "scenario.toml"),
         "--snapshots", str(solved), "--out", str(out), "--runs", "4"],
    )
    assert result.exit_code == 0, result.output
    stats = json.loads((out / "montecarlo.json").read_text())
    assert set(stats) == {"mdp", "greedyNearest", "randomFeasible"}


def test_simulate_without_snapshots_fails(workdir):
    result = CliRunner().invoke(
        main,
        ["simulate", "--config", str(workdir / "reduced.toml"),
         "--scenario", str(workdir / "scenario.toml"),
         "--snapshots", str(workdir / "nowhere")],
    )
    assert result.exit_code != 0
    assert "missing snapshot" in result.output


def test_analyze(workdir, solved):
    out = workdir / "trends"
    result = CliRunner().invoke(
        main,
        ["analyze", "--config", str(workdir / "reduced.toml"),
         "--snapshots", str(solved), "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    for name in ("uav_trends.txt", "uav_trends.csv",
                 "fleet_trends.txt", "fleet_trends.csv"):
        assert (out / name).exists()
    mani = _manifest(out)
    assert mani["meta"]["uav"]["partitionOk"] is True
    assert mani["meta"]["fleet"]["partitionOk"] is True


def test_init_config_roundtrips(workdir):
    path = workdir / "case.toml"
    result = CliRunner().invoke(main, ["init-config", str(path)])
    assert result.exit_code == 0, result.output
    assert MissionConfig.from_toml(path) == MissionConfig.case_study()
