"""Command-line front door: build models, solve, simulate, analyze, serve.

Every invocation writes a ``manifest.json`` into the output directory
listing each produced artifact with its SHA-256 content hash plus timing
and convergence metadata, so a run can be audited and reproduced. All
randomness flows from the single ``--seed`` flag; repeated runs on the
same inputs produce byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import click

from . import __version__
from .config import CASE_STUDY_TOML, MissionConfig
from .fleetassigner import FleetPolicy, build_fleet_mdp
from .mdpcore import (
    DEFAULT_ETA,
    extract_policy,
    load_snapshot,
    save_snapshot,
    solve,
)
from .missionsim import compare_baselines, load_scenario, run_scenario
from .policyanalytics import fleet_policy_trends, uav_policy_trends
from .uavbidder import UavPolicy, UavStateCodec, build_uav_mdp

__all__ = ["RunManifest", "main"]

log = logging.getLogger("searchmesh")

UAV_SNAPSHOT = "uav_snapshot.npz"
FLEET_SNAPSHOT = "fleet_snapshot.npz"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Audit record of one CLI invocation and everything it produced."""

    command: str
    config: str
    seed: int
    out_dir: str
    artifacts: dict[str, dict[str, str]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add(self, name: str, path: Path):
        self.artifacts[name] = {"path": str(path), "sha256": _sha256(path)}

    def write(self, out_dir: Path) -> Path:
        payload = {
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "outDir": self.out_dir,
            "artifacts": self.artifacts,
            "meta": self.meta,
        }
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


def _setup_logging():
    level = os.environ.get("SEARCHMESH_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def _load_config(config: str | None) -> tuple[MissionConfig, str]:
    if config is None:
        return MissionConfig.case_study(), "<case-study>"
    return MissionConfig.from_toml(config), str(config)


def _out_dir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_policies(cfg: MissionConfig, snapshots: str):
    snap = Path(snapshots)
    for name in (UAV_SNAPSHOT, FLEET_SNAPSHOT):
        if not (snap / name).exists():
            raise click.ClickException(
                f"missing snapshot {snap / name}; run `searchmesh solve` first"
            )
    uvf, _, _ = load_snapshot(snap / UAV_SNAPSHOT)
    fvf, _, _ = load_snapshot(snap / FLEET_SNAPSHOT)
    uav_policy = UavPolicy(build_uav_mdp(cfg), uvf, UavStateCodec(cfg.k, cfg.q))
    fleet_policy = FleetPolicy(build_fleet_mdp(cfg), fvf)
    return uav_policy, fleet_policy


config_option = click.option(
    "--config", type=click.Path(exists=True, dir_okay=False), default=None,
    help="Mission TOML; omit for the built-in case-study configuration.",
)
seed_option = click.option("--seed", type=int, default=0, show_default=True)
out_option = click.option("--out", default="out", show_default=True,
                          help="Output directory for artifacts.")
snapshots_option = click.option(
    "--snapshots", default="out", show_default=True,
    help="Directory holding solved policy snapshots.",
)


@click.group()
@click.version_option(__version__)
def main():
    """Fault-tolerant dynamic task assignment for UAV search teams."""
    _setup_logging()


@main.command("solve")
@config_option
@seed_option
@out_option
@click.option("--eta", type=float, default=DEFAULT_ETA, show_default=True,
              help="Sup-norm convergence tolerance.")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--max-sweeps", type=int, default=2000, show_default=True)
def solve_cmd(config, seed, out, eta, workers, max_sweeps):
    """Build and solve both MDPs; write policy snapshots."""
    cfg, config_name = _load_config(config)
    out_dir = _out_dir(out)
    manifest = RunManifest("solve", config_name, seed, str(out_dir))
    log_lines = ["model,sweep,residual"]
    converged = True
    for name, build, fname in (
        ("uav", build_uav_mdp, UAV_SNAPSHOT),
        ("fleet", build_fleet_mdp, FLEET_SNAPSHOT),
    ):
        t0 = time.monotonic()
        model = build(cfg)
        built = time.monotonic() - t0
        vf = solve(model, eta=eta, max_sweeps=max_sweeps, workers=workers)
        solved = time.monotonic() - t0 - built
        if vf.converged:
            policy = extract_policy(model, vf)
            path = out_dir / fname
            save_snapshot(
                path, vf,
                policy,
                {
                    "model": name,
                    "states": model.state_count,
                    "actions": model.action_count,
                    "eta": eta,
                    "gamma": cfg.gamma,
                },
            )
            manifest.add(f"{name}_snapshot", path)
        manifest.meta[name] = {
            "states": model.state_count,
            "actions": model.action_count,
            "sweeps": vf.sweeps,
            "residual": vf.residual,
            "converged": vf.converged,
            "buildSeconds": round(built, 3),
            "solveSeconds": round(solved, 3),
        }
        log_lines += [f"{name},{i + 1},{r:.12e}"
                      for i, r in enumerate(vf.residual_history)]
        converged = converged and vf.converged
        log.info("%s: %d states, %d sweeps, residual %.3e",
                 name, model.state_count, vf.sweeps, vf.residual)
    conv_path = out_dir / "convergence.csv"
    conv_path.write_text("\n".join(log_lines) + "\n")
    manifest.add("convergence_log", conv_path)
    manifest.write(out_dir)
    if not converged:
        raise click.ClickException("solve did not converge; see manifest.json")
    click.echo(f"snapshots written to {out_dir}")


@main.command()
@config_option
@seed_option
@out_option
@snapshots_option
@click.option("--scenario", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Scenario TOML file.")
@click.option("--runs", type=int, default=1, show_default=True,
              help="> 1 runs a seeded Monte-Carlo batch with baselines.")
@click.option("--mode", type=click.Choice(["sampled", "expected"]),
              default=None, help="Override the scenario's outcome mode.")
def simulate(config, seed, out, snapshots, scenario, runs, mode):
    """Run a mission scenario against solved policies."""
    cfg, config_name = _load_config(config)
    out_dir = _out_dir(out)
    uav_policy, fleet_policy = _load_policies(cfg, snapshots)
    sc = load_scenario(scenario)
    sc.seed = seed
    if mode is not None:
        sc.mode = mode
    manifest = RunManifest("simulate", config_name, seed, str(out_dir))
    manifest.meta["scenario"] = str(scenario)
    if runs > 1:
        stats = compare_baselines(cfg, sc, uav_policy, fleet_policy, runs=runs)
        path = out_dir / "montecarlo.json"
        path.write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
        manifest.add("montecarlo_stats", path)
        manifest.meta["runs"] = runs
    else:
        trace = run_scenario(cfg, sc, uav_policy, fleet_policy)
        csv_path = out_dir / "trace.csv"
        csv_path.write_text(trace.to_csv())
        json_path = out_dir / "trace.json"
        json_path.write_text(trace.to_json_events() + "\n")
        manifest.add("trace_csv", csv_path)
        manifest.add("trace_json", json_path)
        manifest.meta["epochs"] = len(trace.records)
        manifest.meta["assignments"] = [list(a) for a in trace.assignments]
    manifest.write(out_dir)
    click.echo(f"trace artifacts written to {out_dir}")


@main.command()
@config_option
@seed_option
@out_option
@snapshots_option
def analyze(config, seed, out, snapshots):
    """Emit policy trend reports for both decision levels."""
    cfg, config_name = _load_config(config)
    out_dir = _out_dir(out)
    snap = Path(snapshots)
    manifest = RunManifest("analyze", config_name, seed, str(out_dir))
    uvf, _, _ = load_snapshot(snap / UAV_SNAPSHOT)
    fvf, _, _ = load_snapshot(snap / FLEET_SNAPSHOT)
    uav_model = build_uav_mdp(cfg)
    fleet_model = build_fleet_mdp(cfg)
    for name, report in (
        ("uav", uav_policy_trends(cfg, uav_model, uvf, UavStateCodec(cfg.k, cfg.q))),
        ("fleet", fleet_policy_trends(cfg, fleet_model, fvf)),
    ):
        txt = out_dir / f"{name}_trends.txt"
        txt.write_text(report.to_text())
        csv_path = out_dir / f"{name}_trends.csv"
        csv_path.write_text(report.to_csv())
        manifest.add(f"{name}_trends_txt", txt)
        manifest.add(f"{name}_trends_csv", csv_path)
        manifest.meta[name] = {
            "states": report.total_states,
            "partitionOk": report.support_partition_ok(),
        }
    manifest.write(out_dir)
    click.echo(f"trend reports written to {out_dir}")


@main.command()
@config_option
@seed_option
@snapshots_option
@click.option("--scenario", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Scenario TOML to steer live.")
@click.option("--port", type=int, default=8471, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(config, seed, snapshots, scenario, port, host):
    """Start the coordination service (telemetry + operator commands)."""
    import uvicorn

    from .coordservice import CoordService, build_app

    cfg, _ = _load_config(config)
    uav_policy, fleet_policy = _load_policies(cfg, snapshots)
    sc = load_scenario(scenario)
    sc.seed = seed
    service = CoordService(cfg, sc, uav_policy, fleet_policy)
    app = build_app(service)
    click.echo(f"serving on {host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("init-config")
@click.argument("path", type=click.Path(dir_okay=False))
def init_config(path):
    """Write the built-in case-study configuration as a TOML file."""
    Path(path).write_text(CASE_STUDY_TOML)
    click.echo(f"wrote {path}")


if __name__ == "__main__":
    sys.exit(main())
