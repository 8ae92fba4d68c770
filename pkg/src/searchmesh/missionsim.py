"""Event-driven closed-loop mission execution.

Each decision epoch: ingest operator priority updates, refresh per-UAV
sensor state (fault, SOC-derived reach flags), compute bids, pick the
fleet assignment under live bids, dispatch, then advance the stochastic
world. Decision outcomes land at the next epoch.

Two outcome modes: ``sampled`` draws every stochastic outcome from a
seeded generator; ``expected`` forces each Bernoulli draw with p >= 0.5
to success (and < 0.5 to failure) and each categorical draw to its
modal outcome, reproducing single-trajectory figures deterministically.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as tomllib

import numpy as np

from .config import MissionConfig
from .energymodel import Assignment, assignment_distance, flight_range
from .fleetassigner import FleetPolicy, FleetState, decide_assignment
from .uavbidder import UavPolicy, UavState, fault_kernel

__all__ = [
    "UavInit",
    "ScenarioEvent",
    "MissionScenario",
    "OutcomeSampler",
    "World",
    "EpochRecord",
    "MissionTrace",
    "step_epoch",
    "run_scenario",
    "compare_baselines",
    "greedy_nearest_decision",
    "random_feasible_decision",
]

ACTIVITIES = ("idle", "serv", "charge")
EVENT_KINDS = ("set_priority", "inject_fault", "set_soc")


@dataclass(frozen=True)
class UavInit:
    """Initial per-UAV condition; ``activity`` lets a scenario start a UAV
    mid-service/mid-recharge (unavailable for the first epoch)."""

    loc: int
    soc: float = 1.0
    fault: int = 1
    commit: int = 0
    activity: str = "idle"


@dataclass(frozen=True)
class ScenarioEvent:
    """Scripted operator/world event applied at an epoch boundary."""

    epoch: int
    kind: str
    target: int  # goal index for set_priority, UAV index otherwise (1-based)
    value: float


@dataclass
class MissionScenario:
    goal_pri: tuple[int, ...]
    uavs: list[UavInit]
    seed: int = 0
    epoch_limit: int = 30
    mode: str = "sampled"
    events: list[ScenarioEvent] = field(default_factory=list)

    def validate(self, cfg: MissionConfig):
        if len(self.goal_pri) != cfg.k or any(
            g not in (0, 1, 2) for g in self.goal_pri
        ):
            raise ValueError(f"goal_pri must be {cfg.k} ternary flags")
        if len(self.uavs) != cfg.z:
            raise ValueError(f"need {cfg.z} UAV entries")
        for u in self.uavs:
            if not 1 <= u.loc <= cfg.q:
                raise ValueError(f"loc {u.loc} outside 1..{cfg.q}")
            if not 0.0 <= u.soc <= 1.0:
                raise ValueError(f"soc {u.soc} outside [0, 1]")
            if not 1 <= u.fault <= 18:
                raise ValueError(f"fault {u.fault} outside 1..18")
            if not 0 <= u.commit <= cfg.k:
                raise ValueError(f"commit {u.commit} outside 0..{cfg.k}")
            if u.activity not in ACTIVITIES:
                raise ValueError(f"unknown activity {u.activity!r}")
        if self.mode not in ("sampled", "expected"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.epoch_limit < 1:
            raise ValueError("epoch_limit must be >= 1")
        for ev in self.events:
            if ev.kind not in EVENT_KINDS:
                raise ValueError(f"unknown event kind {ev.kind!r}")
            if ev.epoch < 1:
                raise ValueError("event epochs are 1-based")


def load_scenario(path: str | Path) -> MissionScenario:
    """Read a scenario description from a TOML file.

    Layout: a ``[scenario]`` table (goal_pri, mode, seed, epoch_limit),
    one ``[[uav]]`` table per UAV, and optional ``[[event]]`` tables.
    """
    raw = tomllib.loads(Path(path).read_text())
    sc = raw.get("scenario", {})
    uavs = [
        UavInit(
            loc=int(u.get("loc", 1)),
            soc=float(u.get("soc", 1.0)),
            fault=int(u.get("fault", 1)),
            commit=int(u.get("commit", 0)),
            activity=str(u.get("activity", "idle")),
        )
        for u in raw.get("uav", [])
    ]
    events = [
        ScenarioEvent(
            epoch=int(e["epoch"]),
            kind=str(e["kind"]),
            target=int(e["target"]),
            value=float(e["value"]),
        )
        for e in raw.get("event", [])
    ]
    return MissionScenario(
        goal_pri=tuple(int(g) for g in sc.get("goal_pri", ())),
        uavs=uavs,
        seed=int(sc.get("seed", 0)),
        epoch_limit=int(sc.get("epoch_limit", 30)),
        mode=str(sc.get("mode", "sampled")),
        events=events,
    )


class OutcomeSampler:
    """Stochastic outcome source honoring the two outcome modes."""

    def __init__(self, seed: int, expected: bool):
        self.rng = np.random.default_rng(seed)
        self.expected = bool(expected)

    def bernoulli(self, p: float) -> bool:
        if self.expected:
            return p >= 0.5
        return bool(self.rng.random() < p)

    def categorical(self, probs: np.ndarray) -> int:
        probs = np.asarray(probs, dtype=float)
        if self.expected:
            return int(np.argmax(probs))
        return int(self.rng.choice(len(probs), p=probs / probs.sum()))


@dataclass
class _UavRuntime:
    fault: int
    soc: float
    loc: int
    commit: int
    activity: str
    pending_activity: str = "idle"


class World:
    """Mutable closed-loop state; single-writer per the epoch loop."""

    def __init__(self, cfg: MissionConfig, scenario: MissionScenario):
        scenario.validate(cfg)
        self.cfg = cfg
        self.goal_pri = list(scenario.goal_pri)
        self.uavs = [
            _UavRuntime(u.fault, u.soc, u.loc, u.commit, u.activity)
            for u in scenario.uavs
        ]
        self.assign = (0,) * cfg.z
        self.epoch = 1
        self._fault_kernel = fault_kernel(cfg, serv=False)
        self._goal_tours = [
            Assignment(id=j + 1, waypoints=cfg.goal_waypoint_coords(j + 1))
            for j in range(cfg.k)
        ]

    # -- per-epoch sensor refresh ------------------------------------------

    def reach_flags(self, l: int) -> tuple[int, ...]:
        u = self.uavs[l]
        r = flight_range(u.soc, self.cfg.power_profile)
        start = self.cfg.centroid(u.loc)
        return tuple(
            int(r >= assignment_distance(tour, start)) for tour in self._goal_tours
        )

    def uav_state(self, l: int) -> UavState:
        u = self.uavs[l]
        return UavState(
            fault=u.fault,
            reach=self.reach_flags(l),
            goal_pri=tuple(self.goal_pri),
            loc=u.loc,
            commit=u.commit,
        )

    def fleet_state(self) -> FleetState:
        return FleetState(
            goal_pri=tuple(self.goal_pri),
            assign=self.assign,
            faults=tuple(u.fault for u in self.uavs),
            avail=tuple(int(u.activity == "idle") for u in self.uavs),
        )

    def achieve_prob(self, fault: int) -> float:
        if fault == 1:
            return self.cfg.fleet_achieve_healthy
        if fault <= 4:
            return self.cfg.fleet_achieve_mild
        return self.cfg.fleet_achieve_severe


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    goal_pri: tuple[int, ...]
    decision: tuple[int, ...]
    logged: tuple[int, ...]
    faults: tuple[int, ...]
    avail: tuple[int, ...]
    locs: tuple[int, ...]
    socs: tuple[float, ...]
    commits: tuple[int, ...]
    reach: tuple[tuple[int, ...], ...]
    bids: tuple[tuple[float, ...], ...]  # per UAV, per goal
    top_q: tuple[tuple[tuple[int, ...], float], ...]  # top-3 (decision, q)


@dataclass
class MissionTrace:
    records: list[EpochRecord]
    seed: int
    mode: str

    @property
    def assignments(self) -> list[tuple[int, ...]]:
        return [r.logged for r in self.records]

    def to_csv(self) -> str:
        """One row per epoch per UAV, long format."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["epoch", "uav", "goal_pri", "decision", "logged", "fault",
             "avail", "loc", "soc", "commit", "reach", "bids"]
        )
        for r in self.records:
            for l in range(len(r.faults)):
                w.writerow(
                    [
                        r.epoch,
                        l + 1,
                        "/".join(map(str, r.goal_pri)),
                        "/".join(map(str, r.decision)),
                        "/".join(map(str, r.logged)),
                        r.faults[l],
                        r.avail[l],
                        r.locs[l],
                        f"{r.socs[l]:.6f}",
                        r.commits[l],
                        "/".join(map(str, r.reach[l])),
                        "/".join(f"{b:.6f}" for b in r.bids[l]),
                    ]
                )
        return buf.getvalue()

    def to_json_events(self) -> str:
        events = []
        for r in self.records:
            events.append(
                {
                    "epoch": r.epoch,
                    "goals": list(r.goal_pri),
                    "decision": list(r.decision),
                    "logged": list(r.logged),
                    "uavs": [
                        {
                            "fault": r.faults[l],
                            "avail": r.avail[l],
                            "loc": r.locs[l],
                            "soc": round(r.socs[l], 6),
                            "commit": r.commits[l],
                            "reach": list(r.reach[l]),
                            "bids": [
                                round(b, 6) if math.isfinite(b) else None
                                for b in r.bids[l]
                            ],
                        }
                        for l in range(len(r.faults))
                    ],
                    "topQ": [
                        {"decision": list(d), "q": round(q, 6)}
                        for d, q in r.top_q
                    ],
                }
            )
        return json.dumps(events, sort_keys=True)


def step_epoch(
    world: World,
    uav_policy: UavPolicy,
    fleet_policy: FleetPolicy,
    sampler: OutcomeSampler,
    events: list[ScenarioEvent] = (),
    decide=None,
) -> EpochRecord:
    """Advance one decision epoch; returns the epoch's trace record.

    ``decide`` overrides the assignment rule (used by baseline policies);
    it receives (world, fleet_state, bids) and returns a decision vector.
    """
    cfg = world.cfg

    # (1) operator updates at the epoch boundary
    for ev in events:
        if ev.kind == "set_priority":
            world.goal_pri[ev.target - 1] = int(ev.value)
        elif ev.kind == "inject_fault":
            world.uavs[ev.target - 1].fault = int(ev.value)
        elif ev.kind == "set_soc":
            world.uavs[ev.target - 1].soc = float(ev.value)

    # (2)-(4) sensor refresh, bids, assignment decision
    states = [world.uav_state(l) for l in range(cfg.z)]
    bid_vectors = [uav_policy.bids(s) for s in states]
    bids = np.column_stack([bv.goal_values for bv in bid_vectors])  # (k, z)
    fstate = world.fleet_state()
    if decide is None:
        decision, q = decide_assignment(fleet_policy, fstate, bids)
    else:
        decision = tuple(decide(world, fstate, bids))
        q = fleet_policy.q_live(fstate, bids)
    order = np.argsort(-q, kind="stable")[:3]
    top_q = tuple(
        (fleet_policy.model.decisions[int(m)], float(q[int(m)])) for m in order
    )

    # figure-style rendering: all assigned goals already achieved -> [0,0]
    assigned_live = [j for j in decision if j != 0 and world.goal_pri[j - 1] > 0]
    logged = decision if assigned_live else (0,) * cfg.z

    record = EpochRecord(
        epoch=world.epoch,
        goal_pri=tuple(world.goal_pri),
        decision=decision,
        logged=logged,
        faults=tuple(u.fault for u in world.uavs),
        avail=tuple(int(u.activity == "idle") for u in world.uavs),
        locs=tuple(u.loc for u in world.uavs),
        socs=tuple(u.soc for u in world.uavs),
        commits=tuple(u.commit for u in world.uavs),
        reach=tuple(s.reach for s in states),
        bids=tuple(tuple(float(b) for b in bv.goal_values) for bv in bid_vectors),
        top_q=top_q,
    )

    # (5)-(6) dispatch and stochastic outcomes (land at the next epoch)
    for l, u in enumerate(world.uavs):
        if u.activity != "idle":
            # ongoing service/recharge completes at the end of this epoch
            if u.activity == "serv":
                u.fault = 1
            else:
                u.soc = 1.0
            u.activity = "idle"
            continue
        mu = decision[l]
        if mu != 0:
            u.commit = mu
            if states[l].reach[mu - 1]:
                tour = world._goal_tours[mu - 1]
                dist = assignment_distance(tour, cfg.centroid(u.loc))
                full = flight_range(1.0, cfg.power_profile)
                u.soc = max(0.0, u.soc - dist / full)
                u.loc = cfg.goal_regions[mu - 1]
                if world.goal_pri[mu - 1] > 0 and sampler.bernoulli(
                    world.achieve_prob(u.fault)
                ):
                    world.goal_pri[mu - 1] = 0
                    u.commit = 0
        else:
            # unassigned: a UAV may dispatch itself for service/recharge
            top = bid_vectors[l].top_action
            if top == cfg.k:
                u.pending_activity = "serv"
            elif top == cfg.k + 1:
                u.pending_activity = "charge"

    for u in world.uavs:
        if u.activity == "idle" and u.pending_activity != "idle":
            u.activity = u.pending_activity
        u.pending_activity = "idle"
        # fault evolution (service resets are handled at completion above)
        u.fault = sampler.categorical(world._fault_kernel[u.fault - 1]) + 1

    for j in range(cfg.k):
        if world.goal_pri[j] == 0 and sampler.bernoulli(cfg.p_recur):
            world.goal_pri[j] = 1 + sampler.categorical(
                [1.0 - cfg.p_recur_high, cfg.p_recur_high]
            )

    world.assign = decision
    world.epoch += 1
    return record


def run_scenario(
    cfg: MissionConfig,
    scenario: MissionScenario,
    uav_policy: UavPolicy,
    fleet_policy: FleetPolicy,
    decide=None,
) -> MissionTrace:
    """Run a scenario to completion; deterministic given (seed, mode)."""
    world = World(cfg, scenario)
    sampler = OutcomeSampler(scenario.seed, expected=scenario.mode == "expected")
    recurrence_pending = scenario.mode == "sampled" and cfg.p_recur > 0
    records = []
    for _ in range(scenario.epoch_limit):
        events = [ev for ev in scenario.events if ev.epoch == world.epoch]
        done = all(g == 0 for g in world.goal_pri) and not any(
            ev.epoch >= world.epoch and ev.kind == "set_priority"
            for ev in scenario.events
        )
        records.append(
            step_epoch(world, uav_policy, fleet_policy, sampler, events, decide)
        )
        if done and not recurrence_pending:
            break
    return MissionTrace(records=records, seed=scenario.seed, mode=scenario.mode)


# -- baseline assignment rules ---------------------------------------------


def greedy_nearest_decision(world: World, fstate: FleetState, bids) -> tuple:
    """Assign each live goal (highest priority first) to the nearest
    available UAV that can reach it; no lookahead."""
    cfg = world.cfg
    decision = [0] * cfg.z
    taken = set()
    goals = sorted(
        (j for j in range(1, cfg.k + 1) if world.goal_pri[j - 1] > 0),
        key=lambda j: (-world.goal_pri[j - 1], j),
    )
    for j in goals:
        best, best_d = None, np.inf
        for l, u in enumerate(world.uavs):
            if l in taken or u.activity != "idle":
                continue
            if not world.reach_flags(l)[j - 1]:
                continue
            d = assignment_distance(world._goal_tours[j - 1], cfg.centroid(u.loc))
            if d < best_d:
                best, best_d = l, d
        if best is not None:
            decision[best] = j
            taken.add(best)
    if not any(decision):
        return _fallback_decision(cfg)
    return tuple(decision)


def random_feasible_decision(rng: np.random.Generator):
    """Baseline factory: uniformly random feasible assignment."""

    def decide(world: World, fstate: FleetState, bids) -> tuple:
        cfg = world.cfg
        decision = [0] * cfg.z
        goals = [j for j in range(1, cfg.k + 1) if world.goal_pri[j - 1] > 0]
        rng.shuffle(goals)
        order = list(rng.permutation(cfg.z))
        for l in order:
            u = world.uavs[l]
            if u.activity != "idle" or not goals:
                continue
            feasible = [j for j in goals if world.reach_flags(l)[j - 1]]
            if feasible:
                j = int(rng.choice(feasible))
                decision[l] = j
                goals.remove(j)
        if not any(decision):
            return _fallback_decision(cfg)
        return tuple(decision)

    return decide


def _fallback_decision(cfg: MissionConfig) -> tuple:
    # the decision set excludes the all-zero vector; [0,..,0,1] is the
    # canonical stand-in when nothing is assignable (logged as [0,0])
    return (0,) * (cfg.z - 1) + (1,)


def compare_baselines(
    cfg: MissionConfig,
    scenario: MissionScenario,
    uav_policy: UavPolicy,
    fleet_policy: FleetPolicy,
    runs: int = 500,
) -> dict[str, dict[str, float]]:
    """Mean +/- stderr of cumulative discounted assignment cost (and
    completion epoch) for the MDP policy vs the two baselines."""
    from .fleetassigner import fleet_cost

    seeds = np.random.SeedSequence(scenario.seed).spawn(runs)
    out: dict[str, dict[str, float]] = {}
    rules = {
        "mdp": None,
        "greedyNearest": greedy_nearest_decision,
        "randomFeasible": None,  # needs per-run rng, built below
    }
    for name in rules:
        costs = np.empty(runs)
        lengths = np.empty(runs)
        for i, ss in enumerate(seeds):
            run_seed = int(ss.generate_state(1)[0] % (2**31))
            sc = replace(scenario, seed=run_seed, mode="sampled")
            decide = rules[name]
            if name == "randomFeasible":
                decide = random_feasible_decision(
                    np.random.default_rng(run_seed + 1)
                )
            trace = run_scenario(cfg, sc, uav_policy, fleet_policy, decide=decide)
            total = 0.0
            done_at = len(trace.records)
            for t, r in enumerate(trace.records):
                st = FleetState(
                    goal_pri=r.goal_pri,
                    assign=(0,) * cfg.z,
                    faults=r.faults,
                    avail=r.avail,
                )
                bids = np.array(r.bids).T
                total += cfg.gamma**t * fleet_cost(cfg, st, r.decision, bids)
                if all(g == 0 for g in r.goal_pri) and done_at == len(
                    trace.records
                ):
                    done_at = r.epoch
            costs[i] = total
            lengths[i] = done_at
        out[name] = {
            "mean_cost": float(costs.mean()),
            "stderr_cost": float(costs.std(ddof=1) / np.sqrt(runs)),
            "mean_completion": float(lengths.mean()),
        }
    return out
