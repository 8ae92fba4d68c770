"""Network boundary for live mission steering.

A single authoritative simulation loop owns the world state. Operator
commands arrive over one HTTP endpoint, are validated immediately, and
are queued to take effect only at the next epoch boundary -- the ack
reports that effective epoch. Telemetry snapshots fan out over a
persistent WebSocket channel, one per epoch plus a refresh after each
accepted command; slow subscribers are caught up from a bounded ring
buffer by dropping to the latest snapshot.

The service is a pure boundary: it drives the simulator exclusively
through the public scenario-event interface, so a scripted scenario run
with the service disabled is byte-identical to one run without it.

JSON schemas (all versioned with a ``v`` field):

- Telemetry ``{v, epoch, goals[], uavs[], decision{}}``
- Command   ``{v, kind, args{}}``
- Ack       ``{v, accepted, effectiveEpoch, reason?}``
"""

from __future__ import annotations

import asyncio
import json
import math
from collections import deque
from dataclasses import dataclass, field

# module-level so string annotations (PEP 563) resolve for route signatures
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .config import MissionConfig
from .fleetassigner import FleetPolicy
from .missionsim import (
    MissionScenario,
    OutcomeSampler,
    ScenarioEvent,
    World,
    step_epoch,
)
from .uavbidder import UavPolicy

__all__ = [
    "SCHEMA_VERSION",
    "TelemetrySnapshot",
    "OperatorCommand",
    "Ack",
    "CommandError",
    "CoordService",
    "build_app",
]

SCHEMA_VERSION = 1
COMMAND_KINDS = (
    "setGoalPriority",
    "injectFault",
    "setSoc",
    "pause",
    "resume",
    "stepOnce",
    "reset",
)
RING_BUFFER_SIZE = 256


class CommandError(ValueError):
    """Raised when an operator command fails validation."""


@dataclass(frozen=True)
class TelemetrySnapshot:
    """One epoch's world view, consistent with the simulator at ``epoch``."""

    epoch: int
    goals: tuple[int, ...]
    uavs: tuple[dict, ...]
    decision: dict
    paused: bool

    def to_message(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "epoch": self.epoch,
            "goals": list(self.goals),
            "uavs": [dict(u) for u in self.uavs],
            "decision": dict(self.decision),
            "paused": self.paused,
        }


@dataclass(frozen=True)
class OperatorCommand:
    """Validated operator intent; raw JSON is parsed via :meth:`from_message`."""

    kind: str
    args: dict = field(default_factory=dict)

    @classmethod
    def from_message(cls, raw: dict) -> "OperatorCommand":
        if not isinstance(raw, dict):
            raise CommandError("command must be a JSON object")
        if raw.get("v") != SCHEMA_VERSION:
            raise CommandError(f"unsupported schema version {raw.get('v')!r}")
        kind = raw.get("kind")
        if kind not in COMMAND_KINDS:
            raise CommandError(f"unknown command kind {kind!r}")
        args = raw.get("args", {})
        if not isinstance(args, dict):
            raise CommandError("args must be an object")
        return cls(kind=kind, args=args)

    def validate(self, cfg: MissionConfig):
        a = self.args
        if self.kind == "setGoalPriority":
            goal, level = a.get("goal"), a.get("level")
            if not (isinstance(goal, int) and 1 <= goal <= cfg.k):
                raise CommandError(f"goal must be 1..{cfg.k}")
            if level not in (0, 1, 2):
                raise CommandError("level must be 0, 1 or 2")
        elif self.kind == "injectFault":
            uav, fault = a.get("uav"), a.get("faultIndex")
            if not (isinstance(uav, int) and 1 <= uav <= cfg.z):
                raise CommandError(f"uav must be 1..{cfg.z}")
            if not (isinstance(fault, int) and 1 <= fault <= 18):
                raise CommandError("faultIndex must be 1..18")
        elif self.kind == "setSoc":
            uav, frac = a.get("uav"), a.get("fraction")
            if not (isinstance(uav, int) and 1 <= uav <= cfg.z):
                raise CommandError(f"uav must be 1..{cfg.z}")
            if not (isinstance(frac, (int, float)) and 0.0 <= frac <= 1.0):
                raise CommandError("fraction must lie in [0, 1]")
        # pause/resume/stepOnce/reset carry no validated payload; reset may
        # name a scenario but only ones preloaded into the service.
        elif self.kind == "reset" and a.get("scenario") not in (None, "initial"):
            raise CommandError("only the initial scenario can be reset to")


@dataclass(frozen=True)
class Ack:
    accepted: bool
    effective_epoch: int | None = None
    reason: str | None = None

    def to_message(self) -> dict:
        msg: dict = {"v": SCHEMA_VERSION, "accepted": self.accepted}
        if self.effective_epoch is not None:
            msg["effectiveEpoch"] = self.effective_epoch
        if self.reason is not None:
            msg["reason"] = self.reason
        return msg


def _finite(x: float) -> float | None:
    return round(float(x), 6) if math.isfinite(x) else None


class CoordService:
    """Single-writer simulation loop with queued commands and telemetry
    fan-out. All mutation happens in :meth:`step` / :meth:`apply_command`,
    which the HTTP layer serializes through one asyncio event loop."""

    def __init__(
        self,
        cfg: MissionConfig,
        scenario: MissionScenario,
        uav_policy: UavPolicy,
        fleet_policy: FleetPolicy,
    ):
        self.cfg = cfg
        self.scenario = scenario
        self.uav_policy = uav_policy
        self.fleet_policy = fleet_policy
        self.paused = True
        self.ring: deque[TelemetrySnapshot] = deque(maxlen=RING_BUFFER_SIZE)
        self._subscribers: list[asyncio.Queue] = []
        self._pending: list[ScenarioEvent] = []
        self._reset()

    # -- state ---------------------------------------------------------------

    def _reset(self):
        self.world = World(self.cfg, self.scenario)
        self.sampler = OutcomeSampler(
            self.scenario.seed, expected=self.scenario.mode == "expected"
        )
        self._pending.clear()
        self.ring.clear()
        self.last_record = None

    def snapshot(self) -> TelemetrySnapshot:
        """Current world view; pre-step worlds report the initial state."""
        w = self.world
        r = self.last_record
        uavs = []
        for l, u in enumerate(w.uavs):
            bids = r.bids[l] if r else ()
            order = sorted(range(len(bids)), key=lambda j: -bids[j])[:3]
            uavs.append(
                {
                    "id": l + 1,
                    "assignment": r.decision[l] if r else 0,
                    "fault": u.fault,
                    "available": u.activity == "idle",
                    "loc": u.loc,
                    "soc": round(u.soc, 6),
                    "topBids": [
                        {"goal": j + 1, "value": _finite(bids[j])} for j in order
                    ],
                }
            )
        decision = {
            "assigned": list(r.logged) if r else [0] * self.cfg.z,
            "topQ": [
                {"decision": list(d), "q": _finite(q)} for d, q in r.top_q
            ]
            if r
            else [],
        }
        return TelemetrySnapshot(
            epoch=w.epoch,
            goals=tuple(w.goal_pri),
            uavs=tuple(uavs),
            decision=decision,
            paused=self.paused,
        )

    # -- mutation (single writer) ---------------------------------------------

    def step(self) -> TelemetrySnapshot:
        """Advance one epoch, applying queued commands at the boundary."""
        events, self._pending = self._pending, []
        events += [
            ev for ev in self.scenario.events if ev.epoch == self.world.epoch
        ]
        self.last_record = step_epoch(
            self.world, self.uav_policy, self.fleet_policy, self.sampler, events
        )
        snap = self.snapshot()
        self._publish(snap)
        return snap

    def apply_command(self, cmd: OperatorCommand) -> Ack:
        """Validate now, apply at the next epoch boundary; never mid-epoch."""
        try:
            cmd.validate(self.cfg)
        except CommandError as exc:
            return Ack(accepted=False, reason=str(exc))
        epoch = self.world.epoch
        if cmd.kind == "setGoalPriority":
            self._pending.append(ScenarioEvent(
                epoch, "set_priority", cmd.args["goal"], cmd.args["level"]
            ))
        elif cmd.kind == "injectFault":
            self._pending.append(ScenarioEvent(
                epoch, "inject_fault", cmd.args["uav"], cmd.args["faultIndex"]
            ))
        elif cmd.kind == "setSoc":
            self._pending.append(ScenarioEvent(
                epoch, "set_soc", cmd.args["uav"], cmd.args["fraction"]
            ))
        elif cmd.kind == "pause":
            self.paused = True
        elif cmd.kind == "resume":
            self.paused = False
        elif cmd.kind == "stepOnce":
            self.step()
            return Ack(accepted=True, effective_epoch=self.world.epoch - 1)
        elif cmd.kind == "reset":
            self._reset()
            self.paused = True
        # world-state commands land when the queued event is consumed, i.e.
        # the epoch the world is currently waiting to run
        self._publish(self.snapshot())
        return Ack(accepted=True, effective_epoch=epoch)

    # -- telemetry fan-out -----------------------------------------------------

    def _publish(self, snap: TelemetrySnapshot):
        self.ring.append(snap)
        for q in self._subscribers:
            # backpressure: drop the stale snapshot, keep only the latest
            if q.full():
                try:
                    q.get_nowait()
                except asyncio.QueueEmpty:
                    pass
            q.put_nowait(snap)

    def subscribe(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue(maxsize=RING_BUFFER_SIZE)
        q.put_nowait(self.ring[-1] if self.ring else self.snapshot())
        self._subscribers.append(q)
        return q

    def unsubscribe(self, q: asyncio.Queue):
        if q in self._subscribers:
            self._subscribers.remove(q)


def build_app(service: CoordService, tick_seconds: float = 0.5):
    """FastAPI app: POST /command, WS /telemetry, GET /health."""
    app = FastAPI(title="searchmesh coordination service")
    app.state.service = service

    async def _run_loop():
        while True:
            await asyncio.sleep(tick_seconds)
            if not service.paused:
                service.step()

    @app.on_event("startup")
    async def _start():
        app.state.loop_task = asyncio.create_task(_run_loop())

    @app.on_event("shutdown")
    async def _stop():
        app.state.loop_task.cancel()

    @app.get("/health")
    async def health():
        return {"v": SCHEMA_VERSION, "status": "ok", "epoch": service.world.epoch}

    @app.post("/command")
    async def command(raw: dict):
        try:
            cmd = OperatorCommand.from_message(raw)
        except CommandError as exc:
            return Ack(accepted=False, reason=str(exc)).to_message()
        return service.apply_command(cmd).to_message()

    @app.websocket("/telemetry")
    async def telemetry(ws: WebSocket):
        await ws.accept()
        queue = service.subscribe()
        try:
            while True:
                snap = await queue.get()
                await ws.send_text(json.dumps(snap.to_message(), sort_keys=True))
        except WebSocketDisconnect:
            pass
        finally:
            service.unsubscribe(queue)

    return app
