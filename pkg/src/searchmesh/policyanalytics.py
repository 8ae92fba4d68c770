"""Qualitative structure checks over solved policies.

Formalizes the prose conditions under which each decision should be
optimal as explicit predicates over state fields, then measures how much
of each decision's support satisfies its predicate. The predicate text
is embedded in the report so any deviation is auditable.

Three support notions are reported per decision:

* ``chosen``     - states where the extracted policy picks the decision
                   (argmax with ties to the lowest index); these counts
                   partition the state space.
* ``support``    - states where the decision is the *unique* argmax.
                   Predicate fractions are measured here, because tie
                   classes (e.g. states where every assignment is equally
                   hopeless) are absorbed wholesale by the lowest-indexed
                   decision and say nothing about when a decision is
                   genuinely preferred.
* ``attainable`` - states where the decision attains the optimal value
                   (ties included); emptiness is judged on this set.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .config import MissionConfig
from .fleetassigner import FactoredFleetModel
from .mdpcore import MdpModel, ValueFunction
from .uavbidder import UavStateCodec, uav_actions

__all__ = ["TrendRow", "PolicyTrendReport", "uav_policy_trends", "fleet_policy_trends"]

TIE_TOL = 1e-9


@dataclass(frozen=True)
class TrendRow:
    decision: str
    predicate: str
    support: int  # unique-argmax states
    satisfying: int  # support states satisfying the predicate
    chosen: int  # states the tie-broken policy assigns to this decision
    attainable: int  # states where the decision attains the optimum

    @property
    def fraction(self) -> float:
        return self.satisfying / self.support if self.support else float("nan")


@dataclass
class PolicyTrendReport:
    level: str
    total_states: int
    rows: list[TrendRow]
    extras: dict[str, float] = field(default_factory=dict)

    def support_partition_ok(self) -> bool:
        """The tie-broken policy's supports must partition the state space."""
        return sum(r.chosen for r in self.rows) == self.total_states

    def to_text(self) -> str:
        lines = [f"policy trend report ({self.level}, {self.total_states} states)"]
        for r in self.rows:
            frac = f"{r.fraction:.4f}" if r.support else "n/a"
            lines.append(
                f"  {r.decision:<12} chosen {r.chosen:>8}  unique {r.support:>8}  "
                f"attainable {r.attainable:>8}  satisfying {r.satisfying:>8}  "
                f"fraction {frac}"
            )
            lines.append(f"    predicate: {r.predicate}")
        for key, val in sorted(self.extras.items()):
            lines.append(f"  {key} = {val:.6f}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "decision", "chosen", "support", "attainable",
                    "satisfying", "fraction", "predicate"])
        for r in self.rows:
            w.writerow([self.level, r.decision, r.chosen, r.support,
                        r.attainable, r.satisfying,
                        f"{r.fraction:.6f}" if r.support else "",
                        r.predicate])
        for key, val in sorted(self.extras.items()):
            w.writerow([self.level, key, "", "", "", "", f"{val:.6f}", ""])
        return buf.getvalue()


def _support_sets(q: np.ndarray):
    """(policy, unique, attainable) masks from a q table."""
    policy = np.argmax(q, axis=1)
    best = q.max(axis=1)
    attainable = q >= best[:, None] - TIE_TOL
    unique = attainable.sum(axis=1) == 1
    return policy, unique, attainable


def _row(decision, predicate, policy_mask, unique, attain_col, cond) -> TrendRow:
    sup = policy_mask & unique
    return TrendRow(
        decision=decision,
        predicate=predicate,
        support=int(sup.sum()),
        satisfying=int((sup & cond).sum()),
        chosen=int(policy_mask.sum()),
        attainable=int(attain_col.sum()),
    )


def uav_policy_trends(
    cfg: MissionConfig,
    model: MdpModel,
    vf: ValueFunction,
    codec: UavStateCodec,
) -> PolicyTrendReport:
    """Per-action support statistics for the goal-bidding policy."""
    vf.require_converged()
    q = model.q_matrix(np.asarray(vf.values, dtype=np.float64))
    policy, unique, attainable = _support_sets(q)
    comp = codec.components()
    fault, reach, goal = comp["fault"], comp["reach"], comp["goal_pri"]
    names = uav_actions(cfg.k)
    rows: list[TrendRow] = []

    for j in range(1, cfg.k + 1):
        cond = (reach[:, j - 1] == 1) & (fault == 1)
        rows.append(_row(
            names[j - 1],
            f"r_{j} = 1 and f = 1 (goal within reach, no fault)",
            policy == (j - 1), unique, attainable[:, j - 1], cond,
        ))

    rows.append(_row(
        "serv", "f >= 2 (any fault present)",
        policy == cfg.k, unique, attainable[:, cfg.k], fault >= 2,
    ))

    in_range = reach.sum(axis=1)
    rows.append(_row(
        "charge", "count of in-range goals <= 2",
        policy == cfg.k + 1, unique, attainable[:, cfg.k + 1], in_range <= 2,
    ))

    commit = comp["commit"]
    idle_ok = np.all((reach == 0) | (goal == 0), axis=1)
    committed_live = np.zeros(len(commit), dtype=bool)
    for j in range(1, cfg.k + 1):
        committed_live |= (
            (commit == j) & (goal[:, j - 1] > 0) & (reach[:, j - 1] == 1)
        )
    rows.append(_row(
        "continue",
        "every goal out of reach or achieved, or the UAV is committed to "
        "a live in-range goal (continue = keep flying the current sortie)",
        policy == cfg.k + 2, unique, attainable[:, cfg.k + 2],
        idle_ok | committed_live,
    ))

    faulty = (fault >= 2) & (fault <= 9)
    camera = fault > 9
    charge_sup = policy == cfg.k + 1
    extras = {
        "serv_fraction_f_2_to_9": float(
            (policy[faulty] == cfg.k).mean() if faulty.any() else np.nan
        ),
        "serv_fraction_f_gt_9": float(
            (policy[camera] == cfg.k).mean() if camera.any() else np.nan
        ),
        "charge_mean_in_range_goals": float(
            in_range[charge_sup].mean() if charge_sup.any() else np.nan
        ),
        "pursue_when_unreachable_or_faulty": float(
            sum(
                int((((policy == j) & ((reach[:, j] == 0) | (fault != 1)))).sum())
                for j in range(cfg.k)
            )
        ),
    }
    return PolicyTrendReport(
        level="uav", total_states=model.state_count, rows=rows, extras=extras
    )


def _fleet_predicate(cfg: MissionConfig, mu: tuple[int, ...]) -> str:
    assigned = [j for j in mu if j != 0]
    if len(assigned) == cfg.z:
        spare = [j for j in range(1, cfg.k + 1) if j not in assigned]
        spare_txt = " and ".join(f"g_{j} in {{0,1}}" for j in spare)
        return (
            "all UAVs available with at most mild faults (f <= 4), and "
            f"({spare_txt} or all goals high priority)"
        )
    j = assigned[0]
    active = [l for l, a in enumerate(mu) if a != 0][0]
    idle = [l for l in range(cfg.z) if l != active]
    idle_txt = " and ".join(
        f"(UAV {l + 1} unavailable or f_{l + 1} >= 5)" for l in idle
    )
    return (
        f"g_{j} >= 1 (goal {j} unachieved), UAV {active + 1} available, "
        f"{idle_txt}"
    )


def fleet_policy_trends(
    cfg: MissionConfig,
    model: FactoredFleetModel,
    vf: ValueFunction,
) -> PolicyTrendReport:
    """Per-decision support statistics for the assignment policy."""
    vf.require_converged()
    q = model.q_matrix(np.asarray(vf.values, dtype=np.float64))
    policy, unique, attainable = _support_sets(q)
    comp = model.codec.components()
    goal, fault, avail = comp["goal_pri"], comp["faults"], comp["avail"]
    rows: list[TrendRow] = []

    for m, mu in enumerate(model.decisions):
        assigned = [j for j in mu if j != 0]
        if len(assigned) == cfg.z:
            cond = np.all(avail == 1, axis=1) & np.all(fault <= 4, axis=1)
            spare_ok = np.ones(len(goal), dtype=bool)
            for j in range(1, cfg.k + 1):
                if j not in assigned:
                    spare_ok &= goal[:, j - 1] <= 1
            cond &= spare_ok | np.all(goal == 2, axis=1)
        else:
            j = assigned[0]
            active = [l for l, a in enumerate(mu) if a != 0][0]
            cond = (goal[:, j - 1] >= 1) & (avail[:, active] == 1)
            for l in range(cfg.z):
                if l != active:
                    cond &= (avail[:, l] == 0) | (fault[:, l] >= 5)
        rows.append(_row(
            str(list(mu)), _fleet_predicate(cfg, mu),
            policy == m, unique, attainable[:, m], cond,
        ))
    extras = {
        "empty_attainable_sets": float(
            sum(1 for r in rows if r.attainable == 0)
        ),
        "empty_unique_supports": float(
            sum(1 for r in rows if r.support == 0)
        ),
    }
    return PolicyTrendReport(
        level="fleet", total_states=model.state_count, rows=rows, extras=extras
    )
