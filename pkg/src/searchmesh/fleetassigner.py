"""Base-station dynamic task-assignment MDP and live decision rule.

Fleet state: (goal priorities, current assignment, per-UAV faults,
per-UAV availability). Decisions are the assignment vectors with
pairwise-distinct nonzero entries, excluding the all-zero vector.

The full case-study model has 559,872 states and highly structured
transitions (a Kronecker product of per-UAV fault kernels and per-goal
priority kernels, with deterministic assignment/availability updates).
Materializing an explicit sparse matrix for it would not fit in memory,
so ``FactoredFleetModel`` evaluates the Bellman backup by tensor
contraction instead; it exposes the same duck-typed interface the
mdpcore solver uses. Small instances can still be materialized as an
explicit ``MdpModel`` for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import comb, factorial

import numpy as np
import scipy.sparse as sp

from .config import MissionConfig
from .mdpcore import MdpModel, ModelValidationError, ValueFunction
from .uavbidder import NUM_FAULTS, fault_kernel

__all__ = [
    "FleetState",
    "FleetStateCodec",
    "enumerate_decisions",
    "decision_count_closed_form",
    "fleet_cost",
    "fleet_achieve_prob",
    "goal_priority_kernel",
    "FactoredFleetModel",
    "build_fleet_mdp",
    "materialize_sparse",
    "FleetPolicy",
    "decide_assignment",
    "bid_ranks",
]


@dataclass(frozen=True)
class FleetState:
    """Factored fleet state; goals/assignments 1-based, 0 = unassigned."""

    goal_pri: tuple[int, ...]
    assign: tuple[int, ...]
    faults: tuple[int, ...]
    avail: tuple[int, ...]

    def validate(self, k: int, z: int):
        if len(self.goal_pri) != k or any(g not in (0, 1, 2) for g in self.goal_pri):
            raise ValueError(f"goal_pri must be {k} ternary flags")
        if len(self.assign) != z or any(not 0 <= a <= k for a in self.assign):
            raise ValueError(f"assign must be {z} entries in 0..{k}")
        nz = [a for a in self.assign if a != 0]
        if len(nz) != len(set(nz)):
            raise ValueError("a goal may be assigned to at most one UAV")
        if len(self.faults) != z or any(
            not 1 <= f <= NUM_FAULTS for f in self.faults
        ):
            raise ValueError(f"faults must be {z} entries in 1..18")
        if len(self.avail) != z or any(d not in (0, 1) for d in self.avail):
            raise ValueError(f"avail must be {z} binary flags")


class FleetStateCodec:
    """Mixed-radix index over (goal_pri, assign, faults, avail).

    Goal trits are most significant (goal 1 highest), then the assignment
    code, per-UAV faults, and availability bits (UAV 1 highest in each).
    The assignment axis covers the full (k+1)^z grid, including codes
    with duplicate nonzero entries, so the index space matches the
    published state count exactly; duplicate codes are unreachable.
    """

    def __init__(self, k: int, z: int):
        self.k = k
        self.z = z
        self.n_goal = 3**k
        self.n_assign = (k + 1) ** z
        self.n_fault = NUM_FAULTS**z
        self.n_avail = 2**z
        self.state_count = self.n_goal * self.n_assign * self.n_fault * self.n_avail

    def goal_code(self, goal_pri: tuple[int, ...]) -> int:
        code = 0
        for g in goal_pri:
            code = code * 3 + g
        return code

    def assign_code(self, assign: tuple[int, ...]) -> int:
        code = 0
        for a in assign:
            code = code * (self.k + 1) + a
        return code

    def fault_code(self, faults: tuple[int, ...]) -> int:
        code = 0
        for f in faults:
            code = code * NUM_FAULTS + (f - 1)
        return code

    def avail_code(self, avail: tuple[int, ...]) -> int:
        code = 0
        for d in avail:
            code = code * 2 + d
        return code

    def encode(self, state: FleetState) -> int:
        state.validate(self.k, self.z)
        return (
            (
                (self.goal_code(state.goal_pri) * self.n_assign
                 + self.assign_code(state.assign)) * self.n_fault
                + self.fault_code(state.faults)
            ) * self.n_avail
            + self.avail_code(state.avail)
        )

    def decode(self, index: int) -> FleetState:
        if not 0 <= index < self.state_count:
            raise ValueError(f"index {index} outside 0..{self.state_count - 1}")
        idx, dcode = divmod(index, self.n_avail)
        idx, fcode = divmod(idx, self.n_fault)
        gcode, acode = divmod(idx, self.n_assign)
        avail, faults, assign, goal = [], [], [], []
        for _ in range(self.z):
            dcode, d = divmod(dcode, 2)
            avail.append(d)
        for _ in range(self.z):
            fcode, f0 = divmod(fcode, NUM_FAULTS)
            faults.append(f0 + 1)
        for _ in range(self.z):
            acode, a = divmod(acode, self.k + 1)
            assign.append(a)
        for _ in range(self.k):
            gcode, g = divmod(gcode, 3)
            goal.append(g)
        return FleetState(
            goal_pri=tuple(reversed(goal)),
            assign=tuple(reversed(assign)),
            faults=tuple(reversed(faults)),
            avail=tuple(reversed(avail)),
        )

    def components(self) -> dict[str, np.ndarray]:
        """Vectorized decode of every index into (N,) / (N, z) arrays."""
        idx = np.arange(self.state_count)
        idx, dcode = np.divmod(idx, self.n_avail)
        idx, fcode = np.divmod(idx, self.n_fault)
        gcode, acode = np.divmod(idx, self.n_assign)
        avail = np.empty((self.state_count, self.z), dtype=np.int64)
        faults = np.empty((self.state_count, self.z), dtype=np.int64)
        assign = np.empty((self.state_count, self.z), dtype=np.int64)
        goal = np.empty((self.state_count, self.k), dtype=np.int64)
        for j in range(self.z - 1, -1, -1):
            dcode, avail[:, j] = np.divmod(dcode, 2)
            fcode, f0 = np.divmod(fcode, NUM_FAULTS)
            faults[:, j] = f0 + 1
            acode, assign[:, j] = np.divmod(acode, self.k + 1)
        g = gcode
        for j in range(self.k - 1, -1, -1):
            g, goal[:, j] = np.divmod(g, 3)
        return {"goal_pri": goal, "assign": assign, "faults": faults, "avail": avail}


def enumerate_decisions(k: int, z: int) -> list[tuple[int, ...]]:
    """All assignment vectors in {0..k}^z with pairwise-distinct nonzero
    entries, excluding all-zero.

    Deterministic order: lexicographic over the reversed vector (last
    UAV's assignment most significant). Ties in decideAssignment resolve
    to the earliest decision in this order.
    """
    if k < 1 or z < 1:
        raise ValueError("k and z must be >= 1")
    out = []
    for vec in product(range(k + 1), repeat=z):
        nz = [a for a in vec if a != 0]
        if nz and len(nz) == len(set(nz)):
            out.append(vec)
    out.sort(key=lambda mu: mu[::-1])
    return out


def decision_count_closed_form(k: int, z: int) -> int:
    """sum_m C(z, m) * k!/(k-m)! - 1 over m = 0..min(k, z)."""
    total = sum(
        comb(z, m) * factorial(k) // factorial(k - m) for m in range(min(k, z) + 1)
    )
    return total - 1


# -- cost ---------------------------------------------------------------------


def _fault_tier(faults: np.ndarray) -> np.ndarray:
    """0 healthy, 1 mild {2,3,4}, 2 severe-or-camera (f >= 5)."""
    return np.where(faults >= 5, 2, np.where(faults >= 2, 1, 0))


def fleet_achieve_prob(cfg: MissionConfig, fault: int) -> float:
    """Goal achievement probability by the assigned UAV's health tier."""
    tier = int(_fault_tier(np.asarray(fault)))
    return (
        cfg.fleet_achieve_healthy,
        cfg.fleet_achieve_mild,
        cfg.fleet_achieve_severe,
    )[tier]


def bid_ranks(bids: np.ndarray) -> np.ndarray:
    """Preference rank (0 = best) of each goal per UAV; ties break toward
    the better rank. ``bids`` is a (k, z) matrix of goal values per UAV."""
    bids = np.asarray(bids, dtype=float)
    if bids.ndim != 2:
        raise ValueError(f"bids must be a k x z matrix, got shape {bids.shape}")
    # rank of goal j for UAV l = number of strictly greater bids in column l
    return (bids[None, :, :] > bids[:, None, :]).sum(axis=1)


def _h2_column(
    cfg: MissionConfig, decision: tuple[int, ...], ranks: np.ndarray | None
) -> float:
    h2 = 0.0
    for l, a in enumerate(decision):
        if a == 0:
            h2 += cfg.h2_unassigned
        elif ranks is None:
            h2 += cfg.h2_prior_assigned
        else:
            h2 += min(float(ranks[a - 1, l]), 2.0)
    return h2


def fleet_cost(
    cfg: MissionConfig,
    state: FleetState,
    decision: tuple[int, ...],
    bids: np.ndarray | None = None,
) -> float:
    """Instantaneous assignment cost for one (state, decision) pair.

    With ``bids`` given, h2 charges the preference rank of each UAV's
    assigned goal; without bids the offline prior applies.
    """
    state.validate(cfg.k, cfg.z)
    zeta = np.asarray(cfg.zeta, dtype=float)
    g = np.asarray(state.goal_pri, dtype=float)
    goal_term = float((zeta * g * np.exp(g)).sum())
    tiers = _fault_tier(np.asarray(state.faults))
    h1_cost = np.array([0.0, cfg.h1_mild, cfg.h1_severe])
    h1 = sum(
        float(h1_cost[tiers[l]]) for l, a in enumerate(decision) if a != 0
    )
    ranks = None if bids is None else bid_ranks(bids)
    h2 = _h2_column(cfg, decision, ranks)
    h3 = sum(
        cfg.h3_unavailable
        for l, a in enumerate(decision)
        if a != 0 and state.avail[l] == 0
    )
    return goal_term + h1 + h2 + h3


def goal_priority_kernel(cfg: MissionConfig, p_achieve: float | None) -> np.ndarray:
    """3x3 one-step kernel for a single goal's priority.

    ``p_achieve`` is the effective achievement probability (None or 0 for
    an unassigned/unavailable goal). Achieved goals re-arrive at the
    recurrence rate, at low priority unless ``p_recur_high`` says otherwise.
    """
    K = np.zeros((3, 3))
    K[0] = [
        1.0 - cfg.p_recur,
        cfg.p_recur * (1.0 - cfg.p_recur_high),
        cfg.p_recur * cfg.p_recur_high,
    ]
    p = 0.0 if p_achieve is None else p_achieve
    K[1] = [p, (1.0 - p) * (1.0 - cfg.p_drift), (1.0 - p) * cfg.p_drift]
    K[2] = [p, (1.0 - p) * cfg.p_drift, (1.0 - p) * (1.0 - cfg.p_drift)]
    return K


# -- factored model ------------------------------------------------------------


class FactoredFleetModel:
    """Fleet MDP evaluated by tensor contraction.

    Implements the solver interface (``state_count / action_count / gamma
    / q_matrix``) without materializing transition rows. Successor
    structure per decision mu:

      assignment' = mu (deterministic), availability' = all-available
      (service/recharge outages last one epoch), faults evolve by the
      Kronecker product of per-UAV kernels, and each goal's priority by a
      3x3 kernel whose achievement probability depends on the health and
      availability of the UAV mu assigns to it.
    """

    def __init__(self, cfg: MissionConfig):
        cfg.validate()
        self.cfg = cfg
        self.codec = FleetStateCodec(cfg.k, cfg.z)
        self.decisions = enumerate_decisions(cfg.k, cfg.z)
        self.state_count = self.codec.state_count
        self.action_count = len(self.decisions)
        self.gamma = cfg.gamma
        self.action_mask = None
        self.row_index = None

        self.fault_kernel = fault_kernel(cfg, serv=False)

        c = self.codec
        # per-UAV fault tier / availability over the flat (F, D) axis
        fd = np.arange(c.n_fault * c.n_avail)
        fidx, didx = np.divmod(fd, c.n_avail)
        tiers = np.empty((cfg.z, fd.size), dtype=np.int64)
        avail = np.empty((cfg.z, fd.size), dtype=np.int64)
        for l in range(cfg.z - 1, -1, -1):
            fidx, f0 = np.divmod(fidx, NUM_FAULTS)
            tiers[l] = _fault_tier(f0 + 1)
            didx, avail[l] = np.divmod(didx, 2)
        # 0/1/2 = health tier of an available UAV, 3 = unavailable
        self._eff_tier = np.where(avail == 1, tiers, 3)  # (z, NF*ND)
        self._tier_probs = (
            cfg.fleet_achieve_healthy,
            cfg.fleet_achieve_mild,
            cfg.fleet_achieve_severe,
            0.0,
        )
        self._avail_fd = avail
        self._tiers_fd = tiers
        self.cost = self._build_cost()

    # cost over all states x decisions, vectorized over the factored axes
    def _build_cost(self) -> np.ndarray:
        cfg, c = self.cfg, self.codec
        zeta = np.asarray(cfg.zeta, dtype=float)
        gvals = np.empty((c.n_goal, cfg.k), dtype=np.int64)
        rem = np.arange(c.n_goal)
        for j in range(cfg.k - 1, -1, -1):
            rem, gvals[:, j] = np.divmod(rem, 3)
        goal_term = (zeta[None, :] * gvals * np.exp(gvals)).sum(axis=1)  # (NG,)

        h1_cost = np.array([0.0, cfg.h1_mild, cfg.h1_severe])
        nfd = c.n_fault * c.n_avail
        cost_fd = np.zeros((nfd, self.action_count))
        for m, mu in enumerate(self.decisions):
            for l, a in enumerate(mu):
                if a == 0:
                    cost_fd[:, m] += cfg.h2_unassigned
                else:
                    cost_fd[:, m] += cfg.h2_prior_assigned
                    cost_fd[:, m] += h1_cost[self._tiers_fd[l]]
                    cost_fd[:, m] += cfg.h3_unavailable * (1 - self._avail_fd[l])

        # assemble (NG, NA, NF*ND, M) -> (N, M) by broadcasting
        cost = (
            goal_term[:, None, None, None]
            + cost_fd[None, None, :, :]
        )
        cost = np.broadcast_to(
            cost, (c.n_goal, c.n_assign, nfd, self.action_count)
        )
        return np.ascontiguousarray(cost).reshape(self.state_count, self.action_count)

    def _goal_kron(
        self, mu: tuple[int, ...], key: tuple[int, ...], dtype
    ) -> np.ndarray:
        """(3^k x 3^k) goal-priority kernel for decision mu under one
        effective-tier combination ``key`` (one entry per UAV)."""
        cfg = self.cfg
        assigned_tier = {a: key[l] for l, a in enumerate(mu) if a != 0}
        PG = np.ones((1, 1), dtype=dtype)
        for j in range(1, cfg.k + 1):
            p = (
                self._tier_probs[assigned_tier[j]] if j in assigned_tier else None
            )
            PG = np.kron(PG, goal_priority_kernel(cfg, p).astype(dtype))
        return PG

    def expected_values(self, values: np.ndarray) -> np.ndarray:
        """E[V(s') | s, mu] for all pairs, as an (N, M) array.

        Runs in the dtype of ``values`` so extended-precision sweeps stay
        extended end to end.
        """
        cfg, c = self.cfg, self.codec
        values = np.asarray(values)
        dtype = values.dtype
        nfd = c.n_fault * c.n_avail
        V4 = values.reshape(c.n_goal, c.n_assign, c.n_fault, c.n_avail)
        all_avail = c.n_avail - 1
        K1 = self.fault_kernel.astype(dtype)
        ev = np.empty((c.n_goal, nfd, self.action_count), dtype=dtype)
        for m, mu in enumerate(self.decisions):
            acode = c.assign_code(mu)
            X = V4[:, acode, :, all_avail]  # (NG, NF)
            # contract fault successors one UAV axis at a time
            Y = X.reshape((c.n_goal,) + (NUM_FAULTS,) * cfg.z)
            for l in range(cfg.z):
                Y = np.moveaxis(np.tensordot(Y, K1, axes=(l + 1, 1)), -1, l + 1)
            Y = Y.reshape(c.n_goal, c.n_fault)
            # group (F, D) cells by the effective tiers of the assigned UAVs
            assigned = [l for l, a in enumerate(mu) if a != 0]
            keys = np.zeros(nfd, dtype=np.int64)
            for l in assigned:
                keys = keys * 4 + self._eff_tier[l]
            evm = np.empty((c.n_goal, nfd), dtype=dtype)
            for key in np.unique(keys):
                sel = np.flatnonzero(keys == key)
                digits = [0] * cfg.z
                rem = int(key)
                for l in reversed(assigned):
                    rem, digits[l] = divmod(rem, 4)
                Z = self._goal_kron(mu, tuple(digits), dtype) @ Y  # (NG, NF)
                evm[:, sel] = Z[:, sel // c.n_avail]
            ev[:, :, m] = evm
        out = np.broadcast_to(
            ev[:, None, :, :], (c.n_goal, c.n_assign, nfd, self.action_count)
        )
        return np.ascontiguousarray(out).reshape(self.state_count, self.action_count)

    def q_matrix(self, values: np.ndarray) -> np.ndarray:
        return -self.cost + self.gamma * self.expected_values(values)

    def row_sum_check(self) -> float:
        """Max |row sum - 1| over every (state, decision), via contraction
        against the all-ones vector (exhaustive by linearity)."""
        ev = self.expected_values(np.ones(self.state_count))
        return float(np.max(np.abs(ev - 1.0)))

    def successor_distribution(
        self, state: FleetState, decision: tuple[int, ...]
    ) -> dict[int, float]:
        """Explicit sparse successor row for one (state, decision) pair."""
        cfg, c = self.cfg, self.codec
        state.validate(cfg.k, cfg.z)
        acode = c.assign_code(decision)
        # per-goal kernels under the live health/availability gates
        assigned_p: dict[int, float] = {}
        for l, a in enumerate(decision):
            if a != 0:
                p = fleet_achieve_prob(cfg, state.faults[l])
                assigned_p[a] = p if state.avail[l] == 1 else 0.0
        goal_dists = []
        for j in range(1, cfg.k + 1):
            K = goal_priority_kernel(cfg, assigned_p.get(j))
            goal_dists.append(K[state.goal_pri[j - 1]])
        K1 = fault_kernel(cfg, serv=False)
        fault_dists = [K1[f - 1] for f in state.faults]
        out: dict[int, float] = {}
        for gs in product(*(np.flatnonzero(d) for d in goal_dists)):
            pg = np.prod([goal_dists[j][gs[j]] for j in range(cfg.k)])
            for fs in product(*(np.flatnonzero(d) for d in fault_dists)):
                pf = np.prod([fault_dists[l][fs[l]] for l in range(cfg.z)])
                nxt = FleetState(
                    goal_pri=tuple(int(g) for g in gs),
                    assign=decision,
                    faults=tuple(int(f) + 1 for f in fs),
                    avail=(1,) * cfg.z,
                )
                out[c.encode(nxt)] = out.get(c.encode(nxt), 0.0) + float(pg * pf)
        return out


def materialize_sparse(model: FactoredFleetModel) -> MdpModel:
    """Explicit sparse MdpModel equivalent; only for small instances."""
    N, M = model.state_count, model.action_count
    if N * M > 2_000_000:
        raise ModelValidationError(
            f"refusing to materialize {N} x {M} fleet model explicitly"
        )
    codec = model.codec
    data, indices, indptr = [], [], [0]
    for s in range(N):
        st = codec.decode(s)
        for mu in model.decisions:
            row = model.successor_distribution(st, mu)
            for idx in sorted(row):
                indices.append(idx)
                data.append(row[idx])
            indptr.append(len(data))
    rows = sp.csr_matrix(
        (np.array(data), np.array(indices), np.array(indptr)), shape=(N * M, N)
    )
    return MdpModel(
        state_count=N,
        action_count=M,
        cost=model.cost,
        rows=rows,
        gamma=model.gamma,
    )


def build_fleet_mdp(cfg: MissionConfig) -> FactoredFleetModel:
    """Assemble the task-assignment MDP and verify its stochasticity."""
    model = FactoredFleetModel(cfg)
    dev = model.row_sum_check()
    if dev > 1e-9:
        raise ModelValidationError(
            f"fleet transition rows deviate from 1 by {dev:.3e}"
        )
    return model


# -- live decision rule ---------------------------------------------------------


class FleetPolicy:
    """Solved assignment model with successor values precomputed per
    decision for fast live queries."""

    def __init__(self, model: FactoredFleetModel, vf: ValueFunction):
        vf.require_converged()
        self.model = model
        self.vf = vf
        self.cfg = model.cfg
        c = model.codec
        # EV indexed [decision, goal code, flat (fault, avail) code]
        ev = model.expected_values(vf.values).reshape(
            c.n_goal, c.n_assign, c.n_fault * c.n_avail, model.action_count
        )
        self.ev = np.ascontiguousarray(ev[:, 0].transpose(2, 0, 1))

    def q_live(self, state: FleetState, bids: np.ndarray | None) -> np.ndarray:
        cfg, c = self.cfg, self.model.codec
        state.validate(cfg.k, cfg.z)
        gcode = c.goal_code(state.goal_pri)
        fd = c.fault_code(state.faults) * c.n_avail + c.avail_code(state.avail)
        q = np.empty(self.model.action_count)
        for m, mu in enumerate(self.model.decisions):
            q[m] = -fleet_cost(cfg, state, mu, bids) + cfg.gamma * self.ev[
                m, gcode, fd
            ]
        return q


def decide_assignment(
    policy: FleetPolicy, state: FleetState, bids: np.ndarray | None
) -> tuple[tuple[int, ...], np.ndarray]:
    """Pick the q-maximizing assignment under live bids.

    Ties resolve to the earliest decision in enumeration order (see
    enumerate_decisions), except that a tied decision assigning a
    zero-priority goal never wins over a tied alternative that assigns
    none (dead-goal audit).
    """
    q = policy.q_live(state, bids)
    best = np.max(q)
    tied = np.flatnonzero(q >= best - 1e-12)
    decisions = policy.model.decisions

    def assigns_dead(mu: tuple[int, ...]) -> bool:
        return any(a != 0 and state.goal_pri[a - 1] == 0 for a in mu)

    clean = [m for m in tied if not assigns_dead(decisions[m])]
    pick = int(clean[0] if clean else tied[0])
    return decisions[pick], q
