"""Per-UAV fault-aware goal-bidding MDP.

State: (fault 1..18, reach flags, goal priorities, location, commitment).
Decisions: pursue goal j, request service, request recharge, or continue.
Solving the model yields a value per state-action pair; the goal-action
values are the bids a UAV communicates to the base station.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .config import MissionConfig
from .mdpcore import MdpModel, ValueFunction, q_values

__all__ = [
    "UavState",
    "UavStateCodec",
    "BidVector",
    "uav_actions",
    "fault_kernel",
    "goal_kernel",
    "uav_cost_components",
    "build_uav_mdp",
    "compute_bids",
    "UavPolicy",
]

NUM_FAULTS = 18


def uav_actions(k: int) -> list[str]:
    """Action names in index order: pursue goals, then serv/charge/continue."""
    return [f"goal{j + 1}" for j in range(k)] + ["serv", "charge", "continue"]


@dataclass(frozen=True)
class UavState:
    """Factored UAV state; regions and goals are 1-based, commit 0 = none."""

    fault: int
    reach: tuple[int, ...]
    goal_pri: tuple[int, ...]
    loc: int
    commit: int

    def validate(self, k: int, q: int):
        if not 1 <= self.fault <= NUM_FAULTS:
            raise ValueError(f"fault {self.fault} outside 1..18")
        if len(self.reach) != k or any(r not in (0, 1) for r in self.reach):
            raise ValueError(f"reach must be {k} binary flags")
        if len(self.goal_pri) != k or any(g not in (0, 1, 2) for g in self.goal_pri):
            raise ValueError(f"goal_pri must be {k} ternary flags")
        if not 1 <= self.loc <= q:
            raise ValueError(f"loc {self.loc} outside 1..{q}")
        if not 0 <= self.commit <= k:
            raise ValueError(f"commit {self.commit} outside 0..{k}")


class UavStateCodec:
    """Bijective mixed-radix index over (fault, reach, goal_pri, loc, commit).

    Component order is fault-major: fault, then reach bits (goal 1 most
    significant), goal trits, location, commitment.
    """

    def __init__(self, k: int, q: int):
        self.k = k
        self.q = q
        self.state_count = NUM_FAULTS * 2**k * 3**k * q * (k + 1)

    def encode(self, state: UavState) -> int:
        state.validate(self.k, self.q)
        idx = state.fault - 1
        for r in state.reach:
            idx = idx * 2 + r
        for g in state.goal_pri:
            idx = idx * 3 + g
        idx = idx * self.q + (state.loc - 1)
        idx = idx * (self.k + 1) + state.commit
        return idx

    def decode(self, index: int) -> UavState:
        if not 0 <= index < self.state_count:
            raise ValueError(f"index {index} outside 0..{self.state_count - 1}")
        idx, commit = divmod(index, self.k + 1)
        idx, loc0 = divmod(idx, self.q)
        gs = []
        for _ in range(self.k):
            idx, g = divmod(idx, 3)
            gs.append(g)
        rs = []
        for _ in range(self.k):
            idx, r = divmod(idx, 2)
            rs.append(r)
        return UavState(
            fault=idx + 1,
            reach=tuple(reversed(rs)),
            goal_pri=tuple(reversed(gs)),
            loc=loc0 + 1,
            commit=commit,
        )

    def components(self) -> dict[str, np.ndarray]:
        """Vectorized decode of every index: component arrays of shape (S,)."""
        idx = np.arange(self.state_count)
        idx, commit = np.divmod(idx, self.k + 1)
        idx, loc0 = np.divmod(idx, self.q)
        gvals = np.empty((self.state_count, self.k), dtype=np.int64)
        for j in range(self.k - 1, -1, -1):
            idx, gvals[:, j] = np.divmod(idx, 3)
        rvals = np.empty((self.state_count, self.k), dtype=np.int64)
        for j in range(self.k - 1, -1, -1):
            idx, rvals[:, j] = np.divmod(idx, 2)
        return {
            "fault": idx + 1,
            "reach": rvals,
            "goal_pri": gvals,
            "loc": loc0 + 1,
            "commit": commit,
        }

    # mixed-radix strides of each component in the flat index
    @property
    def strides(self) -> dict[str, int]:
        s_c = 1
        s_l = self.k + 1
        s_g = s_l * self.q  # stride of the least significant goal trit
        s_r = s_g * 3**self.k
        s_f = s_r * 2**self.k
        return {"commit": s_c, "loc": s_l, "goal": s_g, "reach": s_r, "fault": s_f}


@dataclass(frozen=True)
class BidVector:
    """Per-action values at one state; goal entries are the bids.

    Bids are reported for every goal, reachable or not, live or not, so the
    fleet can rank goals by hypothetical worth. Inadmissible actions are
    still excluded from :attr:`top_action`.
    """

    state_index: int
    values: np.ndarray  # aligned with uav_actions(k)
    k: int
    admissible: np.ndarray | None = None  # bool per action, None = all

    @property
    def goal_values(self) -> np.ndarray:
        return self.values[: self.k]

    @property
    def top_action(self) -> int:
        """Preferred admissible action; ties resolve toward the least
        disruptive choice (pursue < serv < charge < continue)."""
        vals = self.values
        if self.admissible is not None:
            vals = np.where(self.admissible, vals, -np.inf)
        rev = vals[::-1]
        return len(vals) - 1 - int(np.argmax(rev))

    def to_message(self, uav_id: int) -> dict:
        return {
            "uavId": uav_id,
            "stateIndex": self.state_index,
            "values": [float(v) for v in self.values],
        }


# -- kernels ----------------------------------------------------------------


def fault_kernel(cfg: MissionConfig, serv: bool) -> np.ndarray:
    """Dense 18x18 one-step fault transition matrix (0-based rows/cols)."""
    K = np.zeros((NUM_FAULTS, NUM_FAULTS))
    if serv:
        # Service repairs the standing fault, but the repaired UAV faces
        # the same next-epoch onset hazard as every healthy UAV (the
        # simulator composes repair with the ambient fault draw the same
        # way). A guaranteed-healthy successor would make service strictly
        # optimal even for fault-free UAVs as onset prophylaxis.
        K[:, 0] = 1.0 - cfg.p_fault_onset
        K[:, 1:4] = cfg.p_fault_onset / 3.0
        return K
    K[0, 0] = 1.0 - cfg.p_fault_onset
    K[0, 1:4] = cfg.p_fault_onset / 3.0
    worsen = cfg.p_mild_worsen
    cam = cfg.p_worsen_camera_share
    for i in range(1, 4):  # mild tier f in {2,3,4}
        K[i, i] = 1.0 - worsen
        K[i, 4:9] = worsen * (1.0 - cam) / 5.0
        K[i, 9:18] = worsen * cam / 9.0
    for i in range(4, 9):  # severe tier f in {5..9}
        K[i, i] = 1.0 - cfg.p_severe_worsen
        K[i, 9:18] += cfg.p_severe_worsen / 9.0
    for i in range(9, 18):  # camera tier is absorbing without service
        K[i, i] = 1.0
    return K


def _achieve_prob(cfg: MissionConfig, fault: np.ndarray) -> np.ndarray:
    """UAV-level goal achievement probability by fault tier."""
    p = np.full(fault.shape, cfg.achieve_faulty)
    p[fault == 1] = cfg.achieve_healthy
    p[fault > 9] = cfg.achieve_camera
    return p


def goal_kernel(
    cfg: MissionConfig, g: np.ndarray, pursued: np.ndarray, reach: np.ndarray,
    fault: np.ndarray,
) -> np.ndarray:
    """Per-state 3-vector over the next priority of one goal.

    Achievement applies only when the goal is actively pursued and within
    reach; achieved goals re-arrive at the recurrence rate; unassigned
    live goals drift between the two priority levels at ``p_drift``.
    """
    n = g.shape[0]
    out = np.zeros((n, 3))
    achieved = g == 0
    out[achieved, 0] = 1.0 - cfg.p_recur
    out[achieved, 1] = cfg.p_recur * (1.0 - cfg.p_recur_high)
    out[achieved, 2] = cfg.p_recur * cfg.p_recur_high
    live = ~achieved
    active = live & (pursued.astype(bool)) & (reach == 1)
    p_ach = _achieve_prob(cfg, fault)
    rows = np.flatnonzero(active)
    out[rows, 0] = p_ach[rows]
    out[rows, g[rows]] = 1.0 - p_ach[rows]
    passive = live & ~active
    rows = np.flatnonzero(passive)
    out[rows, g[rows]] = 1.0 - cfg.p_drift
    out[rows, 3 - g[rows]] += cfg.p_drift
    return out


# -- cost ---------------------------------------------------------------------


def uav_cost_components(cfg: MissionConfig, comp: dict[str, np.ndarray]) -> np.ndarray:
    """Decision-independent cost terms for every state: unattended in-range
    goals + fault/range cost + out-of-range goal cost."""
    g = comp["goal_pri"]
    r = comp["reach"]
    c = comp["commit"]
    f = comp["fault"]
    eta = np.asarray(cfg.eta)
    delt = np.asarray(cfg.delta_cost)
    # The commitment indicator waives the unattended-goal charge only while
    # the platform is healthy: a faulty UAV's commitment does not excuse an
    # in-range goal going unserved.
    committed = (c[:, None] == np.arange(1, cfg.k + 1)[None, :]) & (
        f[:, None] == 1
    )
    term1 = (eta[None, :] * g * r * (~committed)).sum(axis=1)
    # Fault/range cost: a fault-free UAV pays nothing. Charging the healthy
    # tier for reachable goals would reward shedding reach (battery-draining
    # detours become "savings"), inverting the term's purpose of penalizing
    # wasted capability while faulty.
    tier = np.where(f > 9, 2, np.where(f > 4, 1, 0))
    term3 = np.where(
        f == 1, 0.0, np.asarray(cfg.fault_range_cost)[tier] * r.sum(axis=1)
    )
    term4 = (delt[None, :] * g * (1 - r)).sum(axis=1)
    return term1 + term3 + term4


# -- model construction -------------------------------------------------------


def build_uav_mdp(cfg: MissionConfig, chunk: int = 4096) -> MdpModel:
    """Assemble the goal-bidding MDP for one UAV.

    Rows are laid out action-major (``row_index[s, a] = a * S + s``) so the
    sparse structure can be built one action at a time.
    """
    codec = UavStateCodec(cfg.k, cfg.q)
    S = codec.state_count
    A = cfg.uav_action_count
    k = cfg.k
    comp = codec.components()
    strides = codec.strides

    K_move = fault_kernel(cfg, serv=False)
    K_serv = fault_kernel(cfg, serv=True)

    base_cost = uav_cost_components(cfg, comp)
    cost = np.tile(base_cost[:, None], (1, A))
    pursue_cost = np.asarray(cfg.pursue_cost, dtype=float)
    for j in range(k):
        cost[:, j] += pursue_cost[j][comp["loc"] - 1]

    n_gcombo = 3**k
    # trits[j, code] = priority of goal j+1 in combined successor code
    trits = np.empty((k, n_gcombo), dtype=np.int64)
    rem = np.arange(n_gcombo)
    for j in range(k - 1, -1, -1):
        rem, trits[j] = np.divmod(rem, 3)

    keep_masks = []
    for j in range(k):
        mask = np.zeros(k, dtype=np.int64)
        mask[[g - 1 for g in cfg.reach_keep[j]]] = 1
        keep_masks.append(mask)

    reach_weights = 2 ** np.arange(k - 1, -1, -1)

    data_parts: list[np.ndarray] = []
    index_parts: list[np.ndarray] = []
    counts = np.empty((A, S), dtype=np.int64)

    f0 = comp["fault"] - 1
    g_all = comp["goal_pri"]
    r_all = comp["reach"]
    loc0 = comp["loc"] - 1
    c_all = comp["commit"]

    fault_offsets = np.arange(NUM_FAULTS) * strides["fault"]
    goal_offsets = np.empty(n_gcombo, dtype=np.int64)
    for code in range(n_gcombo):
        goal_offsets[code] = sum(
            trits[j, code] * strides["goal"] * 3 ** (k - 1 - j) for j in range(k)
        )

    for a in range(A):
        serv = a == k
        charge = a == k + 1
        K = K_serv if serv else K_move
        for lo in range(0, S, chunk):
            hi = min(lo + chunk, S)
            n = hi - lo
            f0c = f0[lo:hi]
            gc = g_all[lo:hi]
            rc = r_all[lo:hi]
            locc = loc0[lo:hi]
            cc = c_all[lo:hi]

            # deterministic successor components
            if a < k:
                # Out-of-range pursuit is a grounded dispatch: the UAV stays
                # put and keeps its flags (the row stays valid but the action
                # is masked inadmissible below).
                reachable = rc[:, a] == 1
                r_next = np.where(
                    reachable[:, None], rc * keep_masks[a][None, :], rc
                )
                l_next = np.where(reachable, cfg.goal_regions[a] - 1, locc)
                c_next = np.full(n, a + 1)
            else:
                r_next = np.ones_like(rc) if charge else rc
                l_next = locc
                c_next = cc
            det = (r_next @ reach_weights) * strides["reach"] + l_next * strides["loc"]

            # per-goal priority kernels
            gp = np.ones((n, 1))
            for j in range(k):
                pursued = (
                    np.full(n, a == j)
                    if a < k
                    else (cc == j + 1) if a == k + 2 else np.zeros(n, dtype=bool)
                )
                pj = goal_kernel(cfg, gc[:, j], pursued, rc[:, j], f0c + 1)
                gp = (gp[:, :, None] * pj[:, None, :]).reshape(n, -1)

            # commitment after the stochastic goal outcome
            tr = trits[np.clip(c_next - 1, 0, k - 1)]  # (n, 27)
            c_prime = np.where((c_next[:, None] > 0) & (tr > 0), c_next[:, None], 0)

            joint = K[f0c][:, :, None] * gp[:, None, :]
            idx = (
                fault_offsets[None, :, None]
                + goal_offsets[None, None, :]
                + det[:, None, None]
                + c_prime[:, None, :]
            )
            mask = joint > 0.0
            counts[a, lo:hi] = mask.sum(axis=(1, 2))
            data_parts.append(joint[mask])
            index_parts.append(idx[mask])

    nnz_counts = counts.reshape(A * S)
    indptr = np.zeros(A * S + 1, dtype=np.int64)
    np.cumsum(nnz_counts, out=indptr[1:])
    data = np.concatenate(data_parts)
    indices = np.concatenate(index_parts).astype(np.int32)
    rows = sp.csr_matrix((data, indices, indptr), shape=(A * S, S))
    row_index = np.arange(A)[None, :] * S + np.arange(S)[:, None]

    # Pursuing goal j is only admissible when the goal is within range and
    # still live; the dispatch gate in the simulator enforces the same
    # restriction. Without the liveness gate, flying at an achieved goal can
    # look attractive purely because the detour sheds reach flags (cutting
    # future fault/range cost), which is never a real mission behavior.
    action_mask = np.ones((S, A), dtype=bool)
    for j in range(k):
        action_mask[:, j] = (r_all[:, j] == 1) & (g_all[:, j] >= 1)

    return MdpModel(
        state_count=S,
        action_count=A,
        cost=cost,
        rows=rows,
        gamma=cfg.gamma,
        row_index=row_index,
        action_mask=action_mask,
    )


def compute_bids(
    model: MdpModel, vf: ValueFunction, state: UavState | int, codec: UavStateCodec
) -> BidVector:
    """Package the q-values at one state as a bid vector.

    Values are the raw one-step lookaheads for every action, including
    inadmissible ones (the transition rows stay well-defined): the fleet
    uses them to rank goals, while action selection respects the mask.
    """
    vf.require_converged()
    idx = state if isinstance(state, int) else codec.encode(state)
    A = model.action_count
    vals = np.empty(A)
    for a in range(A):
        r = idx * A + a if model.row_index is None else int(model.row_index[idx, a])
        vals[a] = -model.cost[idx, a] + model.gamma * float(
            (model.rows[r] @ vf.values)[0]
        )
    adm = None if model.action_mask is None else model.action_mask[idx].copy()
    return BidVector(state_index=idx, values=vals, k=codec.k, admissible=adm)


class UavPolicy:
    """Solved bidding model with the full q table precomputed for fast
    per-epoch bid queries."""

    def __init__(self, model: MdpModel, vf: ValueFunction, codec: UavStateCodec):
        vf.require_converged()
        self.model = model
        self.vf = vf
        self.codec = codec
        self.q_raw = -model.cost + model.gamma * model.expected_values(vf.values)
        if model.action_mask is not None:
            self.q_all = np.where(model.action_mask, self.q_raw, -np.inf)
        else:
            self.q_all = self.q_raw
        self.policy = np.argmax(self.q_all, axis=1)

    def bids(self, state: UavState | int) -> BidVector:
        idx = state if isinstance(state, int) else self.codec.encode(state)
        adm = (
            None
            if self.model.action_mask is None
            else self.model.action_mask[idx].copy()
        )
        return BidVector(
            state_index=idx,
            values=self.q_raw[idx].copy(),
            k=self.codec.k,
            admissible=adm,
        )
