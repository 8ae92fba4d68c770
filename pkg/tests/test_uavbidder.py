import numpy as np
import pytest

from searchmesh.config import MissionConfig
from searchmesh.mdpcore import solve
from searchmesh.uavbidder import (
    BidVector,
    UavState,
    UavStateCodec,
    build_uav_mdp,
    compute_bids,
    fault_kernel,
    goal_kernel,
    uav_actions,
    uav_cost_components,
)


@pytest.fixture(scope="module")
def case_cfg():
    return MissionConfig.case_study()


@pytest.fixture(scope="module")
def case_model(case_cfg):
    return build_uav_mdp(case_cfg)


# -- codec -------------------------------------------------------------------


def test_codec_bijection_exhaustive_reduced(reduced_cfg):
    codec = UavStateCodec(reduced_cfg.k, reduced_cfg.q)
    for idx in range(codec.state_count):
        assert codec.encode(codec.decode(idx)) == idx


def test_codec_bijection_exhaustive_case_study(case_cfg):
    """Vectorized decode recombined through the strides must reproduce
    every flat index (exhaustive over all 124,416 states)."""
    codec = UavStateCodec(case_cfg.k, case_cfg.q)
    comp = codec.components()
    s = codec.strides
    weights = 2 ** np.arange(case_cfg.k - 1, -1, -1)
    trits = 3 ** np.arange(case_cfg.k - 1, -1, -1)
    rebuilt = (
        (comp["fault"] - 1) * s["fault"]
        + (comp["reach"] @ weights) * s["reach"]
        + (comp["goal_pri"] @ trits) * s["goal"]
        + (comp["loc"] - 1) * s["loc"]
        + comp["commit"] * s["commit"]
    )
    assert np.array_equal(rebuilt, np.arange(codec.state_count))


def test_codec_object_roundtrip_samples(case_cfg):
    codec = UavStateCodec(case_cfg.k, case_cfg.q)
    rng = np.random.default_rng(0)
    for idx in rng.integers(0, codec.state_count, size=500):
        st = codec.decode(int(idx))
        st.validate(case_cfg.k, case_cfg.q)
        assert codec.encode(st) == idx


def test_codec_rejects_out_of_range(case_cfg):
    codec = UavStateCodec(case_cfg.k, case_cfg.q)
    with pytest.raises(ValueError):
        codec.decode(codec.state_count)
    with pytest.raises(ValueError):
        codec.encode(UavState(fault=0, reach=(1, 1, 1), goal_pri=(0, 0, 0),
                              loc=1, commit=0))


# -- kernels and cost ----------------------------------------------------------


def test_fault_kernel_rows_stochastic(case_cfg):
    for serv in (False, True):
        K = fault_kernel(case_cfg, serv=serv)
        assert K.shape == (18, 18)
        assert np.allclose(K.sum(axis=1), 1.0, atol=1e-12)
        assert (K >= 0).all()


def test_fault_kernel_structure(case_cfg):
    K = fault_kernel(case_cfg, serv=False)
    # healthy stays or onsets into the mild tier
    assert K[0, 0] == pytest.approx(1.0 - case_cfg.p_fault_onset)
    assert K[0, 1:4].sum() == pytest.approx(case_cfg.p_fault_onset)
    # camera-loss tier is absorbing without service
    for f in range(9, 18):
        assert K[f, f] == pytest.approx(1.0)
    # service lands healthy, then is exposed to the ambient onset draw
    Ks = fault_kernel(case_cfg, serv=True)
    assert np.allclose(Ks, Ks[0])
    assert Ks[5, 0] == pytest.approx(1.0 - case_cfg.p_fault_onset)


def test_goal_kernel_rows_stochastic(case_cfg):
    rng = np.random.default_rng(1)
    g = rng.integers(0, 3, size=200)
    r = rng.integers(0, 2, size=200)
    f = rng.integers(1, 19, size=200)
    for pursued in (np.zeros(200, dtype=bool), np.ones(200, dtype=bool)):
        P = goal_kernel(case_cfg, g, pursued, r, f)
        assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)
        assert (P >= 0).all()


def test_cost_camera_loss_full_reach(case_cfg):
    # f in the camera tier with all goals reachable and achieved:
    # only the fault/range term charges, at 500 per reachable goal.
    codec = UavStateCodec(case_cfg.k, case_cfg.q)
    base = uav_cost_components(case_cfg, codec.components())
    idx = codec.encode(UavState(fault=10, reach=(1, 1, 1),
                                goal_pri=(0, 0, 0), loc=1, commit=0))
    assert base[idx] == pytest.approx(1500.0)


def test_cost_healthy_pays_no_fault_range_charge(case_cfg):
    codec = UavStateCodec(case_cfg.k, case_cfg.q)
    base = uav_cost_components(case_cfg, codec.components())
    idx = codec.encode(UavState(fault=1, reach=(1, 1, 1),
                                goal_pri=(0, 0, 0), loc=1, commit=0))
    assert base[idx] == 0.0


def test_cost_unattended_and_stranded_terms(case_cfg):
    codec = UavStateCodec(case_cfg.k, case_cfg.q)
    base = uav_cost_components(case_cfg, codec.components())
    # goal 2 live+reachable and unattended: eta_2 * g_2 * r_2 = 70 * 2
    idx = codec.encode(UavState(fault=1, reach=(0, 1, 0),
                                goal_pri=(0, 2, 0), loc=1, commit=0))
    assert base[idx] == pytest.approx(140.0)
    # same goal stranded out of reach: delta_2 * g_2 = 70 * 2
    idx = codec.encode(UavState(fault=1, reach=(0, 0, 0),
                                goal_pri=(0, 2, 0), loc=1, commit=0))
    assert base[idx] == pytest.approx(140.0)
    # commitment to goal 2 waives the unattended charge only while healthy
    idx = codec.encode(UavState(fault=1, reach=(0, 1, 0),
                                goal_pri=(0, 2, 0), loc=1, commit=2))
    assert base[idx] == 0.0
    idx = codec.encode(UavState(fault=2, reach=(0, 1, 0),
                                goal_pri=(0, 2, 0), loc=1, commit=2))
    assert base[idx] == pytest.approx(140.0 + 50.0)  # plus mild-tier range


# -- model structure -------------------------------------------------------------


def test_rows_stochastic_exhaustive(case_model):
    sums = np.asarray(case_model.rows.sum(axis=1)).ravel()
    assert np.max(np.abs(sums - 1.0)) < 1e-9


def test_pursue_masked_when_unreachable_or_achieved(case_cfg, case_model):
    codec = UavStateCodec(case_cfg.k, case_cfg.q)
    comp = codec.components()
    for j in range(case_cfg.k):
        col = case_model.action_mask[:, j]
        expected = (comp["reach"][:, j] == 1) & (comp["goal_pri"][:, j] >= 1)
        assert np.array_equal(col, expected)
    # serv / charge / continue always admissible
    assert case_model.action_mask[:, case_cfg.k:].all()


def test_action_order(case_cfg):
    assert uav_actions(case_cfg.k) == [
        "goal1", "goal2", "goal3", "serv", "charge", "continue",
    ]


# -- oracle equivalence and bids --------------------------------------------------


def test_reduced_solution_matches_dense_oracle(reduced_solutions):
    model = reduced_solutions["uav_model"]
    vf = reduced_solutions["uav_vf"]
    P = model.rows.toarray()[model.row_index.T.ravel()].reshape(
        model.action_count, model.state_count, -1
    )
    V = np.zeros(model.state_count)
    for _ in range(3000):
        q = -model.cost.T + model.gamma * P @ V
        q[~model.action_mask.T] = -np.inf
        new = q.max(axis=0)
        if np.max(np.abs(new - V)) < 1e-13:
            break
        V = new
    assert np.max(np.abs(vf.values - V)) < 1e-8


def test_cost_scale_equivariance(reduced_cfg):
    """Scaling every cost parameter by the same factor scales V* and leaves
    the greedy policy's argmax structure unchanged."""
    lam = 3.0
    scaled = MissionConfig(
        **{
            **reduced_cfg.to_dict(),
            "eta": [lam * e for e in reduced_cfg.eta],
            "delta_cost": [lam * d for d in reduced_cfg.delta_cost],
            "fault_range_cost": [lam * c for c in reduced_cfg.fault_range_cost],
            "pursue_cost": [[lam * c for c in row] for row in reduced_cfg.pursue_cost],
        }
    )
    m1, m2 = build_uav_mdp(reduced_cfg), build_uav_mdp(scaled)
    v1, v2 = solve(m1, eta=1e-11), solve(m2, eta=1e-11)
    assert np.max(np.abs(lam * v1.values - v2.values)) < 1e-6
    assert np.array_equal(
        np.argmax(m1.q_matrix(v1.values), axis=1),
        np.argmax(m2.q_matrix(v2.values), axis=1),
    )


def test_fault_dominance(case_solutions):
    """A healthy UAV is never worse off than the same UAV with any fault."""
    vf = case_solutions["uav_vf"]
    V = np.asarray(vf.values, dtype=np.float64).reshape(18, -1)
    for f in range(1, 18):
        assert np.all(V[0] >= V[f] - 1e-9)


def test_bid_max_equals_value(reduced_solutions):
    model = reduced_solutions["uav_model"]
    vf = reduced_solutions["uav_vf"]
    codec = reduced_solutions["codec"]
    rng = np.random.default_rng(2)
    for idx in rng.integers(0, model.state_count, size=100):
        bv = compute_bids(model, vf, int(idx), codec)
        vals = np.where(bv.admissible, bv.values, -np.inf)
        assert np.max(vals) == pytest.approx(vf.values[idx], abs=1e-8)


def test_bid_vector_reports_all_goals(reduced_solutions):
    codec = reduced_solutions["codec"]
    model = reduced_solutions["uav_model"]
    vf = reduced_solutions["uav_vf"]
    st = UavState(fault=1, reach=(0,), goal_pri=(2,), loc=1, commit=0)
    bv = compute_bids(model, vf, codec.encode(st), codec)
    # the out-of-range goal still gets a finite hypothetical bid, but the
    # pursuit action is inadmissible
    assert np.isfinite(bv.goal_values).all()
    assert not bv.admissible[0]
    assert bv.top_action != 0


def test_top_action_tie_breaks_least_disruptive():
    bv = BidVector(state_index=0, values=np.array([1.0, 2.0, 2.0, 2.0]), k=1)
    assert bv.top_action == 3
    masked = BidVector(
        state_index=0,
        values=np.array([5.0, 2.0, 2.0, 2.0]),
        k=1,
        admissible=np.array([False, True, True, True]),
    )
    assert masked.top_action == 3


def test_uav_policy_agrees_with_compute_bids(reduced_solutions):
    policy = reduced_solutions["uav_policy"]
    model = reduced_solutions["uav_model"]
    vf = reduced_solutions["uav_vf"]
    codec = reduced_solutions["codec"]
    for idx in range(0, model.state_count, 17):
        a = compute_bids(model, vf, idx, codec)
        b = policy.bids(idx)
        assert np.allclose(a.values, b.values, atol=1e-8)
        assert np.array_equal(a.admissible, b.admissible)
