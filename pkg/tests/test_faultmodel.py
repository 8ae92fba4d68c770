import numpy as np
import pytest

from searchmesh.faultmodel import (
    CtrlClass,
    FaultState,
    LinearizedPlant,
    NUM_FAULT_STATES,
    ObsClass,
    PlantDimensionError,
    Severity,
    classify_fault,
    controllability_matrix,
    controllability_rank,
    observability_matrix,
    observability_rank,
    stability_flags_from_modes,
)

# Double integrator: controllable from the force input, observable from
# the position output.
A2 = np.array([[0.0, 1.0], [0.0, 0.0]])
B2 = np.array([[0.0], [1.0]])
C2 = np.array([[1.0, 0.0]])


def test_double_integrator_full_rank():
    plant = LinearizedPlant(A=A2, B=B2, C=C2)
    assert controllability_rank(plant) == 2
    assert observability_rank(plant) == 2
    assert classify_fault(plant, camera_ok=True).index == 1


def test_velocity_only_output_loses_observability():
    plant = LinearizedPlant(A=A2, B=B2, C=np.array([[0.0, 1.0]]))
    # position mode invisible from a velocity sensor
    assert observability_rank(plant) == 1
    assert controllability_rank(plant) == 2


def test_decoupled_mode_loses_controllability():
    A = np.diag([-1.0, -2.0])
    B = np.array([[1.0], [0.0]])
    plant = LinearizedPlant(A=A, B=B, C=np.eye(2), stable_uncontrollable=True)
    assert controllability_rank(plant) == 1
    fs = classify_fault(plant, camera_ok=True)
    assert fs.ctrl_class is CtrlClass.STABILIZABLE
    assert fs.obs_class is ObsClass.OBSERVABLE


def test_rank_test_duality():
    """Observability of (A, C) is controllability of (A^T, C^T)."""
    rng = np.random.default_rng(11)
    for _ in range(50):
        n, m = rng.integers(1, 6), rng.integers(1, 4)
        A = rng.normal(size=(n, n))
        C = rng.normal(size=(m, n))
        primal = LinearizedPlant(A=A, B=np.zeros((n, 1)), C=C)
        dual = LinearizedPlant(A=A.T, B=C.T, C=np.zeros((1, n)))
        assert observability_rank(primal) == controllability_rank(dual)
        Q = controllability_matrix(A.T, C.T)
        O = observability_matrix(A, C)
        assert np.allclose(Q, O.T)


def test_stability_flags_pbh():
    # unstable mode 1 is uncontrollable -> not stabilizable
    A = np.diag([1.0, -1.0])
    B = np.array([[0.0], [1.0]])
    C = np.array([[1.0, 0.0]])
    stabilizable, detectable = stability_flags_from_modes(A, B, C)
    assert not stabilizable
    assert detectable  # the unstable mode is visible from C
    # flip input/output structure
    stabilizable, detectable = stability_flags_from_modes(
        A, np.array([[1.0], [0.0]]), np.array([[0.0, 1.0]])
    )
    assert stabilizable
    assert not detectable


def test_fault_state_grid_covers_all_18():
    seen = set()
    for idx in range(1, NUM_FAULT_STATES + 1):
        fs = FaultState(index=idx)
        seen.add((fs.ctrl_class, fs.obs_class, fs.camera_ok))
        assert FaultState.from_classes(fs.ctrl_class, fs.obs_class, fs.camera_ok).index == idx
    assert len(seen) == 18


def test_severity_tiers():
    assert FaultState(1).severity is Severity.HEALTHY
    for idx in (2, 3, 4):
        assert FaultState(idx).severity is Severity.MILD
    for idx in (5, 9, 10, 13, 18):
        assert FaultState(idx).severity is Severity.SEVERE
    # camera loss disqualifies otherwise-mild capability classes
    assert FaultState(11).severity is Severity.SEVERE


def test_plant_dimension_validation():
    with pytest.raises(PlantDimensionError):
        LinearizedPlant(A=np.zeros((2, 3)), B=B2, C=C2)
    with pytest.raises(PlantDimensionError):
        LinearizedPlant(A=A2, B=np.zeros((3, 1)), C=C2)
    with pytest.raises(PlantDimensionError):
        LinearizedPlant(A=A2, B=B2, C=np.zeros((1, 3)))


def test_fault_index_bounds():
    with pytest.raises(ValueError):
        FaultState(0)
    with pytest.raises(ValueError):
        FaultState(19)
