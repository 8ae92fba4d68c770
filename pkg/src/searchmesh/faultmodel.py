"""Discrete fault classification from linearized UAV dynamics.

A UAV's post-fault capability is summarized by where its linearization
falls on the controllability/observability grid (9 classes) crossed with
camera health, giving 18 discrete fault states. Rank tests decide
controllable/observable; stabilizable/detectable come from declared flags
(the subspace analysis is assumed done offline) or, optionally, from an
eigenvalue test on the uncontrollable/unobservable modes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

__all__ = [
    "CtrlClass",
    "ObsClass",
    "Severity",
    "LinearizedPlant",
    "FaultState",
    "controllability_matrix",
    "observability_matrix",
    "controllability_rank",
    "observability_rank",
    "classify_fault",
    "stability_flags_from_modes",
    "load_plant",
    "NUM_FAULT_STATES",
]

NUM_FAULT_STATES = 18


class PlantDimensionError(ValueError):
    """Raised when A, B, C dimensions are mutually inconsistent."""


class CtrlClass(str, Enum):
    CONTROLLABLE = "controllable"
    STABILIZABLE = "stabilizable"
    UNSTABILIZABLE = "unstabilizable"


class ObsClass(str, Enum):
    OBSERVABLE = "observable"
    DETECTABLE = "detectable"
    UNDETECTABLE = "undetectable"


class Severity(str, Enum):
    HEALTHY = "healthy"
    MILD = "mild"
    SEVERE = "severe"


# Row order of the 9-class grid: base index 1..9 for camera-ok states.
_CLASS_TO_BASE = {
    (CtrlClass.CONTROLLABLE, ObsClass.OBSERVABLE): 1,
    (CtrlClass.CONTROLLABLE, ObsClass.DETECTABLE): 2,
    (CtrlClass.STABILIZABLE, ObsClass.OBSERVABLE): 3,
    (CtrlClass.STABILIZABLE, ObsClass.DETECTABLE): 4,
    (CtrlClass.CONTROLLABLE, ObsClass.UNDETECTABLE): 5,
    (CtrlClass.STABILIZABLE, ObsClass.UNDETECTABLE): 6,
    (CtrlClass.UNSTABILIZABLE, ObsClass.OBSERVABLE): 7,
    (CtrlClass.UNSTABILIZABLE, ObsClass.DETECTABLE): 8,
    (CtrlClass.UNSTABILIZABLE, ObsClass.UNDETECTABLE): 9,
}
_BASE_TO_CLASS = {v: k for k, v in _CLASS_TO_BASE.items()}

MILD_BASE_INDICES = frozenset({2, 3, 4})


@dataclass(frozen=True)
class LinearizedPlant:
    """Jacobians (A, B, C) of the UAV dynamics at an equilibrium point.

    ``stable_uncontrollable`` / ``stable_unobservable`` declare whether the
    uncontrollable (resp. unobservable) modes, if any, are asymptotically
    stable. They are only consulted when the corresponding rank test fails.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    stable_uncontrollable: bool = False
    stable_unobservable: bool = False

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        n = A.shape[0]
        if A.shape != (n, n):
            raise PlantDimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise PlantDimensionError(
                f"B has {B.shape[0]} rows, expected {n} to match A"
            )
        if C.shape[1] != n:
            raise PlantDimensionError(
                f"C has {C.shape[1]} columns, expected {n} to match A"
            )
        if not (np.isfinite(A).all() and np.isfinite(B).all() and np.isfinite(C).all()):
            raise PlantDimensionError("plant matrices must be finite")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class FaultState:
    """One of the 18 discrete fault states (capability class x camera)."""

    index: int
    ctrl_class: CtrlClass = field(init=False)
    obs_class: ObsClass = field(init=False)
    camera_ok: bool = field(init=False)

    def __post_init__(self):
        if not 1 <= self.index <= NUM_FAULT_STATES:
            raise ValueError(f"fault index must be in 1..18, got {self.index}")
        base = (self.index - 1) % 9 + 1
        ctrl, obs = _BASE_TO_CLASS[base]
        object.__setattr__(self, "ctrl_class", ctrl)
        object.__setattr__(self, "obs_class", obs)
        object.__setattr__(self, "camera_ok", self.index <= 9)

    @classmethod
    def from_classes(
        cls, ctrl: CtrlClass, obs: ObsClass, camera_ok: bool
    ) -> "FaultState":
        base = _CLASS_TO_BASE[(ctrl, obs)]
        return cls(base if camera_ok else base + 9)

    @property
    def base_index(self) -> int:
        """Capability row 1..9, with the camera offset removed."""
        return (self.index - 1) % 9 + 1

    @property
    def severity(self) -> Severity:
        if self.index == 1:
            return Severity.HEALTHY
        if self.base_index in MILD_BASE_INDICES and self.camera_ok:
            return Severity.MILD
        return Severity.SEVERE


def _numerical_rank(M: np.ndarray, n_x: int, n_u: int) -> int:
    if M.size == 0 or not np.any(M):
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    tol = max(n_x, n_u) * sv[0] * 1e-10
    return int(np.count_nonzero(sv > tol))


def controllability_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """[B  AB  A^2 B ... A^n B] assembled by Krylov recursion."""
    blocks = [B]
    for _ in range(A.shape[0]):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    """[C; CA; CA^2; ...; CA^n] stacked vertically."""
    blocks = [C]
    for _ in range(A.shape[0]):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def controllability_rank(plant: LinearizedPlant) -> int:
    Q = controllability_matrix(plant.A, plant.B)
    return _numerical_rank(Q, plant.n_states, plant.B.shape[1])


def observability_rank(plant: LinearizedPlant) -> int:
    O = observability_matrix(plant.A, plant.C)
    return _numerical_rank(O, plant.n_states, plant.C.shape[0])


def classify_fault(plant: LinearizedPlant, camera_ok: bool) -> FaultState:
    """Map a linearized plant and camera health onto a fault state.

    Controllable/observable come from the rank tests; when a rank test
    fails, the plant's stability flags decide stabilizable vs.
    unstabilizable (dually detectable vs. undetectable).
    """
    n = plant.n_states
    if controllability_rank(plant) == n:
        ctrl = CtrlClass.CONTROLLABLE
    elif plant.stable_uncontrollable:
        ctrl = CtrlClass.STABILIZABLE
    else:
        ctrl = CtrlClass.UNSTABILIZABLE
    if observability_rank(plant) == n:
        obs = ObsClass.OBSERVABLE
    elif plant.stable_unobservable:
        obs = ObsClass.DETECTABLE
    else:
        obs = ObsClass.UNDETECTABLE
    return FaultState.from_classes(ctrl, obs, camera_ok)


def stability_flags_from_modes(
    A: np.ndarray, B: np.ndarray, C: np.ndarray
) -> tuple[bool, bool]:
    """PBH-style eigenvalue test for stabilizability and detectability.

    Returns (stable_uncontrollable, stable_unobservable): True when every
    eigenvalue of A in the closed right half plane passes the corresponding
    PBH rank test, i.e. every unstable mode is controllable (observable).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A.shape[0]
    eigs = np.linalg.eigvals(A)
    stabilizable = True
    detectable = True
    for lam in eigs:
        if lam.real < 0:
            continue
        pbh_c = np.hstack([A - lam * np.eye(n), B])
        if _numerical_rank(pbh_c, n, B.shape[1]) < n:
            stabilizable = False
        pbh_o = np.vstack([A - lam * np.eye(n), C])
        if _numerical_rank(pbh_o, n, C.shape[0]) < n:
            detectable = False
    return stabilizable, detectable


def load_plant(path: str | Path) -> LinearizedPlant:
    """Read a plant from a JSON file with fields A, B, C and stability flags."""
    data = json.loads(Path(path).read_text())
    return LinearizedPlant(
        A=np.array(data["A"], dtype=float),
        B=np.array(data["B"], dtype=float),
        C=np.array(data["C"], dtype=float),
        stable_uncontrollable=bool(data.get("stable_uncontrollable", False)),
        stable_unobservable=bool(data.get("stable_unobservable", False)),
    )
