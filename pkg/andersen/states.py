"""Phase-space states of a single Andersen realization and of its couplings"""
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidStateError
from .geometry import minimal_difference, translate


def _as_vectors(*arrays) -> list[np.ndarray]:
    out = [np.array(a, dtype=float, copy=True).reshape(-1) for a in arrays]
    if len({a.shape for a in out}) != 1:
        raise InvalidStateError(f"state blocks have mismatched shapes {[a.shape for a in out]}")
    for a in out:
        if not np.all(np.isfinite(a)):
            raise InvalidStateError("state holds non-finite values")
    return out


@dataclass(frozen=True)
class PhasePoint:
    """Position x and velocity v, both flat vectors of length m*n"""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x, v = _as_vectors(self.x, self.v)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    def hamiltonian(self, potential) -> float:
        return float(0.5 * self.v @ self.v + potential.energy(self.x))


@dataclass(frozen=True)
class EuclideanCoupledState:
    """Pair ((x, v), (x_tilde, v_tilde)) on R^d x R^d"""

    x: np.ndarray
    v: np.ndarray
    x_tilde: np.ndarray
    v_tilde: np.ndarray

    def __post_init__(self):
        for name, arr in zip(("x", "v", "x_tilde", "v_tilde"), _as_vectors(self.x, self.v, self.x_tilde, self.v_tilde)):
            object.__setattr__(self, name, arr)

    @property
    def z(self) -> np.ndarray:
        return self.x - self.x_tilde

    @property
    def w(self) -> np.ndarray:
        return self.v - self.v_tilde

    def copies(self) -> tuple[PhasePoint, PhasePoint]:
        return PhasePoint(self.x, self.v), PhasePoint(self.x_tilde, self.v_tilde)

    @classmethod
    def from_copies(cls, first: PhasePoint, second: PhasePoint) -> "EuclideanCoupledState":
        return cls(first.x, first.v, second.x, second.v)


@dataclass(frozen=True)
class TorusCoupledState:
    """Quadruple (x, v, z, w): x on the torus, z = difference on the covering space, w = v - v_tilde"""

    x: np.ndarray
    v: np.ndarray
    z: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name, arr in zip(("x", "v", "z", "w"), _as_vectors(self.x, self.v, self.z, self.w)):
            object.__setattr__(self, name, arr)

    def zeta(self, ell: float) -> np.ndarray:
        return minimal_difference(self.z, self.w, ell)


CoupledState = Union[EuclideanCoupledState, TorusCoupledState]


def project_torus_state(y: TorusCoupledState, ell: float) -> tuple[PhasePoint, PhasePoint]:
    """pi^C(x, v, z, w) = ((x, v), (tau_{-z}(x), v - w))"""
    return PhasePoint(y.x, y.v), PhasePoint(translate(y.x, -y.z, ell), y.v - y.w)


def lift_torus_pair(first: PhasePoint, second: PhasePoint, ell: float) -> TorusCoupledState:
    """Inverse of pi^C choosing the minimal difference as z"""
    w = first.v - second.v
    z = minimal_difference(first.x - second.x, w, ell)
    return TorusCoupledState(translate(first.x, 0.0, ell), first.v, z, w)
