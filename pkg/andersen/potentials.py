"""Potential-energy families and the analytic constants the contraction theorems consume"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np
from scipy import linalg
from scipy.special import expit

from .errors import ConfigurationError
from .schemas import (
    PotentialSpec,
    QuadraticPlusConvexSpec,
    QuadraticPotentialSpec,
    SpaceSpec,
    TorusCosineSpec,
    ZeroPotentialSpec,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PotentialConstants:
    """Constants of a potential; None marks a constant that does not apply to the variant"""

    sigma_max: Optional[float] = None
    L_G: Optional[float] = None
    L: Optional[float] = None
    J: Optional[float] = None


class Potential(ABC):
    """Energy and force of a potential on R^d or on the torus T_ell^m

    energy/gradient accept a single state of shape (d,) or a batch (..., d).
    """

    def __init__(self, dim: int):
        self.dim = dim

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise ConfigurationError(f"state has dimension {x.shape[-1:]}, potential expects {self.dim}")
        return x

    @abstractmethod
    def energy(self, x) -> np.ndarray: ...

    @abstractmethod
    def gradient(self, x) -> np.ndarray: ...

    @abstractmethod
    def constants(self) -> PotentialConstants: ...

    def characteristic_period(self) -> float:
        return 1.0


class ZeroPotential(Potential):
    """Free streaming, U = 0"""

    def energy(self, x):
        x = self._check(x)
        return np.zeros(x.shape[:-1])

    def gradient(self, x):
        return np.zeros_like(self._check(x))

    def constants(self):
        return PotentialConstants(sigma_max=None, L_G=0.0, L=0.0, J=0.0)


def resolve_c_inv(c_inv, dim: int) -> np.ndarray:
    """Turn a c_inv preset or list into a diagonal vector (d,) or dense matrix (d, d)"""
    if isinstance(c_inv, str):
        if c_inv == "identity":
            return np.ones(dim)
        if c_inv == "neal":
            return np.arange(1, dim + 1, dtype=float) ** 2
        raise ConfigurationError(f"unknown c_inv preset '{c_inv}'")
    arr = np.asarray(c_inv, dtype=float)
    if arr.ndim == 1 and arr.shape != (dim,):
        raise ConfigurationError(f"c_inv has {arr.shape[0]} entries, expected {dim}")
    if arr.ndim == 2 and arr.shape != (dim, dim):
        raise ConfigurationError(f"c_inv has shape {arr.shape}, expected ({dim}, {dim})")
    if arr.ndim not in (1, 2):
        raise ConfigurationError("c_inv must be a vector or a matrix")
    return arr


class QuadraticPotential(Potential):
    """U(x) = 1/2 x^T C^{-1} x with C^{-1} symmetric positive definite"""

    def __init__(self, c_inv: np.ndarray):
        c_inv = np.asarray(c_inv, dtype=float)
        super().__init__(c_inv.shape[0])
        self.diagonal = c_inv.ndim == 1
        if self.diagonal:
            if not np.all(c_inv > 0):
                raise ConfigurationError("diagonal c_inv must be strictly positive")
            self.chol = None
        else:
            if not np.allclose(c_inv, c_inv.T, rtol=1e-12, atol=1e-12):
                raise ConfigurationError("c_inv must be symmetric")
            try:
                self.chol = linalg.cholesky(c_inv, lower=True)
            except linalg.LinAlgError as e:
                raise ConfigurationError(f"c_inv is not positive definite: {e}") from e
        self.c_inv = c_inv

    @cached_property
    def c_inv_eigenvalues(self) -> np.ndarray:
        if self.diagonal:
            return np.sort(self.c_inv)
        return linalg.eigvalsh(self.c_inv)

    def _quad_energy(self, x):
        if self.diagonal:
            return 0.5 * np.sum(self.c_inv * x * x, axis=-1)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.c_inv, x)

    def _quad_gradient(self, x):
        if self.diagonal:
            return self.c_inv * x
        return x @ self.c_inv

    def energy(self, x):
        return self._quad_energy(self._check(x))

    def gradient(self, x):
        return self._quad_gradient(self._check(x))

    def sigma_max(self) -> float:
        # largest eigenvalue of C is the reciprocal of the smallest of C^{-1}
        return float(1.0 / np.sqrt(self.c_inv_eigenvalues[0]))

    def constants(self):
        return PotentialConstants(sigma_max=self.sigma_max(), L_G=0.0)

    def characteristic_period(self):
        return float(2.0 * np.pi / np.sqrt(self.c_inv_eigenvalues[-1]))

    def sample_positions(self, beta: float, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw x ~ N(0, C / beta)"""
        xi = rng.standard_normal((size, self.dim))
        if self.diagonal:
            return xi / np.sqrt(beta * self.c_inv)
        # C^{-1} = L L^T  =>  x = L^{-T} xi has covariance C
        return linalg.solve_triangular(self.chol.T, xi.T, lower=False).T / np.sqrt(beta)


class QuadraticPlusConvexPotential(QuadraticPotential):
    """Weakly anharmonic U(x) = 1/2 x^T C^{-1} x + G(x)

    pseudo_huber: G(x) = L_G (sqrt(1 + |x|^2) - 1)
    softplus:     G(x) = 4 L_G sum_k log(1 + exp(x_k))
    Both are smooth and convex with L_G-Lipschitz gradient.
    """

    def __init__(self, c_inv: np.ndarray, perturbation: str, lipschitz: float):
        super().__init__(c_inv)
        if perturbation not in ("pseudo_huber", "softplus"):
            raise ConfigurationError(f"unknown perturbation '{perturbation}'")
        self.perturbation = perturbation
        self.lipschitz = float(lipschitz)

    def perturbation_energy(self, x) -> np.ndarray:
        x = self._check(x)
        if self.perturbation == "pseudo_huber":
            return self.lipschitz * (np.sqrt(1.0 + np.sum(x * x, axis=-1)) - 1.0)
        return 4.0 * self.lipschitz * np.sum(np.logaddexp(0.0, x), axis=-1)

    def perturbation_gradient(self, x) -> np.ndarray:
        x = self._check(x)
        if self.perturbation == "pseudo_huber":
            return self.lipschitz * x / np.sqrt(1.0 + np.sum(x * x, axis=-1, keepdims=True))
        return 4.0 * self.lipschitz * expit(x)

    def energy(self, x):
        x = self._check(x)
        return self._quad_energy(x) + self.perturbation_energy(x)

    def gradient(self, x):
        x = self._check(x)
        return self._quad_gradient(x) + self.perturbation_gradient(x)

    def constants(self):
        return PotentialConstants(sigma_max=self.sigma_max(), L_G=self.lipschitz)

    def characteristic_period(self):
        return float(2.0 * np.pi / np.sqrt(self.c_inv_eigenvalues[-1] + self.lipschitz))

    def sample_positions(self, beta, rng, size):
        raise ConfigurationError("Boltzmann-Gibbs positions are not Gaussian for quadratic_plus_convex")


def resolve_edges(graph, m: int) -> list[tuple[int, int]]:
    if graph == "none":
        return []
    if graph == "ring":
        if m < 2:
            return []
        if m == 2:
            return [(0, 1)]
        return [(i, (i + 1) % m) for i in range(m)]
    edges = [(int(i), int(j)) for i, j in graph]
    for i, j in edges:
        if i == j or not (0 <= i < m and 0 <= j < m):
            raise ConfigurationError(f"invalid neighbor edge ({i}, {j}) for m = {m}")
    if len({tuple(sorted(e)) for e in edges}) != len(edges):
        raise ConfigurationError("neighbor graph has duplicate edges")
    return edges


class TorusCosinePotential(Potential):
    """U(x) = sum_i A(1 - cos(k x_i)) + sum_{(i,j) in E} Jbar(1 - cos(k(x_i - x_j))), k = 2 pi / ell"""

    def __init__(self, m: int, ell: float, amp_local: float, amp_pair: float, edges: list[tuple[int, int]]):
        super().__init__(m)
        self.ell = float(ell)
        self.k = 2.0 * np.pi / self.ell
        self.amp_local = float(amp_local)
        self.amp_pair = float(amp_pair)
        self.edges = edges
        # signed incidence matrix: +1 at i, -1 at j for edge (i, j)
        self.incidence = np.zeros((len(edges), m))
        for e, (i, j) in enumerate(edges):
            self.incidence[e, i] = 1.0
            self.incidence[e, j] = -1.0
        self.max_degree = int(np.abs(self.incidence).sum(axis=0).max()) if edges else 0

    def energy(self, x):
        x = self._check(x)
        u = self.amp_local * np.sum(1.0 - np.cos(self.k * x), axis=-1)
        if self.edges:
            diff = x @ self.incidence.T
            u = u + self.amp_pair * np.sum(1.0 - np.cos(self.k * diff), axis=-1)
        return u

    def gradient(self, x):
        x = self._check(x)
        grad = self.amp_local * self.k * np.sin(self.k * x)
        if self.edges:
            diff = x @ self.incidence.T
            grad = grad + (self.amp_pair * self.k * np.sin(self.k * diff)) @ self.incidence
        return grad

    def constants(self):
        k2 = self.k**2
        L = k2 * (self.amp_local + self.amp_pair * self.max_degree)
        J = k2 * self.amp_pair if self.edges else 0.0
        return PotentialConstants(L=L, J=J)

    def characteristic_period(self):
        L = self.constants().L
        return float(2.0 * np.pi / np.sqrt(L)) if L > 0 else 1.0


def build_potential(spec: PotentialSpec, space: SpaceSpec) -> Potential:
    """Construct the runtime potential for a spec on a given space"""
    d = space.dim
    if isinstance(spec, ZeroPotentialSpec):
        return ZeroPotential(d)
    if isinstance(spec, QuadraticPotentialSpec):
        return QuadraticPotential(resolve_c_inv(spec.c_inv, d))
    if isinstance(spec, QuadraticPlusConvexSpec):
        return QuadraticPlusConvexPotential(resolve_c_inv(spec.c_inv, d), spec.perturbation, spec.lipschitz)
    if isinstance(spec, TorusCosineSpec):
        if not space.is_torus:
            raise ConfigurationError("torus_cosine requires a torus space")
        ell = spec.ell if spec.ell is not None else space.ell
        return TorusCosinePotential(space.m, ell, spec.amp_local, spec.amp_pair, resolve_edges(spec.neighbor_graph, space.m))
    raise ConfigurationError(f"unsupported potential spec {spec!r}")


def _infer_space(spec: PotentialSpec, dim: Optional[int]) -> SpaceSpec:
    if dim is None:
        c_inv = getattr(spec, "c_inv", None)
        if c_inv is None or isinstance(c_inv, str):
            raise ConfigurationError("cannot infer the dimension of this potential; pass a space")
        dim = len(c_inv)
    if isinstance(spec, TorusCosineSpec):
        return SpaceSpec(kind="torus", m=dim, ell=spec.ell or 1.0)
    return SpaceSpec(kind="euclidean", m=dim, n=1)


PotentialLike = Union[Potential, PotentialSpec]


def as_potential(potential: PotentialLike, space: Optional[SpaceSpec] = None, dim: Optional[int] = None) -> Potential:
    if isinstance(potential, Potential):
        return potential
    return build_potential(potential, space if space is not None else _infer_space(potential, dim))


def potential_energy(potential: PotentialLike, x, space: Optional[SpaceSpec] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    pot = as_potential(potential, space, dim=x.shape[-1])
    return pot.energy(x)


def potential_gradient(potential: PotentialLike, x, space: Optional[SpaceSpec] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    pot = as_potential(potential, space, dim=x.shape[-1])
    return pot.gradient(x)


def potential_constants(potential: PotentialLike, space: Optional[SpaceSpec] = None) -> PotentialConstants:
    return as_potential(potential, space).constants()


def sample_boltzmann(
    potential: Potential, space: SpaceSpec, beta: float, rng: np.random.Generator, size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Exact draws (x, v) from the Boltzmann-Gibbs measure where it is available in closed form"""
    if isinstance(potential, ZeroPotential):
        if not space.is_torus:
            raise ConfigurationError("the Boltzmann-Gibbs measure of U = 0 on euclidean space is not normalizable")
        x = rng.uniform(0.0, space.ell, size=(size, space.dim))
    elif isinstance(potential, QuadraticPotential):
        x = potential.sample_positions(beta, rng, size)
    else:
        raise ConfigurationError(f"no closed-form Boltzmann-Gibbs sampler for {type(potential).__name__}")
    v = rng.standard_normal((size, space.dim)) / np.sqrt(beta)
    return x, v
