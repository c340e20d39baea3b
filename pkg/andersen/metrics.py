"""Contraction metrics, rates and sufficient conditions

Euclidean weakly anharmonic case: the quadratic metric rho^2 = (z, w) G (z, w)^T
with synchronous coupling. Torus case: the concave semimetric
rho = sum_i f(r_i) with mirror coupling parameters R, gamma, a, alpha.
Every function evaluates over leading batch axes.
"""
import logging
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, SimulationError
from .geometry import minimal_difference
from .potentials import resolve_c_inv

logger = logging.getLogger(__name__)

# coefficient of the second branch of the weakly anharmonic rate
WAH_BRANCH = 8.0 / 5.0
# second-branch coefficient under which the diagonal Gaussian optimum sits at
# lambda/m = 4 sqrt(5) / (5 sigma_max) with c = sqrt(5) / (10 sigma_max)
WAH_BRANCH_GAUSSIAN = 2.0 / 5.0


class WahMetric:
    """rho^2(z, w) = 1/2 (|w|^2 + z.C^{-1}z) + lambda/(4m) z.w + lambda^2/(8m^2) |z|^2"""

    def __init__(self, lambda_: float, m: int, c_inv):
        if lambda_ <= 0 or m < 1:
            raise ConfigurationError("lambda must be positive and m >= 1")
        self.lambda_ = float(lambda_)
        self.m = int(m)
        c_inv = np.asarray(c_inv, dtype=float)
        if c_inv.ndim == 0:
            c_inv = c_inv.reshape(1)
        self.c_inv = c_inv
        self.diagonal = c_inv.ndim == 1
        self.dim = c_inv.shape[0]
        self.check_positive_definite()

    @property
    def _zz(self) -> float:
        return self.lambda_**2 / (8.0 * self.m**2)

    @property
    def _zw(self) -> float:
        return self.lambda_ / (8.0 * self.m)

    @cached_property
    def c_inv_eigenvalues(self) -> np.ndarray:
        return np.sort(self.c_inv) if self.diagonal else linalg.eigvalsh(self.c_inv)

    def matrix(self) -> np.ndarray:
        """The symmetric 2d x 2d matrix G"""
        d = self.dim
        c_inv = np.diag(self.c_inv) if self.diagonal else self.c_inv
        eye = np.eye(d)
        return np.block([[0.5 * c_inv + self._zz * eye, self._zw * eye], [self._zw * eye, 0.5 * eye]])

    def mode_blocks(self) -> np.ndarray:
        """2x2 blocks of G on each eigenvector of C^{-1}, shape (d, 2, 2)"""
        mu = self.c_inv_eigenvalues
        blocks = np.empty((mu.shape[0], 2, 2))
        blocks[:, 0, 0] = self._zz + 0.5 * mu
        blocks[:, 0, 1] = blocks[:, 1, 0] = self._zw
        blocks[:, 1, 1] = 0.5
        return blocks

    def eigenvalues(self) -> np.ndarray:
        blocks = self.mode_blocks()
        tr = blocks[:, 0, 0] + blocks[:, 1, 1]
        det = blocks[:, 0, 0] * blocks[:, 1, 1] - blocks[:, 0, 1] ** 2
        disc = np.sqrt(np.maximum(0.25 * tr * tr - det, 0.0))
        return np.sort(np.concatenate([0.5 * tr - disc, 0.5 * tr + disc]))

    def check_positive_definite(self) -> None:
        try:
            if self.diagonal:
                for block in self.mode_blocks():
                    linalg.cholesky(block)
            else:
                linalg.cholesky(self.matrix())
        except linalg.LinAlgError as e:
            raise SimulationError(f"metric matrix is not positive definite: {e}") from e

    @cached_property
    def kappa(self) -> float:
        """Condition number of G"""
        ev = self.eigenvalues()
        return float(ev[-1] / ev[0])

    def __call__(self, z, w) -> np.ndarray:
        return rho_squared_wah(z, w, self)


def rho_squared_wah(z, w, metric: WahMetric) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    if z.shape != w.shape or z.shape[-1] != metric.dim:
        raise ConfigurationError(f"z, w of shapes {z.shape}, {w.shape} do not match metric dimension {metric.dim}")
    if metric.diagonal:
        zcz = np.sum(metric.c_inv * z * z, axis=-1)
    else:
        zcz = np.einsum("...i,ij,...j->...", z, metric.c_inv, z)
    h0 = 0.5 * (np.sum(w * w, axis=-1) + zcz)
    return h0 + 2.0 * metric._zw * np.sum(z * w, axis=-1) + metric._zz * np.sum(z * z, axis=-1)


@dataclass(frozen=True)
class WahRate:
    c: float
    condition_ok: bool
    kappa_G: float

    def as_dict(self) -> dict:
        return asdict(self)


def wah_rate(
    lambda_: float, m: int, sigma_max: float, L_G: float, c_inv=None, branch: float = WAH_BRANCH
) -> WahRate:
    """Contraction rate for synchronous coupling of weakly anharmonic dynamics

    c = lambda/m * min(1/8, branch * m^2 / (sigma_max^2 lambda^2)). kappa_G uses c_inv
    when given and the isotropic C = sigma_max^2 I otherwise.
    """
    if lambda_ <= 0 or m < 1 or sigma_max <= 0 or L_G < 0 or branch <= 0:
        raise ConfigurationError("wah_rate needs lambda > 0, m >= 1, sigma_max > 0, L_G >= 0, branch > 0")
    ratio = lambda_ / m
    c = ratio * min(1.0 / 8.0, branch * m**2 / (sigma_max**2 * lambda_**2))
    condition_ok = ratio >= 4.0 * L_G * sigma_max
    if c_inv is None:
        c_inv = np.array([sigma_max**-2])
    kappa = WahMetric(lambda_, m, c_inv).kappa
    return WahRate(c=float(c), condition_ok=bool(condition_ok), kappa_G=kappa)


def optimal_lambda_wah(
    m: int, sigma_max: float, L_G: float = 0.0, branch: float = WAH_BRANCH
) -> tuple[float, float]:
    """Collision frequency maximizing wah_rate subject to lambda/m >= 4 L_G sigma_max

    The unconstrained maximizer is lambda/m = sqrt(8 branch) / sigma_max, so the
    default branch 8/5 gives sqrt(12.8) / sigma_max with c = sqrt(0.2) / sigma_max.
    With branch = WAH_BRANCH_GAUSSIAN (2/5) the maximizer is 4 sqrt(5) / (5 sigma_max)
    with c = sqrt(5) / (10 sigma_max), and c = 1 / (10 L_G sigma_max^3) once the
    Lipschitz condition binds.
    """
    if sigma_max <= 0 or branch <= 0:
        raise ConfigurationError("optimal_lambda_wah needs sigma_max > 0 and branch > 0")
    ratio = max(np.sqrt(8.0 * branch) / sigma_max, 4.0 * L_G * sigma_max)
    lam = ratio * m
    return float(lam), wah_rate(lam, m, sigma_max, L_G, branch=branch).c


def strongly_convex_rate(lambda_: float, m: int, K: float, L_G: float = 0.0) -> WahRate:
    """wah_rate for a K-strongly convex quadratic part (sigma_max = K^{-1/2})"""
    if K <= 0:
        raise ConfigurationError("K must be positive")
    return wah_rate(lambda_, m, K**-0.5, L_G)


def wasserstein_bound_wah(w2_initial: float, t, rate: WahRate) -> np.ndarray:
    """sqrt(kappa_G) exp(-c t / 2) W2(mu, nu)"""
    t = np.asarray(t, dtype=float)
    return np.sqrt(rate.kappa_G) * np.exp(-0.5 * rate.c * t) * w2_initial


@dataclass(frozen=True)
class TorusMetricParams:
    beta: float
    lambda_: float
    m: int
    ell: float
    L: float
    J: float
    R_cap: float
    gamma: float
    a: float
    alpha: float
    c_A: float
    cond_lambda_ok: bool
    cond_J_ok: bool
    J_max: Optional[float]

    @property
    def f_max(self) -> float:
        return float(f(self.R_cap, self.a, self.R_cap))

    def as_dict(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lambda_")
        return out


def torus_params(beta: float, lambda_: float, m: int, ell: float, L: float = 0.0, J: float = 0.0) -> TorusMetricParams:
    if beta <= 0 or lambda_ <= 0 or m < 1 or ell <= 0 or L < 0 or J < 0:
        raise ConfigurationError("torus_params needs beta, lambda, ell > 0, m >= 1 and L, J >= 0")
    sb = np.sqrt(beta)
    ratio = lambda_ / m
    half = 0.5 * ell
    R_cap = half + m / (sb * lambda_)
    gamma = 1.0 / (sb * R_cap)
    a = sb * ratio
    alpha = np.sqrt(1.0 + beta * L * R_cap**2)
    decay = np.exp(-sb * ratio * half)
    c_A = ratio * decay / 90.0
    cond_lambda_ok = sb * ratio * half >= 25.0 / 6.0 + 11.0 * beta * L * half**2
    if m == 1:
        J_max, cond_J_ok = None, True
    else:
        J_max = max(np.sqrt(beta * L * ell**2), 1.0) * decay / (75.0 * (m - 1) * beta * ell**2)
        cond_J_ok = J <= J_max
    return TorusMetricParams(
        beta=float(beta),
        lambda_=float(lambda_),
        m=int(m),
        ell=float(ell),
        L=float(L),
        J=float(J),
        R_cap=float(R_cap),
        gamma=float(gamma),
        a=float(a),
        alpha=float(alpha),
        c_A=float(c_A),
        cond_lambda_ok=bool(cond_lambda_ok),
        cond_J_ok=bool(cond_J_ok),
        J_max=None if J_max is None else float(J_max),
    )


def wasserstein_bound_torus(w_rho_initial: float, t, params: TorusMetricParams) -> np.ndarray:
    """exp(-c_A t) W_rho(mu, nu)"""
    return np.exp(-params.c_A * np.asarray(t, dtype=float)) * w_rho_initial


def f(r, a: float, R_cap: float) -> np.ndarray:
    """(1 - exp(-a min(r, R))) / a"""
    r = np.asarray(r, dtype=float)
    return -np.expm1(-a * np.minimum(r, R_cap)) / a


def f_left_derivative(r, a: float, R_cap: float) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return np.where(r <= R_cap, np.exp(-a * r), 0.0)


@dataclass(frozen=True)
class TorusDistance:
    r: np.ndarray
    rho: np.ndarray
    rho_simple: np.ndarray


def torus_distance(z, w, params: TorusMetricParams) -> TorusDistance:
    """Per-particle r_i, rho = sum_i f(r_i) and the plotted (1/m) sum_i sqrt(zeta_i^2 + w_i^2)"""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    zeta = minimal_difference(z, w, params.ell)
    q = zeta + w / params.gamma
    r = np.sqrt(zeta * zeta + q * q / params.alpha**2)
    rho = np.sum(f(r, params.a, params.R_cap), axis=-1)
    rho_simple = np.mean(np.sqrt(zeta * zeta + w * w), axis=-1)
    return TorusDistance(r=r, rho=rho, rho_simple=rho_simple)


def euclidean_metric_for(lambda_: float, m: int, n: int, c_inv) -> WahMetric:
    """WahMetric for a c_inv preset, vector or matrix on R^{m n}"""
    return WahMetric(lambda_, m, resolve_c_inv(c_inv, m * n))
