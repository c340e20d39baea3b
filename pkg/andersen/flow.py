"""Deterministic Hamiltonian flows between velocity randomizations

Exact closed forms cover free streaming and diagonal quadratic potentials;
everything else goes through velocity Verlet with a partial final step so a
flow of duration t lands exactly on t. All advance_* functions are batched:
states have shape (..., d) and durations broadcast against (...,).
"""
import logging
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .geometry import wrap_position
from .potentials import Potential, QuadraticPlusConvexPotential, QuadraticPotential, ZeroPotential
from .schemas import FlowConfig, SpaceSpec
from .states import PhasePoint, TorusCoupledState

logger = logging.getLogger(__name__)

# Default Verlet step as a fraction of the potential's characteristic period
DEFAULT_STEP_FRACTION = 1e-3


def supports_exact(potential: Potential, space: SpaceSpec) -> bool:
    if isinstance(potential, ZeroPotential):
        return True
    return (
        isinstance(potential, QuadraticPotential)
        and not isinstance(potential, QuadraticPlusConvexPotential)
        and potential.diagonal
        and not space.is_torus
    )


def check_flow(potential: Potential, space: SpaceSpec, config: FlowConfig) -> None:
    if potential.dim != space.dim:
        raise ConfigurationError(f"potential dimension {potential.dim} does not match space dimension {space.dim}")
    if config.mode == "exact" and not supports_exact(potential, space):
        raise ConfigurationError(
            f"exact flow is not available for {type(potential).__name__} on {space.kind} space; use mode 'verlet'"
        )


def resolve_step(potential: Potential, config: FlowConfig) -> float:
    if config.step is not None:
        return float(config.step)
    return DEFAULT_STEP_FRACTION * potential.characteristic_period()


def _durations(t, batch_shape) -> np.ndarray:
    t = np.broadcast_to(np.asarray(t, dtype=float), batch_shape)
    if np.any(t < 0):
        raise ConfigurationError("flow duration must be non-negative")
    return t


def _leapfrog(
    q: tuple[np.ndarray, ...],
    p: tuple[np.ndarray, ...],
    accel: Callable[[tuple[np.ndarray, ...]], tuple[np.ndarray, ...]],
    t: np.ndarray,
    h: float,
) -> tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...]]:
    """Velocity Verlet over position blocks q and velocity blocks p

    Row r takes floor(t_r / h) full steps and one partial step of the
    remainder. A zero step leaves a row bit-for-bit unchanged, so rows with
    fewer steps simply idle.
    """
    n_full = np.floor(t / h).astype(np.int64)
    rem = np.maximum(t - n_full * h, 0.0)
    a = accel(q)

    def step(hs, q, p, a):
        hs = hs[..., None]
        p_half = tuple(pi + 0.5 * hs * ai for pi, ai in zip(p, a))
        q = tuple(qi + hs * pi for qi, pi in zip(q, p_half))
        a = accel(q)
        p = tuple(pi + 0.5 * hs * ai for pi, ai in zip(p_half, a))
        return q, p, a

    for k in range(int(n_full.max(initial=0))):
        q, p, a = step(np.where(n_full > k, h, 0.0), q, p, a)
    if np.any(rem > 0):
        q, p, a = step(rem, q, p, a)
    return q, p


def advance(
    x, v, t, potential: Potential, space: SpaceSpec, config: FlowConfig, wrap: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Batched Hamiltonian flow of (x, v) over durations t

    With wrap=False torus positions are left on the covering space.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    t = _durations(t, x.shape[:-1])
    tt = t[..., None]

    if config.mode == "exact":
        if isinstance(potential, ZeroPotential):
            x_new, v_new = x + v * tt, v.copy()
        elif supports_exact(potential, space):
            omega = np.sqrt(potential.c_inv)
            c, s = np.cos(omega * tt), np.sin(omega * tt)
            x_new = x * c + (v / omega) * s
            v_new = -x * omega * s + v * c
        else:
            raise ConfigurationError(f"exact flow is not available for {type(potential).__name__}")
    else:
        h = resolve_step(potential, config)
        (x_new,), (v_new,) = _leapfrog((x,), (v,), lambda q: (-potential.gradient(q[0]),), t, h)

    if space.is_torus and wrap:
        x_new = wrap_position(x_new, space.ell)
    return x_new, v_new


def flow(state: PhasePoint, t: float, potential: Potential, space: SpaceSpec, config: FlowConfig) -> PhasePoint:
    """phi_t(x, v) for a single phase point"""
    check_flow(potential, space, config)
    if state.dim != space.dim:
        raise ConfigurationError(f"state dimension {state.dim} does not match space dimension {space.dim}")
    x, v = advance(state.x, state.v, float(t), potential, space, config)
    return PhasePoint(x, v)


def advance_coupled_torus(
    x, v, z, w, t, potential: Potential, space: SpaceSpec, config: FlowConfig, wrap: bool = True
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Batched flow of dx = v, dv = -grad U(x), dz = w, dw = grad U(x - z) - grad U(x)

    x is wrapped on output; z stays on the covering space.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    t = _durations(t, x.shape[:-1])

    if config.mode == "exact":
        if not isinstance(potential, ZeroPotential):
            raise ConfigurationError("exact coupled torus flow requires U = 0")
        tt = t[..., None]
        x_new, v_new, z_new, w_new = x + v * tt, v.copy(), z + w * tt, w.copy()
    else:
        h = resolve_step(potential, config)

        def accel(q):
            xq, zq = q
            gx = potential.gradient(xq)
            return -gx, potential.gradient(xq - zq) - gx

        (x_new, z_new), (v_new, w_new) = _leapfrog((x, z), (v, w), accel, t, h)

    if wrap:
        x_new = wrap_position(x_new, space.ell)
    return x_new, v_new, z_new, w_new


def coupled_flow_torus(
    y: TorusCoupledState, t: float, potential: Potential, space: SpaceSpec, config: FlowConfig
) -> TorusCoupledState:
    if not space.is_torus:
        raise ConfigurationError("coupled_flow_torus requires a torus space")
    check_flow(potential, space, config)
    return TorusCoupledState(*advance_coupled_torus(y.x, y.v, y.z, y.w, float(t), potential, space, config))
