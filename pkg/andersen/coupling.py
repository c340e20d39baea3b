"""Couplings of two Andersen processes driven by one jump skeleton

Both copies share jump times and particle indices. The first copy receives
the fresh velocity a = xi_k exactly as a single-copy run would; the second
receives a_tilde from the maximal gamma-shift/reflection coupling, or a itself
under synchronous coupling. On the torus the pair is carried as (x, v, z, w)
with z on the covering space.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import erf

from .dynamics import (
    Blocks,
    ObserveFn,
    PaddedSkeleton,
    ReplicaBatch,
    block_columns,
    run_event_loop,
    sample_jump_skeleton,
    stack_skeletons,
)
from .errors import ConfigurationError, SimulationError
from .flow import advance, advance_coupled_torus, check_flow
from .geometry import minimal_difference
from .potentials import PotentialLike, as_potential
from .schemas import CouplingConfig, SpaceSpec
from .states import CoupledState, EuclideanCoupledState, TorusCoupledState

logger = logging.getLogger(__name__)


def coupled_velocity(a, b, u, gamma: float, beta: float) -> np.ndarray:
    """Phi(a, b, u): a + gamma*b with maximal probability, else a reflected across b^perp

    Vectorized over leading axes of a (..., n), b (..., n) and u (...).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    u = np.asarray(u, dtype=float)
    shifted = a + gamma * b
    log_ratio = -0.5 * beta * (np.sum(shifted * shifted, axis=-1) - np.sum(a * a, axis=-1))
    norm = np.linalg.norm(b, axis=-1, keepdims=True)
    # b = 0 makes the ratio 1; e_0 = 0 would leave a unchanged anyway
    accept = (np.log(u) < log_ratio) | (norm[..., 0] == 0.0)
    e_b = np.divide(b, norm, out=np.zeros_like(b), where=norm > 0.0)
    reflected = a - 2.0 * np.sum(e_b * a, axis=-1, keepdims=True) * e_b
    return np.where(accept[..., None], shifted, reflected)


def rejection_probability_exact(s):
    """P[xi - xi_tilde != -gamma b] for s = sqrt(beta) gamma |b|"""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ConfigurationError("s must be non-negative")
    return erf(s / (2.0 * np.sqrt(2.0)))


def rejection_probability_bound(s):
    """Upper bound s / sqrt(2 pi) on the rejection probability"""
    return np.asarray(s, dtype=float) / np.sqrt(2.0 * np.pi)


def _partner_velocity(a, b, u, config: CouplingConfig) -> np.ndarray:
    if config.kind == "synchronous":
        return np.array(a, copy=True)
    return coupled_velocity(a, b, u, config.gamma, config.beta)


def _euclidean_jump(n: int, config: CouplingConfig):
    def jump(blocks: Blocks, idx: np.ndarray, skeleton: PaddedSkeleton, k: int) -> Blocks:
        x, v, xt, vt = blocks
        rows = np.arange(idx.shape[0])[:, None]
        cols = block_columns(skeleton.indices[idx, k], n)
        a = skeleton.xi[idx, k]
        a_tilde = _partner_velocity(a, x[rows, cols] - xt[rows, cols], skeleton.u[idx, k], config)
        v, vt = v.copy(), vt.copy()
        v[rows, cols] = a
        vt[rows, cols] = a_tilde
        return x, v, xt, vt

    return jump


def _torus_jump(ell: float, config: CouplingConfig):
    def jump(blocks: Blocks, idx: np.ndarray, skeleton: PaddedSkeleton, k: int) -> Blocks:
        x, v, z, w = blocks
        rows = np.arange(idx.shape[0])
        i = skeleton.indices[idx, k]
        a = skeleton.xi[idx, k]
        zeta = minimal_difference(z[rows, i], w[rows, i], ell)
        a_tilde = _partner_velocity(a, zeta[:, None], skeleton.u[idx, k], config)
        v, w = v.copy(), w.copy()
        v[rows, i] = a[:, 0]
        w[rows, i] = a[:, 0] - a_tilde[:, 0]
        return x, v, z, w

    return jump


def coupled_substitution(
    y: CoupledState, i: int, a, u: float, config: CouplingConfig, space: SpaceSpec
) -> CoupledState:
    """Apply one coupled velocity randomization of particle i (0-based) with fresh velocity a"""
    if not 0 <= i < space.m:
        raise ConfigurationError(f"particle index {i} out of range for m = {space.m}")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape != (space.n,):
        raise ConfigurationError(f"fresh velocity has shape {a.shape}, expected ({space.n},)")
    skeleton = PaddedSkeleton(
        times=np.zeros((1, 1)),
        indices=np.array([[i]]),
        xi=a.reshape(1, 1, space.n),
        u=np.array([[u]], dtype=float),
    )
    idx = np.array([0])
    if isinstance(y, TorusCoupledState):
        if not space.is_torus:
            raise ConfigurationError("torus state given for a euclidean space")
        blocks = _torus_jump(space.ell, config)((y.x[None], y.v[None], y.z[None], y.w[None]), idx, skeleton, 0)
        return TorusCoupledState(*(b[0] for b in blocks))
    if space.is_torus:
        raise ConfigurationError("euclidean state given for a torus space")
    blocks = _euclidean_jump(space.n, config)(
        (y.x[None], y.v[None], y.x_tilde[None], y.v_tilde[None]), idx, skeleton, 0
    )
    return EuclideanCoupledState(*(b[0] for b in blocks))


def _stack_blocks(blocks, dim: int) -> Blocks:
    out = tuple(np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks)
    if len({b.shape for b in out}) != 1 or out[0].shape[-1] != dim:
        raise ConfigurationError(f"coupled state blocks must all have shape (R, {dim})")
    return out


def simulate_coupling_replicas(
    y0: Blocks,
    potential: PotentialLike,
    space: SpaceSpec,
    config: CouplingConfig,
    rngs: Sequence[np.random.Generator],
    observe: Optional[ObserveFn] = None,
) -> ReplicaBatch:
    """Run R coupled processes in lockstep; y0 holds four (R, d) blocks

    Euclidean blocks are (x, v, x_tilde, v_tilde), torus blocks (x, v, z, w).
    Without observe the batch values hold the four blocks as (R, G, 4, d).
    """
    pot = as_potential(potential, space)
    check_flow(pot, space, config.flow)
    blocks = _stack_blocks(y0, space.dim)
    if len(rngs) != blocks[0].shape[0]:
        raise ConfigurationError(f"got {len(rngs)} random streams for {blocks[0].shape[0]} replicas")
    if space.is_torus and config.kind == "mirror" and config.gamma == 0.0:
        logger.debug("mirror coupling with gamma = 0 reduces to reflection-only coupling")

    skeletons = [sample_jump_skeleton(config.lambda_, config.t_end, space.m, space.n, config.beta, g) for g in rngs]
    padded = stack_skeletons(skeletons, space.n)

    if space.is_torus:

        def advance_fn(b, dt):
            return advance_coupled_torus(*b, dt, pot, space, config.flow, wrap=False)

        jump_fn = _torus_jump(space.ell, config)
        wrap_blocks, ell = (0,), space.ell
    else:

        def advance_fn(b, dt):
            x, v = advance(b[0], b[1], dt, pot, space, config.flow)
            xt, vt = advance(b[2], b[3], dt, pot, space, config.flow)
            return x, v, xt, vt

        jump_fn = _euclidean_jump(space.n, config)
        wrap_blocks, ell = (), None

    if observe is None:
        observe = lambda b: np.stack(b, axis=1)

    return run_event_loop(blocks, padded, config.times(), advance_fn, jump_fn, observe, wrap_blocks, ell)


@dataclass(frozen=True)
class CoupledTrajectory:
    """Recorded coupled states; blocks are (x, v, x_tilde, v_tilde) or (x, v, z, w), each (G, d)"""

    times: np.ndarray
    blocks: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    torus: bool

    def __len__(self) -> int:
        return self.times.shape[0]

    def state(self, k: int) -> CoupledState:
        parts = (b[k] for b in self.blocks)
        return TorusCoupledState(*parts) if self.torus else EuclideanCoupledState(*parts)


def simulate_coupling(
    y0: CoupledState,
    potential: PotentialLike,
    space: SpaceSpec,
    config: CouplingConfig,
    rng: np.random.Generator,
) -> CoupledTrajectory:
    """One coupled trajectory recorded at config.times()

    With the same rng the first copy follows simulate_andersen path by path.
    """
    if isinstance(y0, TorusCoupledState):
        if not space.is_torus:
            raise ConfigurationError("torus state given for a euclidean space")
        blocks = (y0.x, y0.v, y0.z, y0.w)
    else:
        if space.is_torus:
            raise ConfigurationError("euclidean state given for a torus space")
        blocks = (y0.x, y0.v, y0.x_tilde, y0.v_tilde)

    batch = simulate_coupling_replicas(blocks, potential, space, config, [rng])
    if batch.aborted[0]:
        raise SimulationError("coupled trajectory produced non-finite values")
    values = batch.values[0]
    return CoupledTrajectory(batch.times, tuple(values[:, j] for j in range(4)), space.is_torus)
