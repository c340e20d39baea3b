"""Single-copy Andersen dynamics and the batched event loop shared with the couplings

A run draws a jump skeleton (Poisson times, particle indices, fresh velocities
and coupling uniforms) up front, then walks the events left to right: flow to
the next jump time, substitute the velocity block, repeat. Grid points inside
a gap are recorded by flowing from the last post-jump state, so a grid point
that coincides with a jump records the post-jump value.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, SimulationError
from .flow import advance, check_flow
from .geometry import wrap_position
from .potentials import PotentialLike, as_potential
from .rng import open_uniform
from .schemas import AndersenConfig, SpaceSpec
from .states import PhasePoint

logger = logging.getLogger(__name__)

Blocks = tuple[np.ndarray, ...]


@dataclass(frozen=True)
class JumpEvent:
    time: float
    index: int
    xi: np.ndarray
    u: float


@dataclass(frozen=True)
class JumpSkeleton:
    """Jump times T_k, particle indices I_k (0-based), fresh velocities xi_k and uniforms u_k"""

    times: np.ndarray
    indices: np.ndarray
    xi: np.ndarray
    u: np.ndarray

    def __len__(self) -> int:
        return self.times.shape[0]

    def __iter__(self) -> Iterator[JumpEvent]:
        for k in range(len(self)):
            yield JumpEvent(float(self.times[k]), int(self.indices[k]), self.xi[k], float(self.u[k]))


def sample_jump_skeleton(
    lambda_: float, t_end: float, m: int, n: int, beta: float, rng: np.random.Generator
) -> JumpSkeleton:
    """All events of a rate-lambda Poisson clock on (0, t_end]

    Draw order is fixed: all gaps, then all indices, then all xi, then all u.
    """
    if lambda_ <= 0 or beta <= 0:
        raise ConfigurationError("lambda and beta must be positive")
    if t_end < 0:
        raise ConfigurationError("t_end must be non-negative")

    mean_count = lambda_ * t_end
    block = max(16, int(mean_count + 6.0 * np.sqrt(mean_count) + 16))
    gaps = rng.exponential(1.0 / lambda_, size=block)
    while gaps.sum() <= t_end:
        gaps = np.concatenate([gaps, rng.exponential(1.0 / lambda_, size=block)])
    times = np.cumsum(gaps)
    times = times[times <= t_end]
    count = times.shape[0]

    indices = rng.integers(0, m, size=count)
    xi = rng.standard_normal((count, n)) / np.sqrt(beta)
    u = open_uniform(rng, count)
    return JumpSkeleton(times, indices, xi, u)


@dataclass(frozen=True)
class PaddedSkeleton:
    """Skeletons of R replicas stacked to a common length; padding times are +inf"""

    times: np.ndarray
    indices: np.ndarray
    xi: np.ndarray
    u: np.ndarray

    @property
    def max_events(self) -> int:
        return self.times.shape[1]


def stack_skeletons(skeletons: Sequence[JumpSkeleton], n: int) -> PaddedSkeleton:
    rows = len(skeletons)
    k_max = max((len(s) for s in skeletons), default=0)
    times = np.full((rows, k_max), np.inf)
    indices = np.zeros((rows, k_max), dtype=np.int64)
    xi = np.zeros((rows, k_max, n))
    u = np.ones((rows, k_max))
    for r, s in enumerate(skeletons):
        k = len(s)
        times[r, :k] = s.times
        indices[r, :k] = s.indices
        xi[r, :k] = s.xi
        u[r, :k] = s.u
    return PaddedSkeleton(times, indices, xi, u)


def block_columns(indices: np.ndarray, n: int) -> np.ndarray:
    """Columns of particle blocks: row r gets indices[r]*n + 0..n-1"""
    return indices[:, None] * n + np.arange(n)


def velocity_substitution(state: PhasePoint, i: int, a) -> PhasePoint:
    """S(i, a): replace the velocity block of particle i (0-based) by a"""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    n = a.shape[0]
    if n == 0 or state.dim % n != 0:
        raise ConfigurationError(f"velocity block of size {n} does not divide dimension {state.dim}")
    m = state.dim // n
    if not 0 <= i < m:
        raise ConfigurationError(f"particle index {i} out of range for m = {m}")
    v = state.v.copy()
    v[i * n : (i + 1) * n] = a
    return PhasePoint(state.x, v)


@dataclass
class ReplicaBatch:
    """Observations of R replicas on a shared record grid"""

    times: np.ndarray
    values: np.ndarray
    aborted: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.aborted is None:
            self.aborted = np.zeros(self.values.shape[0], dtype=bool)

    @property
    def replicas(self) -> int:
        return self.values.shape[0]


AdvanceFn = Callable[[Blocks, np.ndarray], Blocks]
JumpFn = Callable[[Blocks, np.ndarray, PaddedSkeleton, int], Blocks]
ObserveFn = Callable[[Blocks], np.ndarray]
JumpHook = Callable[[PaddedSkeleton, int, np.ndarray, Blocks, Blocks], None]


def _sanitize(blocks: Blocks, aborted: np.ndarray, wrap_blocks: Sequence[int], ell: Optional[float]) -> Blocks:
    """Flag rows holding non-finite values as aborted, freeze them at zero, wrap torus positions"""
    bad = np.zeros(blocks[0].shape[0], dtype=bool)
    for b in blocks:
        bad |= ~np.all(np.isfinite(b), axis=-1)
    if bad.any():
        newly = bad & ~aborted
        if newly.any():
            logger.warning("aborting %d replica(s) with non-finite state", int(newly.sum()))
        aborted |= bad
        blocks = tuple(np.where(bad[:, None], 0.0, b) for b in blocks)
    if ell is not None:
        blocks = tuple(wrap_position(b, ell) if j in wrap_blocks else b for j, b in enumerate(blocks))
    return blocks


def run_event_loop(
    blocks: Blocks,
    skeleton: PaddedSkeleton,
    record_times: np.ndarray,
    advance_fn: AdvanceFn,
    jump_fn: JumpFn,
    observe_fn: ObserveFn,
    wrap_blocks: Sequence[int] = (),
    ell: Optional[float] = None,
    on_jump: Optional[JumpHook] = None,
) -> ReplicaBatch:
    """Drive R replicas in lockstep over event index k

    advance_fn(blocks, dt) flows each row by dt[r] (torus positions unwrapped);
    jump_fn(blocks, live, skeleton, k) applies event k to the rows in live;
    observe_fn(blocks) maps states to per-row observations stored on the grid.
    """
    rows = blocks[0].shape[0]
    grid = np.asarray(record_times, dtype=float)
    n_grid = grid.shape[0]
    aborted = np.zeros(rows, dtype=bool)
    blocks = tuple(np.array(b, dtype=float, copy=True) for b in blocks)
    t_now = np.zeros(rows)
    g_next = np.zeros(rows, dtype=np.int64)
    values = None

    for k in range(skeleton.max_events + 1):
        t_next = skeleton.times[:, k] if k < skeleton.max_events else np.full(rows, np.inf)

        # grid points in [t_now, t_next) are flowed to from the current state
        g_stop = np.searchsorted(grid, t_next, side="left")
        counts = g_stop - g_next
        total = int(counts.sum())
        if total:
            who = np.repeat(np.arange(rows), counts)
            offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
            gi = np.repeat(g_next, counts) + offsets
            sub = tuple(b[who] for b in blocks)
            sub_aborted = aborted[who]
            with np.errstate(over="ignore", invalid="ignore"):
                moved = advance_fn(sub, grid[gi] - t_now[who])
            sub = _sanitize(moved, sub_aborted, wrap_blocks, ell)
            np.logical_or.at(aborted, who, sub_aborted)
            obs = np.asarray(observe_fn(sub), dtype=float)
            if values is None:
                values = np.full((rows, n_grid) + obs.shape[1:], np.nan)
            values[who, gi] = obs
            g_next = g_stop

        live = np.isfinite(t_next)
        if not live.any():
            break
        idx = np.flatnonzero(live)
        dt = t_next[idx] - t_now[idx]
        sub = tuple(b[idx] for b in blocks)
        sub_aborted = aborted[idx]
        with np.errstate(over="ignore", invalid="ignore"):
            moved = advance_fn(sub, dt)
        sub = _sanitize(moved, sub_aborted, wrap_blocks, ell)
        aborted[idx] = sub_aborted
        before = sub
        after = jump_fn(sub, idx, skeleton, k)
        if on_jump is not None:
            on_jump(skeleton, k, idx, before, after)
        for b, s in zip(blocks, after):
            b[idx] = s
        t_now[idx] = t_next[idx]

    if values is None:
        obs = np.asarray(observe_fn(tuple(b[:0] for b in blocks)), dtype=float)
        values = np.full((rows, n_grid) + obs.shape[1:], np.nan)
    values[aborted] = np.nan
    return ReplicaBatch(grid, values, aborted)


def _single_jump(n: int) -> JumpFn:
    def jump(blocks: Blocks, idx: np.ndarray, skeleton: PaddedSkeleton, k: int) -> Blocks:
        x, v = blocks
        v = v.copy()
        cols = block_columns(skeleton.indices[idx, k], n)
        v[np.arange(idx.shape[0])[:, None], cols] = skeleton.xi[idx, k]
        return x, v

    return jump


def stack_states(x0, v0, dim: int) -> tuple[np.ndarray, np.ndarray]:
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    v0 = np.atleast_2d(np.asarray(v0, dtype=float))
    if x0.shape != v0.shape or x0.shape[-1] != dim:
        raise ConfigurationError(f"initial states have shapes {x0.shape}, {v0.shape}; expected (R, {dim})")
    return x0, v0


def simulate_andersen_replicas(
    x0,
    v0,
    potential: PotentialLike,
    space: SpaceSpec,
    config: AndersenConfig,
    rngs: Sequence[np.random.Generator],
    observe: Optional[ObserveFn] = None,
    on_jump: Optional[JumpHook] = None,
) -> ReplicaBatch:
    """Run R independent Andersen processes, replica r driven by rngs[r]

    Without observe the batch values hold (x, v) stacked as (R, G, 2, d).
    """
    pot = as_potential(potential, space)
    check_flow(pot, space, config.flow)
    x0, v0 = stack_states(x0, v0, space.dim)
    if len(rngs) != x0.shape[0]:
        raise ConfigurationError(f"got {len(rngs)} random streams for {x0.shape[0]} replicas")

    skeletons = [sample_jump_skeleton(config.lambda_, config.t_end, space.m, space.n, config.beta, g) for g in rngs]
    padded = stack_skeletons(skeletons, space.n)

    def advance_fn(blocks, dt):
        return advance(blocks[0], blocks[1], dt, pot, space, config.flow, wrap=False)

    if observe is None:
        observe = lambda blocks: np.stack(blocks, axis=1)

    return run_event_loop(
        (x0, v0),
        padded,
        config.times(),
        advance_fn,
        _single_jump(space.n),
        observe,
        wrap_blocks=(0,),
        ell=space.ell if space.is_torus else None,
        on_jump=on_jump,
    )


@dataclass(frozen=True)
class JumpRecord:
    """Left limit and post-jump state at one velocity randomization"""

    time: float
    index: int
    before: PhasePoint
    after: PhasePoint


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    jumps: Optional[list[JumpRecord]] = None

    def __len__(self) -> int:
        return self.times.shape[0]

    def state(self, k: int) -> PhasePoint:
        return PhasePoint(self.x[k], self.v[k])


def simulate_andersen(
    initial: PhasePoint,
    potential: PotentialLike,
    space: SpaceSpec,
    config: AndersenConfig,
    rng: np.random.Generator,
    log_jumps: bool = False,
) -> Trajectory:
    """One Andersen trajectory recorded at config.times()"""
    if initial.dim != space.dim:
        raise ConfigurationError(f"initial state has dimension {initial.dim}, space has {space.dim}")
    jumps: Optional[list[JumpRecord]] = [] if log_jumps else None

    def record(skeleton, k, idx, before, after):
        jumps.append(
            JumpRecord(
                float(skeleton.times[0, k]),
                int(skeleton.indices[0, k]),
                PhasePoint(before[0][0], before[1][0]),
                PhasePoint(after[0][0], after[1][0]),
            )
        )

    batch = simulate_andersen_replicas(
        initial.x, initial.v, potential, space, config, [rng], on_jump=record if log_jumps else None
    )
    if batch.aborted[0]:
        raise SimulationError("trajectory produced non-finite values")
    values = batch.values[0]
    return Trajectory(batch.times, values[:, 0], values[:, 1], jumps)
