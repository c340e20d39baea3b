"""Monte Carlo experiments over many coupled replicas

Replicas are split into fixed chunks of settings.CHUNK_SIZE, each chunk is one
batched lockstep run, and chunk results are reduced in replica order. Replica
r always draws from the streams keyed by (seed, r), so the numbers never
depend on ANDERSEN_THREADS.
"""
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats
from pydantic import ValidationError
from tqdm import tqdm

from .config import settings
from .coupling import simulate_coupling_replicas
from .dynamics import Blocks
from .errors import ConfigurationError, FitDomainError, SimulationError
from .geometry import minimal_difference, wrap_position
from .metrics import TorusMetricParams, WahMetric, torus_distance, torus_params, wah_rate
from .potentials import Potential, QuadraticPotential, build_potential, sample_boltzmann
from .rng import INITIAL_STREAM, replica_rng, replica_rngs
from .schemas import DistanceKind, RunConfig, SweepAxis

logger = logging.getLogger(__name__)

# a run fails when more than this fraction of replicas abort
MAX_ABORT_FRACTION = 1e-3


@dataclass(frozen=True)
class EstimateSeries:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    count: int
    meta: dict = field(default_factory=dict)

    def value_at(self, t: float) -> tuple[float, float]:
        """Mean and stderr at the grid point nearest to t"""
        k = int(np.argmin(np.abs(self.times - t)))
        return float(self.mean[k]), float(self.stderr[k])


# ----- initial conditions -----


@dataclass(frozen=True)
class InitialSampler:
    """Draws one replica's coupled initial state (four blocks of length d) from its own stream

    antipodal: torus, x uniform, v ~ N(0, 1/beta), z_i = ell/2, w = 0
    offset: euclidean, x from the Gaussian part of the target (zeros when it has none),
        x_tilde = x - z0, v_tilde = v
    stationary_vs_point: first copy from the Boltzmann-Gibbs measure, second at rest at the origin
    """

    kind: str
    config: RunConfig

    def __call__(self, rng: np.random.Generator) -> Blocks:
        space = self.config.space
        beta = self.config.dynamics.beta
        d = space.dim
        if self.kind == "antipodal":
            x = rng.uniform(0.0, space.ell, size=d)
            v = rng.standard_normal(d) / np.sqrt(beta)
            return x, v, np.full(d, 0.5 * space.ell), np.zeros(d)

        potential = build_potential(self.config.potential, space)
        if self.kind == "offset":
            if type(potential) is QuadraticPotential:
                x = potential.sample_positions(beta, rng, 1)[0]
            else:
                x = np.zeros(d)
            v = rng.standard_normal(d) / np.sqrt(beta)
            z0 = np.broadcast_to(np.asarray(self.config.experiment.offset, dtype=float), (d,))
            return x, v, x - z0, v.copy()
        if self.kind == "stationary_vs_point":
            x, v = (b[0] for b in sample_boltzmann(potential, space, beta, rng, 1))
            if space.is_torus:
                return x, v, minimal_difference(x, v, space.ell), v.copy()
            return x, v, np.zeros(d), np.zeros(d)
        raise ConfigurationError(f"unknown initial sampler '{self.kind}'")


def make_sampler(config: RunConfig, kind: Optional[str] = None) -> InitialSampler:
    return InitialSampler(kind or config.experiment.initial, config)


def identical_sampler(config: RunConfig) -> Callable[[np.random.Generator], Blocks]:
    """Both copies start at the same state"""
    return _IdenticalSampler(make_sampler(config))


@dataclass(frozen=True)
class _IdenticalSampler:
    base: InitialSampler

    def __call__(self, rng):
        x, v, *_ = self.base(rng)
        d = x.shape[0]
        if self.base.config.space.is_torus:
            return x, v, np.zeros(d), np.zeros(d)
        return x, v, x.copy(), v.copy()


# ----- distances -----


def distance_observer(config: RunConfig, potential: Potential, kind: DistanceKind) -> Callable[[Blocks], np.ndarray]:
    space, dyn = config.space, config.dynamics
    if kind in ("rho_theorem", "rho_simple"):
        if not space.is_torus:
            raise ConfigurationError(f"distance '{kind}' requires a torus space")
        consts = potential.constants()
        params = torus_params(dyn.beta, dyn.lambda_, space.m, space.ell, consts.L or 0.0, consts.J or 0.0)
        attr = "rho" if kind == "rho_theorem" else "rho_simple"
        return _TorusObserver(params, attr)
    if kind == "rho_squared_wah":
        if not isinstance(potential, QuadraticPotential):
            raise ConfigurationError("rho_squared_wah requires a quadratic potential")
        return _WahObserver(WahMetric(dyn.lambda_, space.m, potential.c_inv))
    raise ConfigurationError(f"unknown distance '{kind}'")


@dataclass(frozen=True)
class _TorusObserver:
    params: TorusMetricParams
    attr: str

    def __call__(self, blocks: Blocks) -> np.ndarray:
        _, _, z, w = blocks
        return getattr(torus_distance(z, w, self.params), self.attr)


@dataclass(frozen=True)
class _WahObserver:
    metric: WahMetric

    def __call__(self, blocks: Blocks) -> np.ndarray:
        x, v, xt, vt = blocks
        return self.metric(x - xt, v - vt)


# ----- replica runs -----


@dataclass(frozen=True)
class _Chunk:
    config: RunConfig
    sampler: Callable
    distance: DistanceKind
    seed: int
    start: int
    stop: int


def _run_chunk(chunk: _Chunk) -> tuple[int, np.ndarray, np.ndarray]:
    config = chunk.config
    space = config.space
    potential = build_potential(config.potential, space)
    ids = range(chunk.start, chunk.stop)
    initial = [chunk.sampler(replica_rng(chunk.seed, r, INITIAL_STREAM)) for r in ids]
    y0 = tuple(np.stack([s[j] for s in initial]) for j in range(4))
    if space.is_torus:
        y0 = (wrap_position(y0[0], space.ell),) + y0[1:]
    batch = simulate_coupling_replicas(
        y0,
        potential,
        space,
        config.coupling_config(),
        replica_rngs(chunk.seed, ids),
        observe=distance_observer(config, potential, chunk.distance),
    )
    logger.debug("chunk %d-%d done", chunk.start, chunk.stop)
    return chunk.start, batch.values, batch.aborted


@dataclass(frozen=True)
class ReplicaValues:
    """Per-replica distances on the record grid; aborted rows are NaN"""

    times: np.ndarray
    values: np.ndarray
    aborted: np.ndarray


def run_replicas(
    config: RunConfig,
    sampler: Optional[Callable] = None,
    replicas: Optional[int] = None,
    distance: Optional[DistanceKind] = None,
    seed: Optional[int] = None,
) -> ReplicaValues:
    exp = config.experiment
    replicas = exp.replicas if replicas is None else int(replicas)
    if replicas < 1:
        raise ConfigurationError("replicas must be >= 1")
    sampler = sampler or make_sampler(config)
    distance = distance or exp.distance
    seed = exp.seed if seed is None else int(seed)
    times = config.andersen_config().times()

    size = max(1, settings.CHUNK_SIZE)
    chunks = [
        _Chunk(config, sampler, distance, seed, start, min(start + size, replicas))
        for start in range(0, replicas, size)
    ]
    workers = max(1, min(settings.THREADS, len(chunks)))
    logger.info(
        "running %d replicas in %d chunk(s) on %d worker(s), distance=%s", replicas, len(chunks), workers, distance
    )

    results: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    progress = tqdm(total=len(chunks), desc="replicas", unit="chunk", disable=not settings.PROGRESS)
    if workers == 1:
        for chunk in chunks:
            start, values, aborted = _run_chunk(chunk)
            results[start] = (values, aborted)
            progress.update()
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(_run_chunk, chunk) for chunk in chunks]
            for fut in as_completed(futures):
                start, values, aborted = fut.result()
                results[start] = (values, aborted)
                progress.update()
    progress.close()

    ordered = [results[c.start] for c in chunks]
    values = np.concatenate([v for v, _ in ordered], axis=0)
    aborted = np.concatenate([a for _, a in ordered], axis=0)
    n_aborted = int(aborted.sum())
    if n_aborted:
        logger.warning("%d of %d replicas aborted", n_aborted, replicas)
    if n_aborted > MAX_ABORT_FRACTION * replicas:
        raise SimulationError(f"{n_aborted} of {replicas} replicas aborted")
    return ReplicaValues(times, values, aborted)


def _aggregate(values: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    count = values.shape[0]
    mean = values.mean(axis=0)
    if count < 2:
        return mean, np.full_like(mean, np.nan), count
    return mean, values.std(axis=0, ddof=1) / np.sqrt(count), count


def estimate_rho_curve(
    y0_sampler: Optional[Callable],
    config: RunConfig,
    replicas: Optional[int] = None,
    distance_kind: Optional[DistanceKind] = None,
    master_seed: Optional[int] = None,
) -> EstimateSeries:
    """Mean and standard error of a coupling distance over independent replicas"""
    run = run_replicas(config, y0_sampler, replicas, distance_kind, master_seed)
    mean, stderr, count = _aggregate(run.values[~run.aborted])
    meta = {
        "config": config.model_dump(mode="json", by_alias=True),
        "master_seed": config.experiment.seed if master_seed is None else int(master_seed),
        "replicas": int(run.values.shape[0]),
        "aborted": int(run.aborted.sum()),
        "distance": distance_kind or config.experiment.distance,
        "gamma": config.resolved_gamma(),
    }
    return EstimateSeries(run.times, mean, stderr, count, meta)


# ----- decay-rate fits -----


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    intercept: float
    window: tuple[float, float]
    points: int


def default_window(times: np.ndarray) -> tuple[float, float]:
    t_max = float(times[-1])
    return 0.5 * t_max, 0.9 * t_max


def fit_decay_rate(series: EstimateSeries, window: Optional[Sequence[float]] = None) -> DecayFit:
    """Least-squares slope of -log(mean) against t over grid points in the window"""
    t0, t1 = default_window(series.times) if window is None else (float(window[0]), float(window[1]))
    if t0 >= t1:
        raise FitDomainError(f"empty fit window [{t0}, {t1}]")
    mask = (series.times >= t0 - 1e-12) & (series.times <= t1 + 1e-12)
    t = series.times[mask]
    y = series.mean[mask]
    if t.shape[0] < 2:
        raise FitDomainError(f"fit window [{t0}, {t1}] holds {t.shape[0]} grid point(s)")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise FitDomainError(f"non-positive mean in fit window [{t0}, {t1}]")
    res = stats.linregress(t, -np.log(y))
    return DecayFit(float(res.slope), float(res.rvalue**2), float(res.intercept), (t0, t1), int(t.shape[0]))


# ----- sweeps -----


def with_axis_value(config: RunConfig, axis: SweepAxis, value: float) -> RunConfig:
    """Copy of config with one parameter replaced, re-validated"""
    data = config.model_dump(by_alias=True)
    if axis == "lambda":
        data["dynamics"]["lambda"] = float(value)
    elif axis == "lambda_per_m":
        data["dynamics"]["lambda"] = float(value) * config.space.m
    elif axis == "m":
        if float(value) != int(value):
            raise ConfigurationError(f"m must be an integer, got {value}")
        data["space"]["m"] = int(value)
    elif axis == "gamma":
        data["coupling"]["gamma"] = float(value)
    elif axis == "beta":
        data["dynamics"]["beta"] = float(value)
    else:
        raise ConfigurationError(f"unknown sweep axis '{axis}'")
    return _revalidate(data)


def _revalidate(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid run config:\n{e}") from e


def theory_rate(config: RunConfig) -> float:
    """c_A on the torus, the weakly anharmonic c on euclidean quadratic targets, NaN otherwise"""
    space, dyn = config.space, config.dynamics
    potential = build_potential(config.potential, space)
    consts = potential.constants()
    if space.is_torus:
        return torus_params(dyn.beta, dyn.lambda_, space.m, space.ell, consts.L or 0.0, consts.J or 0.0).c_A
    if isinstance(potential, QuadraticPotential):
        return wah_rate(dyn.lambda_, space.m, consts.sigma_max, consts.L_G or 0.0).c
    return float("nan")


@dataclass(frozen=True)
class SweepRow:
    value: float
    rate: float
    r_squared: float
    eval_time: float
    eval_mean: float
    eval_stderr: float
    theory_rate: float


@dataclass
class SweepTable:
    axis: str
    rows: list[SweepRow]
    meta: dict = field(default_factory=dict)

    def argmin_eval(self) -> float:
        return self.rows[int(np.argmin([r.eval_mean for r in self.rows]))].value

    def argmax_theory(self) -> float:
        return self.rows[int(np.nanargmax([r.theory_rate for r in self.rows]))].value


def sweep(
    base_config: RunConfig,
    axis: Optional[SweepAxis] = None,
    values: Optional[Sequence[float]] = None,
    replicas: Optional[int] = None,
    seed: Optional[int] = None,
) -> SweepTable:
    """One estimate per axis value, every value run with the same master seed"""
    exp = base_config.experiment
    axis = axis or exp.sweep_axis
    values = list(exp.sweep_values if values is None else values)
    if axis is None or not values:
        raise ConfigurationError("sweep needs an axis and at least one value")
    seed = exp.seed if seed is None else int(seed)

    rows = []
    for value in values:
        config = with_axis_value(base_config, axis, value)
        series = estimate_rho_curve(None, config, replicas, None, seed)
        eval_time = config.experiment.eval_time if config.experiment.eval_time is not None else float(series.times[-1])
        eval_mean, eval_stderr = series.value_at(eval_time)
        try:
            fit = fit_decay_rate(series, config.experiment.fit_window)
            rate, r_squared = fit.rate, fit.r_squared
        except FitDomainError as e:
            logger.warning("no decay fit at %s = %g: %s", axis, value, e)
            rate, r_squared = float("nan"), float("nan")
        rows.append(SweepRow(float(value), rate, r_squared, eval_time, eval_mean, eval_stderr, theory_rate(config)))
        logger.info("%s = %g: E[rho(%g)] = %.6g +- %.2g, rate = %.6g", axis, value, eval_time, eval_mean, eval_stderr, rate)

    meta = {
        "config": base_config.model_dump(mode="json", by_alias=True),
        "axis": axis,
        "values": [float(v) for v in values],
        "master_seed": seed,
    }
    return SweepTable(axis, rows, meta)


# ----- supermartingale check -----


@dataclass(frozen=True)
class SupermartingaleReport:
    """e^{ct} E[metric(Y_t)] with paired increments between consecutive grid points"""

    times: np.ndarray
    scaled_mean: np.ndarray
    scaled_stderr: np.ndarray
    increment_mean: np.ndarray
    increment_stderr: np.ndarray
    rate: float
    tolerance: float = 2.0

    @property
    def violations(self) -> list[int]:
        """Indices k where the step k -> k+1 increases by more than tolerance standard errors"""
        excess = self.increment_mean - self.tolerance * np.nan_to_num(self.increment_stderr)
        return [int(k) for k in np.flatnonzero(excess > 0)]

    @property
    def ok(self) -> bool:
        return not self.violations


def supermartingale_check(
    config: RunConfig,
    replicas: Optional[int] = None,
    metric: Optional[DistanceKind] = None,
    rate_c: Optional[float] = None,
    times: Optional[Sequence[float]] = None,
    seed: Optional[int] = None,
    sampler: Optional[Callable] = None,
) -> SupermartingaleReport:
    """Evaluate t -> e^{ct} E[metric(Y_t)] on a grid; rate_c defaults to the theoretical rate"""
    if times is not None:
        data = config.model_dump(by_alias=True)
        data["experiment"]["record_times"] = [float(t) for t in times]
        config = _revalidate(data)
    rate = theory_rate(config) if rate_c is None else float(rate_c)
    if not np.isfinite(rate):
        raise ConfigurationError("no theoretical rate for this configuration; pass rate_c")

    run = run_replicas(config, sampler, replicas, metric, seed)
    scaled = run.values[~run.aborted] * np.exp(rate * run.times)
    mean, stderr, _ = _aggregate(scaled)
    inc_mean, inc_stderr, _ = _aggregate(np.diff(scaled, axis=1))
    return SupermartingaleReport(run.times, mean, stderr, inc_mean, inc_stderr, rate)
