"""Fast deterministic invariant checks runnable without pytest (`andersen selftest`)"""
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .coupling import coupled_velocity, rejection_probability_exact, simulate_coupling
from .dynamics import simulate_andersen
from .flow import coupled_flow_torus, flow
from .geometry import minimal_difference, translate, wrap_position
from .metrics import WahMetric, f, rho_squared_wah, torus_distance, torus_params, wah_rate
from .potentials import (
    QuadraticPlusConvexPotential,
    QuadraticPotential,
    TorusCosinePotential,
    ZeroPotential,
    resolve_edges,
)
from .rng import replica_rng
from .schemas import AndersenConfig, CouplingConfig, FlowConfig, SpaceSpec
from .states import PhasePoint, TorusCoupledState, project_torus_state

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


def _check_geometry():
    assert np.allclose(wrap_position([1.3, -0.25], 1.0), [0.3, 0.75])
    assert np.allclose(translate([0.9], [0.3], 1.0), [0.2])
    assert minimal_difference(0.5, -0.3, 1.0) == 0.5
    assert minimal_difference(0.5, 0.0, 1.0) == -0.5
    assert np.isclose(minimal_difference(0.7, 0.0, 1.0), -0.3)
    rng = np.random.default_rng(0)
    z, zt = rng.uniform(-3, 3, (2, 1000))
    w, wt = rng.standard_normal((2, 1000))
    lhs = np.abs(np.abs(minimal_difference(z, w, 1.0)) - np.abs(minimal_difference(zt, wt, 1.0)))
    assert np.all(lhs <= np.abs(z - zt) + 1e-12)


def _check_gradients():
    rng = np.random.default_rng(1)
    potentials = [
        QuadraticPotential(np.array([1.0, 4.0, 9.0])),
        QuadraticPlusConvexPotential(np.array([1.0, 2.0, 3.0]), "pseudo_huber", 0.5),
        QuadraticPlusConvexPotential(np.array([1.0, 2.0, 3.0]), "softplus", 0.5),
        TorusCosinePotential(3, 1.0, 1.0, 0.3, resolve_edges("ring", 3)),
    ]
    h = 1e-5
    for pot in potentials:
        x = rng.uniform(-1, 1, pot.dim)
        fd = np.array([(pot.energy(x + h * e) - pot.energy(x - h * e)) / (2 * h) for e in np.eye(pot.dim)])
        grad = pot.gradient(x)
        assert np.linalg.norm(fd - grad) <= 1e-6 * max(1.0, np.linalg.norm(grad)), type(pot).__name__


def _check_flows():
    space = SpaceSpec(kind="euclidean", m=1)
    out = flow(PhasePoint([1.0], [0.0]), np.pi / 2, QuadraticPotential(np.array([1.0])), space, FlowConfig())
    assert np.allclose([out.x[0], out.v[0]], [0.0, -1.0], atol=1e-12)

    torus = SpaceSpec(kind="torus", m=2, ell=1.0)
    pot = TorusCosinePotential(2, 1.0, 1.0, 0.2, resolve_edges("ring", 2))
    cfg = FlowConfig(mode="verlet", step=1e-3)
    y = TorusCoupledState([0.1, 0.6], [0.3, -0.2], [0.2, -0.1], [0.1, 0.05])
    coupled = project_torus_state(coupled_flow_torus(y, 0.37, pot, torus, cfg), 1.0)
    first, second = project_torus_state(y, 1.0)
    for got, start in zip(coupled, (first, second)):
        alone = flow(start, 0.37, pot, torus, cfg)
        gap = minimal_difference(got.x - alone.x, np.zeros(2), 1.0)
        assert np.all(np.abs(gap) < 1e-9) and np.allclose(got.v, alone.v, atol=1e-9)


def _check_coupling():
    assert coupled_velocity([1.0], [1.0], 0.1, 1.0, 1.0)[0] == 2.0
    assert coupled_velocity([1.0], [1.0], 0.5, 1.0, 1.0)[0] == -1.0
    assert coupled_velocity([0.7], [0.0], 0.9, 1.0, 1.0)[0] == 0.7
    rng = np.random.default_rng(2)
    draws, s = 20_000, 1.0
    a = rng.standard_normal((draws, 1))
    u = rng.uniform(size=draws)
    a_tilde = coupled_velocity(a, np.ones((draws, 1)), u, s, 1.0)
    freq = np.mean(a_tilde[:, 0] != a[:, 0] + s)
    p = float(rejection_probability_exact(s))
    assert abs(freq - p) <= 4 * np.sqrt(p * (1 - p) / draws)


def _check_rates():
    assert abs(wah_rate(4 * np.sqrt(5) / 5, 1, 1.0, 0.0).c - np.sqrt(5) / 10) < 1e-12
    params = torus_params(1.0, 60.0, 10, 1.0, 0.0, 0.0)
    assert abs(params.c_A - 6 / 90 * np.exp(-3)) < 1e-12 and not params.cond_lambda_ok
    metric = WahMetric(2.0, 1, np.array([1.0]))
    assert np.isclose(rho_squared_wah([1.0], [1.0], metric), 2.0)
    assert abs(metric.kappa - 2.7836) < 1e-4
    assert np.isclose(f(1.0, 1.0, 2.0), 1 - np.exp(-1))
    dist = torus_distance(np.zeros(3), np.zeros(3), params)
    assert dist.rho == 0.0 and dist.rho_simple == 0.0


def _check_dynamics():
    space = SpaceSpec(kind="euclidean", m=1)
    pot = QuadraticPotential(np.array([1.0]))
    cfg = AndersenConfig(lambda_=1.0, t_end=20.0, record_step=0.5)
    start = PhasePoint([1.0], [0.0])
    one = simulate_andersen(start, pot, space, cfg, replica_rng(7, 0))
    two = simulate_andersen(start, pot, space, cfg, replica_rng(7, 0))
    assert np.array_equal(one.x, two.x) and np.array_equal(one.v, two.v)

    torus = SpaceSpec(kind="torus", m=4, ell=1.0)
    ccfg = CouplingConfig(lambda_=24.0, t_end=2.0, record_step=0.25, kind="mirror", gamma=1.5)
    y0 = TorusCoupledState([0.1, 0.2, 0.3, 0.4], [0.5, -0.5, 1.0, 0.0], np.zeros(4), np.zeros(4))
    traj = simulate_coupling(y0, ZeroPotential(4), torus, ccfg, replica_rng(7, 1))
    assert np.all(traj.blocks[2] == 0.0) and np.all(traj.blocks[3] == 0.0)


CHECKS: dict[str, Callable[[], None]] = {
    "geometry": _check_geometry,
    "potential gradients": _check_gradients,
    "flows": _check_flows,
    "velocity coupling": _check_coupling,
    "rates and metrics": _check_rates,
    "dynamics": _check_dynamics,
}


def run_selftest() -> list[CheckResult]:
    results = []
    for name, check in CHECKS.items():
        try:
            check()
            results.append(CheckResult(name, True))
        except AssertionError as e:
            results.append(CheckResult(name, False, str(e) or "assertion failed"))
        except Exception as e:
            logger.exception("selftest '%s' raised", name)
            results.append(CheckResult(name, False, f"{type(e).__name__}: {e}"))
        logger.info("selftest %-20s %s", name, "ok" if results[-1].ok else "FAILED")
    return results
