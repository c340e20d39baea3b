import numpy as np
import pytest
from hypothesis import given, strategies as st

from andersen.coupling import (
    coupled_substitution,
    coupled_velocity,
    rejection_probability_bound,
    rejection_probability_exact,
    simulate_coupling,
    simulate_coupling_replicas,
)
from andersen.dynamics import simulate_andersen, simulate_andersen_replicas
from andersen.errors import ConfigurationError
from andersen.potentials import QuadraticPotential, TorusCosinePotential, ZeroPotential
from andersen.rng import replica_rng, replica_rngs
from andersen.schemas import CouplingConfig, FlowConfig, SpaceSpec
from andersen.states import EuclideanCoupledState, PhasePoint, TorusCoupledState

TORUS1 = SpaceSpec(kind="torus", m=1)
MIRROR = CouplingConfig(lambda_=1.0, kind="mirror", gamma=1.0)
SYNC = CouplingConfig(lambda_=1.0, kind="synchronous")


def test_coupled_velocity_examples():
    assert coupled_velocity([1.0], [1.0], 0.1, 1.0, 1.0) == pytest.approx([2.0])
    assert coupled_velocity([1.0], [1.0], 0.5, 1.0, 1.0) == pytest.approx([-1.0])
    a = np.array([0.3, -2.0, 1.1])
    for u in (1e-12, 0.5, 1 - 1e-12):
        assert np.array_equal(coupled_velocity(a, np.zeros(3), u, 2.0, 1.0), a)


def test_coupled_velocity_large_arguments_do_not_underflow():
    # exp(-0.5 * 1e6) underflows; the log-space test still accepts
    out = coupled_velocity([-1000.0], [1.0], 0.5, 1.0, 1.0)
    assert out == pytest.approx([-999.0])


@given(
    st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    st.floats(1e-9, 1 - 1e-9),
    st.floats(0.0, 3.0),
)
def test_coupled_velocity_branches(a, b, u, gamma):
    a, b = np.array(a), np.array(b)
    out = coupled_velocity(a, b, u, gamma, 1.0)
    shifted = np.allclose(out, a + gamma * b)
    # the reflection preserves the norm and the component orthogonal to b
    reflected = np.isclose(np.linalg.norm(out), np.linalg.norm(a))
    assert shifted or reflected


def test_rejection_probability_examples():
    assert rejection_probability_exact(0.0) == 0.0
    assert rejection_probability_exact(1.0) == pytest.approx(0.3829, abs=1e-4)
    assert rejection_probability_bound(1.0) == pytest.approx(0.3989, abs=1e-4)
    assert rejection_probability_exact(50.0) == pytest.approx(1.0)
    with pytest.raises(ConfigurationError):
        rejection_probability_exact(-1.0)


@pytest.mark.parametrize("s", [0.1, 0.5, 1.0, 2.0])
def test_maximal_coupling_rejection_frequency(s):
    rng = np.random.default_rng(int(10 * s))
    draws = 100_000
    beta, gamma = 1.0, 1.0
    b = np.array([s / (np.sqrt(beta) * gamma), 0.0])
    a = rng.standard_normal((draws, 2)) / np.sqrt(beta)
    u = rng.uniform(size=draws)
    out = coupled_velocity(a, np.broadcast_to(b, a.shape), u, gamma, beta)
    rejected = ~np.all(np.isclose(out, a + gamma * b, rtol=0, atol=1e-12), axis=-1)
    freq = rejected.mean()
    stderr = np.sqrt(freq * (1 - freq) / draws)
    assert abs(freq - rejection_probability_exact(s)) <= 3 * stderr
    assert freq <= rejection_probability_bound(s) + 3 * stderr


@pytest.mark.parametrize("n", [1, 3, 10])
def test_rejected_second_moment_bound(n):
    rng = np.random.default_rng(n)
    draws = 100_000
    beta, gamma = 1.0, 0.7
    b = np.zeros(n)
    b[0] = 0.8
    a = rng.standard_normal((draws, n)) / np.sqrt(beta)
    u = rng.uniform(size=draws)
    out = coupled_velocity(a, np.broadcast_to(b, a.shape), u, gamma, beta)
    rejected = ~np.all(np.isclose(out, a + gamma * b, rtol=0, atol=1e-12), axis=-1)
    sample = np.where(rejected, np.sum(a * a, axis=-1), 0.0)
    stderr = sample.std() / np.sqrt(draws)
    bound = (n + 1) * gamma * np.linalg.norm(b) / np.sqrt(2 * np.pi * beta)
    assert sample.mean() <= bound + 3 * stderr


def test_partner_velocity_is_gaussian():
    rng = np.random.default_rng(1)
    draws = 200_000
    beta = 2.0
    a = rng.standard_normal((draws, 2)) / np.sqrt(beta)
    b = np.broadcast_to([0.4, -0.3], a.shape)
    out = coupled_velocity(a, b, rng.uniform(size=draws), 1.5, beta)
    assert np.allclose(out.mean(axis=0), 0.0, atol=0.01)
    assert np.allclose(np.cov(out.T), np.eye(2) / beta, atol=0.01)


def test_euclidean_substitution_synchronous():
    space = SpaceSpec(m=2, n=2)
    y = EuclideanCoupledState([0, 0, 1, 1], [1, 1, 1, 1], [0, 0, 0, 0], [2, 2, 2, 2])
    out = coupled_substitution(y, 1, [5.0, 6.0], 0.3, SYNC, space)
    assert np.array_equal(out.v, [1, 1, 5, 6])
    assert np.array_equal(out.v_tilde, [2, 2, 5, 6])
    assert np.array_equal(out.x, y.x) and np.array_equal(out.x_tilde, y.x_tilde)


def test_euclidean_substitution_mirror_accept_and_reject():
    space = SpaceSpec(m=1)
    y = EuclideanCoupledState([1.0], [0.0], [0.0], [0.0])
    accepted = coupled_substitution(y, 0, [1.0], 0.1, MIRROR, space)
    assert accepted.v == pytest.approx([1.0]) and accepted.v_tilde == pytest.approx([2.0])
    rejected = coupled_substitution(y, 0, [1.0], 0.5, MIRROR, space)
    assert rejected.v_tilde == pytest.approx([-1.0])


def test_torus_substitution_cases():
    config = CouplingConfig(lambda_=1.0, kind="mirror", gamma=2.0)
    y = TorusCoupledState([0.1], [0.0], [0.2], [0.5])
    out = coupled_substitution(y, 0, [0.05], 1e-9, config, TORUS1)
    assert out.v == pytest.approx([0.05])
    # accepted shift: w = -gamma * zeta
    assert out.w == pytest.approx([-0.4])
    assert np.array_equal(out.z, y.z)

    coincident = TorusCoupledState([0.1], [0.3], [1.0], [0.5])
    assert coupled_substitution(coincident, 0, [0.7], 0.9, config, TORUS1).w == pytest.approx([0.0])

    sync = coupled_substitution(y, 0, [0.7], 0.9, CouplingConfig(lambda_=1.0, kind="synchronous"), TORUS1)
    assert np.array_equal(sync.w, [0.0])


def test_substitution_errors():
    y = TorusCoupledState([0.1], [0.0], [0.2], [0.5])
    with pytest.raises(ConfigurationError):
        coupled_substitution(y, 1, [0.0], 0.5, MIRROR, TORUS1)
    with pytest.raises(ConfigurationError):
        coupled_substitution(y, 0, [0.0, 1.0], 0.5, MIRROR, TORUS1)
    with pytest.raises(ConfigurationError):
        coupled_substitution(y, 0, [0.0], 0.5, MIRROR, SpaceSpec(m=1))


def test_synchronous_requires_zero_gamma():
    with pytest.raises(ValueError):
        CouplingConfig(lambda_=1.0, kind="synchronous", gamma=0.5)


@pytest.mark.parametrize("torus", [False, True])
def test_identical_copies_stay_identical(torus):
    config = CouplingConfig(lambda_=4.0, t_end=3.0, kind="mirror", gamma=1.5, flow=FlowConfig(mode="verlet", step=1e-3))
    if torus:
        space = SpaceSpec(kind="torus", m=3)
        pot = TorusCosinePotential(3, 1.0, 0.5, 0.1, [(0, 1), (1, 2)])
        y0 = TorusCoupledState([0.1, 0.4, 0.9], [0.5, -0.5, 0.2], [0, 0, 0], [0, 0, 0])
    else:
        space = SpaceSpec(m=3)
        pot = QuadraticPotential(np.array([1.0, 2.0, 3.0]))
        y0 = EuclideanCoupledState([0.1, 0.4, 0.9], [0.5, -0.5, 0.2], [0.1, 0.4, 0.9], [0.5, -0.5, 0.2])
    traj = simulate_coupling(y0, pot, space, config, replica_rng(3, 0))
    if torus:
        assert np.all(traj.blocks[2] == 0.0) and np.all(traj.blocks[3] == 0.0)
    else:
        assert np.array_equal(traj.blocks[0], traj.blocks[2])
        assert np.array_equal(traj.blocks[1], traj.blocks[3])


def test_free_torus_coupling_structure():
    config = CouplingConfig(lambda_=2.0, t_end=4.0, kind="mirror", gamma=1.0, record_step=0.01)
    y0 = TorusCoupledState([0.0], [0.3], [0.5], [0.0])
    traj = simulate_coupling(y0, ZeroPotential(1), TORUS1, config, replica_rng(6, 0))
    z, w = traj.blocks[2][:, 0], traj.blocks[3][:, 0]
    dz = np.diff(z)
    dt = np.diff(traj.times)
    # away from jumps z moves linearly with slope w
    steady = np.diff(w) == 0.0
    assert steady.any()
    assert np.allclose(dz[steady], (w[:-1] * dt)[steady], atol=1e-12)


def test_first_copy_matches_andersen_with_same_seed():
    pot = QuadraticPotential(np.array([1.0, 2.0]))
    space = SpaceSpec(m=2)
    config = CouplingConfig(lambda_=2.0, t_end=3.0, kind="mirror", gamma=0.8)
    y0 = EuclideanCoupledState([1.0, 0.0], [0.0, 1.0], [-1.0, 0.5], [0.2, 0.0])
    coupled = simulate_coupling(y0, pot, space, config, replica_rng(10, 2))
    single = simulate_andersen(PhasePoint(y0.x, y0.v), pot, space, config, replica_rng(10, 2))
    assert np.array_equal(coupled.blocks[0], single.x)
    assert np.array_equal(coupled.blocks[1], single.v)


def test_torus_first_copy_matches_andersen_with_same_seed():
    space = SpaceSpec(kind="torus", m=4)
    config = CouplingConfig(lambda_=8.0, t_end=2.0, kind="mirror", gamma=1.0)
    y0 = TorusCoupledState([0.1, 0.2, 0.3, 0.4], [1.0, -1.0, 0.5, 0.0], [0.5] * 4, [0.0] * 4)
    coupled = simulate_coupling(y0, ZeroPotential(4), space, config, replica_rng(1, 1))
    single = simulate_andersen(PhasePoint(y0.x, y0.v), ZeroPotential(4), space, config, replica_rng(1, 1))
    assert np.allclose(coupled.blocks[0], single.x, rtol=0, atol=1e-12)
    assert np.array_equal(coupled.blocks[1], single.v)


def test_coupling_marginals_match_andersen():
    replicas = 10_000
    pot = QuadraticPotential(np.array([1.0]))
    space = SpaceSpec(m=1)
    config = CouplingConfig(lambda_=1.0, t_end=2.0, kind="mirror", gamma=1.0, record_times=[2.0])
    x0 = np.full((replicas, 1), 1.5)
    y0 = (x0, np.zeros_like(x0), -x0, np.zeros_like(x0))
    coupled = simulate_coupling_replicas(y0, pot, space, config, replica_rngs(100, range(replicas)))
    single = simulate_andersen_replicas(x0, np.zeros_like(x0), pot, space, config, replica_rngs(200, range(replicas)))

    def check(a, b):
        diff = a.mean() - b.mean()
        stderr = np.sqrt(a.var() / a.size + b.var() / b.size)
        assert abs(diff) <= 3 * stderr

    first_x, first_v = coupled.values[:, 0, 0, 0], coupled.values[:, 0, 1, 0]
    ref_x, ref_v = single.values[:, 0, 0, 0], single.values[:, 0, 1, 0]
    check(first_x, ref_x)
    check(first_v, ref_v)
    check(first_x**2, ref_x**2)
    check(first_v**2, ref_v**2)
    # the second copy is an Andersen process started from -x0
    second_x = coupled.values[:, 0, 2, 0]
    check(-second_x, ref_x)
    check(second_x**2, ref_x**2)
