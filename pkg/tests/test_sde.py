import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdd.errors import ConfigurationError, InvalidArgument
from pdd.geometry import BoxDomain, FaceKind
from pdd.sde import (DiffusionCoefficients, PathScalars, PathState, RngStream, advance_state,
                     coefficient_time, sample_gaussian_increment, simulate_path, simulate_paths)

BM = DiffusionCoefficients.brownian()
NO_SCALARS = PathScalars()


def test_stream_replays_and_separates():
    a = RngStream(7, (1, 2))
    assert np.array_equal(a.generator().random(5), RngStream(7, (1, 2)).generator().random(5))
    assert not np.array_equal(a.generator().random(5), RngStream(7, (2, 1)).generator().random(5))
    assert not np.array_equal(a.generator().random(5), RngStream(8, (1, 2)).generator().random(5))
    assert a.child(3) == RngStream(7, (1, 2, 3))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 50)), min_size=2, max_size=40,
                unique=True))
def test_stream_keys_do_not_collide(keys):
    words = {tuple(RngStream(1, k).philox_key()) for k in keys}
    assert len(words) == len(keys)


def test_gaussian_increment_moments():
    dz = sample_gaussian_increment(np.random.default_rng(3), 0.04, 2, size=200_000)
    assert dz.shape == (200_000, 2)
    assert np.abs(dz.mean(axis=0)).max() < 5 * 0.2 / math.sqrt(200_000)
    assert dz.var(axis=0) == pytest.approx([0.04, 0.04], rel=0.02)
    assert sample_gaussian_increment(RngStream(1), 0.0, 3).tolist() == [0.0, 0.0, 0.0]
    with pytest.raises(InvalidArgument):
        sample_gaussian_increment(RngStream(1), -1e-3, 1)


def test_coefficient_time_reverses_on_parabolic_only():
    assert coefficient_time(0.25, 1.0) == 0.75
    assert coefficient_time(0.25, math.inf) == 0.0
    assert coefficient_time(0.25, None) == 0.0


def test_advance_state_euler_update():
    st0 = PathState.initial(np.array([[0.0], [1.0]]))
    scalars = PathScalars(c=lambda x, t: -2.0 * np.ones(x.shape[0]), f=lambda x, t: x[:, 0])
    dW = np.array([[0.1], [-0.2]])
    st1 = advance_state(st0, BM, scalars, 0.01, dW)
    assert st1.x[:, 0].tolist() == pytest.approx([0.1, 0.8])
    assert st1.y.tolist() == pytest.approx([0.98, 0.98])
    assert st1.z.tolist() == pytest.approx([0.0, 0.01])
    assert st1.t == pytest.approx(0.01)


def test_weights_follow_discrete_exponential():
    # no exits on a huge box: Y, Z are deterministic Euler products
    box = BoxDomain.interval(-1e6, 1e6)
    scalars = PathScalars(c=lambda x, t: np.full(x.shape[0], -0.5),
                          f=lambda x, t: np.full(x.shape[0], 2.0))
    dt, horizon = 0.01, 1.0
    batch = simulate_paths(np.zeros((4, 1)), horizon, box, BM, scalars, dt, RngStream(5))
    n = round(horizon / dt)
    y_exact = (1 - 0.5 * dt) ** n
    z_exact = 2.0 * dt * sum((1 - 0.5 * dt) ** k for k in range(n))
    assert batch.y == pytest.approx(np.full(4, y_exact), rel=1e-12)
    assert batch.z == pytest.approx(np.full(4, z_exact), rel=1e-12)
    assert np.all(batch.exit_face == -1) and np.all(batch.exit_time == horizon)


def test_gamblers_ruin_probability():
    # P(exit at 1 | start 0.3) = 0.3 for Brownian motion on [0, 1]
    box = BoxDomain.interval(0.0, 1.0)
    n, dt = 20_000, 1e-4
    batch = simulate_paths(np.full((n, 1), 0.3), math.inf, box, BM, NO_SCALARS, dt, RngStream(11))
    assert np.all(batch.absorbed)
    upper = (batch.exit_face == 1).astype(float)
    se = upper.std(ddof=1) / math.sqrt(n)
    # discrete monitoring widens the interval by about 0.58 sqrt(dt) on each side
    assert abs(upper.mean() - 0.3) <= 3 * se + 0.005
    ends = batch.x[:, 0]
    assert set(np.unique(ends)) <= {0.0, 1.0}


def test_mean_exit_time():
    # E[tau] = x (1 - x) for dX = dW on [0, 1]
    box = BoxDomain.interval(0.0, 1.0)
    n, dt = 20_000, 1e-4
    batch = simulate_paths(np.full((n, 1), 0.3), math.inf, box, BM, NO_SCALARS, dt, RngStream(12))
    se = batch.exit_time.std(ddof=1) / math.sqrt(n)
    assert abs(batch.exit_time.mean() - 0.21) <= 3 * se + 0.01


def test_local_time_is_monotone_and_matches_neumann_flux():
    # u(x) = x on [0, 1], u(0) = 0, u'(1) = 1: u(0.5) = E[xi_tau]
    box = BoxDomain.interval(0.0, 1.0, FaceKind.ABSORBING, FaceKind.REFLECTING)
    scalars = PathScalars(psi_r=lambda x, t: np.ones(x.shape[0]))
    n, dt = 5_000, 4e-4
    batch = simulate_paths(np.full((n, 1), 0.5), math.inf, box, BM, scalars, dt, RngStream(13))
    assert batch.xi_monotone
    assert np.all(batch.xi >= 0)
    assert np.all(batch.exit_face == 0)
    assert np.array_equal(batch.z, batch.xi)
    se = batch.z.std(ddof=1) / math.sqrt(n)
    assert abs(batch.z.mean() - 0.5) <= 3 * se + 0.02


def test_final_step_exit_is_stamped_with_horizon():
    box = BoxDomain.interval(0.0, 1.0)
    batch = simulate_paths(np.full((2000, 1), 0.5), 0.05, box, BM, NO_SCALARS, 0.05, RngStream(2))
    assert batch.absorbed.any()
    assert np.all(batch.exit_time <= 0.05)
    assert np.all(batch.exit_time[batch.absorbed] == 0.05)


def test_elliptic_mode_needs_an_absorbing_face():
    box = BoxDomain.interval(0.0, 1.0, FaceKind.REFLECTING, FaceKind.REFLECTING)
    with pytest.raises(ConfigurationError):
        simulate_paths(np.array([[0.5]]), math.inf, box, BM, NO_SCALARS, 1e-3, RngStream(0))


def test_single_path_matches_batch_of_one():
    box = BoxDomain((0.0, 0.0), (1.0, 1.0))
    out = simulate_path([0.4, 0.6], math.inf, box, BM, NO_SCALARS, 1e-3, RngStream(4))
    batch = simulate_paths(np.array([[0.4, 0.6]]), math.inf, box, BM, NO_SCALARS, 1e-3,
                           RngStream(4))
    assert out.exit_time == batch.exit_time[0]
    assert out.terminal_state.x.tolist() == batch.x[0].tolist()
    assert out.exit.kind == FaceKind.ABSORBING
    with pytest.raises(InvalidArgument):
        simulate_path([1.5, 0.5], math.inf, box, BM, NO_SCALARS, 1e-3, RngStream(4))


def test_anisotropic_dispersion_variance():
    sigma = np.array([[2.0, 0.0], [1.0, 1.0]])
    coeffs = DiffusionCoefficients(None, sigma)
    box = BoxDomain((-1e6, -1e6), (1e6, 1e6))
    batch = simulate_paths(np.zeros((40_000, 2)), 1.0, box, coeffs, NO_SCALARS, 0.25, RngStream(9))
    cov = np.cov(batch.x.T)
    assert cov == pytest.approx(sigma @ sigma.T, abs=0.08)


def test_invalid_arguments():
    box = BoxDomain.interval(0.0, 1.0)
    with pytest.raises(InvalidArgument):
        simulate_paths(np.array([[0.5]]), 1.0, box, BM, NO_SCALARS, 0.0, RngStream(0))
    with pytest.raises(InvalidArgument):
        simulate_paths(np.array([[0.5, 0.5]]), 1.0, box, BM, NO_SCALARS, 0.1, RngStream(0))
    with pytest.raises(InvalidArgument):
        simulate_paths(np.array([[0.5]]), 1.0, box, BM, NO_SCALARS, 0.1, 42)
