import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twinwatch.errors import DimensionError, NotPositiveDefiniteError, UnobservableError
from twinwatch.estimators import backsolve_hidden_state, batch_map_oracle, propagate_mean_openloop
from twinwatch.kalman import FilterState, kf_step
from twinwatch.matgauss import Gaussian
from twinwatch.statespace import LinearDiscreteSystem, simulate, step

from conftest import random_spd, random_system, rel_err


def two_state(a21, a22, b21, b22, a11=0.9, a12=0.1):
    return LinearDiscreteSystem(
        [[a11, a12], [a21, a22]], [[0.3, 0.0], [b21, b22]], [[0.0, 1.0]], np.zeros((2, 2)), [[0.0]]
    )


def test_openloop_zero_variance_equals_simulation(rng):
    sys = random_system(rng, 2, 1)
    inputs = rng.standard_normal((10, 2))
    means = propagate_mean_openloop(Gaussian([1.0, 2.0], np.zeros((2, 2))), sys, inputs)
    assert np.array_equal(np.array(means), simulate(sys, [1.0, 2.0], inputs).states)


def test_openloop_identity_dynamics():
    sys = LinearDiscreteSystem(np.eye(2), np.zeros((2, 1)), np.eye(2), np.eye(2), np.eye(2))
    means = propagate_mean_openloop(Gaussian([3.0, 4.0], np.eye(2)), sys, [[1.0]] * 5)
    assert all(m.tolist() == [3.0, 4.0] for m in means)


def test_openloop_mean_is_pushforward_mean(rng):
    # Monte Carlo pushforward of the belief through the deterministic map
    sys = random_system(rng, 2, 1)
    prior = Gaussian([1.0, -1.0], [[1.0, 0.2], [0.2, 0.5]])
    inputs = rng.standard_normal((4, 2))
    xs = rng.multivariate_normal(prior.mean, prior.covariance, size=200_000)
    for u in inputs:
        xs = xs @ sys.A.T + sys.B @ u
    mean = propagate_mean_openloop(prior, sys, inputs)[-1]
    se = xs.std(axis=0) / np.sqrt(len(xs))
    assert np.all(np.abs(xs.mean(axis=0) - mean) < 5 * se)


def test_backsolve_worked_example():
    sys = two_state(0.2, 0.9, 0.0, 0.05)
    x0, x1 = backsolve_hidden_state(sys, 20.0, [0.0, 20.0], 20.0)
    assert x0[0] == pytest.approx(5.0, abs=1e-12)
    assert x0[1] == 20.0
    assert x1[1] == pytest.approx(20.0, abs=1e-12)


def test_backsolve_direct_observation():
    sys = two_state(1.0, 0.0, 0.0, 0.0)
    x0, _ = backsolve_hidden_state(sys, 3.0, [1.0, 21.0], 42.5)
    assert x0[0] == 42.5


def test_backsolve_unobservable():
    with pytest.raises(UnobservableError):
        backsolve_hidden_state(two_state(0.0, 0.9, 0.0, 0.05), 20.0, [0.0, 20.0], 20.0)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-5, 5).filter(lambda a: abs(a) > 1e-3),
    st.floats(-2, 2),
    st.floats(-2, 2),
    st.floats(-2, 2),
    st.floats(-50, 50),
    st.floats(-50, 50),
    st.sampled_from([0.0, 1.0]),
    st.floats(-10, 40),
)
def test_backsolve_round_trip(a21, a22, b21, b22, th0, tb0, heater, troom):
    sys = two_state(a21, a22, b21, b22)
    u1 = np.array([heater, troom])
    x0 = np.array([th0, tb0])
    y1 = (sys.C @ step(sys, x0, u1))[0]
    rec0, rec1 = backsolve_hidden_state(sys, tb0, u1, y1)
    scale = max(1.0, abs(th0), abs(y1) / abs(a21))
    assert abs(rec0[0] - th0) <= 1e-12 * scale * max(1.0, 1 / abs(a21))
    assert rec1[1] == pytest.approx(y1, abs=1e-12 * max(1.0, abs(y1)))


def test_map_single_step_matches_hand_update():
    # predicted belief N(3, 1): prior N(3, 0.5) pushed through A=1 with R=0.5
    sys = LinearDiscreteSystem([[1.0]], [[0.0]], [[1.0]], [[0.5]], [[1.0]])
    _, final = batch_map_oracle(sys, Gaussian([3.0], [[0.5]]), [[0.0]], [[4.0]])
    assert final.mean[0] == pytest.approx(3.5, abs=1e-12)
    assert final.covariance[0, 0] == pytest.approx(0.5, abs=1e-12)
    # prior N(3, 1) with R regularized to 1e-10
    sys = LinearDiscreteSystem([[1.0]], [[0.0]], [[1.0]], [[1e-10]], [[1.0]])
    _, final = batch_map_oracle(sys, Gaussian([3.0], [[1.0]]), [[0.0]], [[4.0]])
    assert final.mean[0] == pytest.approx(3.5, abs=1e-9)
    assert final.covariance[0, 0] == pytest.approx(0.5, abs=1e-9)


def test_map_pins_measurement_when_noise_vanishes(rng):
    base = random_system(rng, 2, 1)
    sys = LinearDiscreteSystem(base.A, base.B, base.C, base.R, [[1e-12]])
    us = rng.standard_normal((5, 2))
    ys = rng.standard_normal((5, 1))
    path, _ = batch_map_oracle(sys, Gaussian([0, 0], np.eye(2)), us, ys)
    for x, y in zip(path[1:], ys):
        assert abs((sys.C @ x)[0] - y[0]) < 1e-5


def test_map_random_two_state_ten_steps(rng):
    sys = random_system(rng, 2, 1, m=2)
    prior = Gaussian(rng.standard_normal(2), random_spd(rng, 2))
    us = rng.standard_normal((10, 2))
    ys = rng.standard_normal((10, 1))
    st = FilterState.from_gaussian(prior)
    for u, y in zip(us, ys):
        st, _ = kf_step(st, sys, u, y)
    _, final = batch_map_oracle(sys, prior, us, ys)
    assert rel_err(st.mean, final.mean) < 1e-8


def test_map_objective_is_minimized(rng):
    # perturbing the MAP path never lowers the negative log posterior
    sys = random_system(rng, 2, 1, m=2)
    prior = Gaussian([0.5, -0.5], random_spd(rng, 2))
    us, ys = rng.standard_normal((4, 2)), rng.standard_normal((4, 1))
    path, _ = batch_map_oracle(sys, prior, us, ys)
    Ri, Qi, Pi = (np.linalg.inv(m) for m in (sys.R, sys.Q, prior.covariance))

    def cost(xs):
        c = (xs[0] - prior.mean) @ Pi @ (xs[0] - prior.mean)
        for j in range(1, len(xs)):
            r = xs[j] - sys.A @ xs[j - 1] - sys.B @ us[j - 1]
            e = ys[j - 1] - sys.C @ xs[j]
            c += r @ Ri @ r + e @ Qi @ e
        return 0.5 * c

    best = cost(path)
    for _ in range(50):
        assert cost([x + 1e-3 * rng.standard_normal(2) for x in path]) > best


def test_map_errors(rng):
    sys = random_system(rng, 2, 1)
    with pytest.raises(ValueError):
        batch_map_oracle(sys, Gaussian([0, 0], np.eye(2)), [], [])
    with pytest.raises(DimensionError):
        batch_map_oracle(sys, Gaussian([0], [[1]]), [[0, 0]], [[0]])
    singular = LinearDiscreteSystem(sys.A, sys.B, sys.C, np.zeros((2, 2)), sys.Q)
    with pytest.raises(NotPositiveDefiniteError):
        batch_map_oracle(singular, Gaussian([0, 0], np.eye(2)), [[0, 0]], [[0]])
