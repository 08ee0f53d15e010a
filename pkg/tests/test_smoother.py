import numpy as np
import pytest

from radar_inertial.factors import ConstantOffsetFactor, ImuFactor, LinearPrior, RadarFactor
from radar_inertial.pipeline import Odometry, run_odometry
from radar_inertial.scenarios import agile_config, agile_dataset
from radar_inertial.smoother import FactorGraphWindow, SolverConfig, schur_prior
from radar_inertial.state import TANGENT_DIM, Extrinsics, GravityModel, NavState, state_local

from conftest import dense_marginal, toy_window

D = TANGENT_DIM


@pytest.mark.parametrize("seed", range(10))
def test_schur_prior_matches_dense_marginalization(seed):
    rng = np.random.default_rng(seed)
    w = toy_window(rng, n_states=2)
    H, g, _ = w.linear_system()
    prior = schur_prior(1, w.states[1], H, g)
    Hd, gd = dense_marginal(H, g, D)
    scale = np.abs(Hd).max()
    np.testing.assert_allclose(prior.S.T @ prior.S, Hd, atol=1e-12 * scale)
    np.testing.assert_allclose(prior.S.T @ prior.r0, gd, atol=1e-12 * max(1.0, np.abs(gd).max()))


@pytest.mark.parametrize("seed", range(5))
def test_window_marginalization_matches_dense(seed):
    rng = np.random.default_rng(100 + seed)
    w = toy_window(rng, n_states=3)
    H, g, _ = w.linear_system()
    Hd, gd = dense_marginal(H, g, D)
    w._marginalize_oldest(None)
    assert w.order == [1, 2]
    H2, g2, _ = w.linear_system()
    scale = np.abs(Hd).max()
    np.testing.assert_allclose(H2, Hd, atol=1e-12 * scale)
    np.testing.assert_allclose(g2, gd, atol=1e-12 * max(1.0, np.abs(gd).max()))
    # same Gauss-Newton step on the survivors
    full = np.linalg.solve(H, -g)[D:]
    np.testing.assert_allclose(np.linalg.solve(H2, -g2), full, rtol=1e-8, atol=1e-12)


def test_marginal_covariance_is_preserved():
    rng = np.random.default_rng(3)
    w = toy_window(rng, n_states=3)
    H, g, _ = w.linear_system()
    cov = np.linalg.inv(H)[D:, D:]
    w._marginalize_oldest(None)
    H2, _, _ = w.linear_system()
    np.testing.assert_allclose(np.linalg.inv(H2), cov, rtol=1e-8, atol=1e-14)


def test_linear_toy_solves_in_one_step():
    rng = np.random.default_rng(5)
    w = toy_window(rng)
    H, g, _ = w.linear_system()
    expected = np.linalg.solve(H, -g)
    res = w.optimize(SolverConfig(lambda_init=1e-12, max_iterations=5))
    got = np.concatenate([state_local(NavState(), w.states[k]) for k in w.order])
    np.testing.assert_allclose(got[3:], expected[3:], rtol=1e-6, atol=1e-9)
    assert all(b <= a for a, b in zip(res.costs, res.costs[1:]))


def test_window_size_and_structure():
    ds = agile_dataset(0.0, noisy=False, duration=4.0)
    odo = Odometry(agile_config())
    imu = iter(ds.imu)
    pending = next(imu)
    keyframes = []
    for scan in ds.radar:
        while pending is not None and pending.timestamp <= scan.timestamp:
            odo.add_imu(pending)
            pending = next(imu, None)
        if odo.add_radar(scan):
            keyframes.append(scan.timestamp)
            if len(keyframes) == 1:
                w = odo.window
                assert len(w) == 1 and w.count(LinearPrior) == 1 and w.count(ImuFactor) == 0
            assert odo.window.check_structure()
    assert len(keyframes) >= 20
    assert 10 <= len(odo.window) <= 11
    assert odo.window.span <= agile_config().solver.lag + 1e-9
    assert odo.window.count(ImuFactor) == len(odo.window) - 1
    assert odo.window.count(ConstantOffsetFactor) == len(odo.window) - 1
    assert odo.window.count(LinearPrior) == 1
    assert odo.window.count(RadarFactor) <= len(odo.window)


def test_accepted_costs_do_not_increase():
    ds = agile_dataset(0.0, noisy=True, duration=7.0)
    res = run_odometry(agile_config(), ds.imu, ds.radar)
    assert res.accepted_scans > 0
    assert max(res.iterations) <= agile_config().solver.max_iterations


def test_keyframe_must_advance():
    from radar_inertial.errors import NonMonotonicTime
    from radar_inertial.preintegration import PreintegratedImu
    from radar_inertial.state import ImuSample

    w = FactorGraphWindow(GravityModel(), Extrinsics())
    s = ImuSample(1.0, np.zeros(3), [0, 0, 9.81])
    w.add_first_state(NavState(timestamp=1.0), np.ones(D), s)
    with pytest.raises(NonMonotonicTime):
        w.add_keyframe(None, PreintegratedImu(s), s, timestamp=1.0)
    with pytest.raises(ValueError):
        w.add_first_state(NavState(), np.ones(D), s)


def test_solver_config_validates():
    with pytest.raises(ValueError):
        SolverConfig(lag=0.0)
