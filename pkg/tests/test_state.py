import numpy as np
import pytest

from radar_inertial.state import (
    OFF,
    TANGENT_DIM,
    Extrinsics,
    GravityModel,
    ImuSample,
    NavState,
    RadarScan,
    RadarTarget,
    state_local,
    state_retract,
)

from conftest import random_state


def test_defaults():
    x = NavState()
    np.testing.assert_array_equal(x.R, np.eye(3))
    assert x.t_offset == 0.0
    assert x.is_sane()
    np.testing.assert_array_equal(GravityModel().g, [0, 0, -9.81])


def test_r_iw_is_transpose():
    x = random_state(np.random.default_rng(0))
    np.testing.assert_array_equal(x.R_iw, x.R.T)


@pytest.mark.parametrize("seed", range(5))
def test_retract_local_round_trip(seed):
    rng = np.random.default_rng(seed)
    x = random_state(rng)
    d = 0.3 * rng.normal(size=TANGENT_DIM)
    y = state_retract(x, d)
    np.testing.assert_allclose(state_local(x, y), d, atol=1e-12)
    assert y.timestamp == x.timestamp


def test_offset_is_additive():
    x = NavState(t_offset=0.01)
    d = np.zeros(TANGENT_DIM)
    d[OFF] = 0.005
    assert state_retract(x, d).t_offset == pytest.approx(0.015)


def test_insane_offset():
    assert not NavState(t_offset=2.0).is_sane()


def test_shifted_samples():
    s = ImuSample(1.0, [0, 0, 0], [0, 0, 9.81])
    assert s.shifted(0.5).timestamp == 1.5
    scan = RadarScan(2.0, (RadarTarget(np.array([1.0, 0, 0]), -0.5, 10.0),))
    assert scan.shifted(-0.1).timestamp == pytest.approx(1.9)
    assert scan.directions().shape == (1, 3)
    assert RadarScan(0.0).directions().shape == (0, 3)


def test_extrinsics_coerce():
    e = Extrinsics(np.eye(3), (0.1, 0, 0))
    assert e.t_ri.shape == (3,)
