import time

import numpy as np
import pytest

from radar_inertial.geometry import so3_exp
from radar_inertial.pipeline import freeze_offset_mode, iterative_offset_refinement, run_odometry
from radar_inertial.scenarios import SWEEP_OFFSETS, agile_config, agile_dataset
from radar_inertial.factors import LinearPrior
from radar_inertial.smoother import FactorGraphWindow
from radar_inertial.state import TANGENT_DIM, Extrinsics, GravityModel, NavState, state_local, state_retract


def random_state(rng, t=0.0):
    return NavState(R=so3_exp(rng.normal(size=3)), p=rng.normal(size=3), v=rng.normal(size=3),
                    bg=0.01 * rng.normal(size=3), ba=0.1 * rng.normal(size=3),
                    t_offset=0.01 * rng.normal(), timestamp=t)


def numeric_jacobian(f, x, h=1e-6):
    """Central differences of ``f`` w.r.t. the state tangent of ``x``."""
    r0 = np.atleast_1d(f(x))
    J = np.zeros((len(r0), TANGENT_DIM))
    for k in range(TANGENT_DIM):
        d = np.zeros(TANGENT_DIM)
        d[k] = h
        J[:, k] = (np.atleast_1d(f(state_retract(x, d))) - np.atleast_1d(f(state_retract(x, -d)))) / (2 * h)
    return J


class Runs:
    """Expensive end-to-end runs, computed once per session."""

    def __init__(self):
        self._cache = {}

    def _get(self, key, fn):
        if key not in self._cache:
            t0 = time.perf_counter()
            value = fn()
            self._cache[key] = (value, time.perf_counter() - t0)
        return self._cache[key][0]

    def seconds(self, key):
        return self._cache[key][1]

    def dataset(self, offset=0.0, noisy=True):
        return self._get(("data", offset, noisy), lambda: agile_dataset(offset, noisy))

    def run(self, offset=0.0, noisy=True, frozen=False):
        cfg = freeze_offset_mode(agile_config()) if frozen else agile_config()

        def go():
            base = self.dataset(0.0, noisy)
            radar = [s.shifted(offset) for s in base.radar]
            return run_odometry(cfg, base.imu, radar)

        return self._get(("run", offset, noisy, frozen), go)

    def sweep(self):
        def go():
            return [self.run(off).converged_offset(agile_config().converge_window) for off in SWEEP_OFFSETS]

        return self._get("sweep", go)

    def refinement(self, offset=0.1):
        def go():
            ds = self.dataset(offset)
            return iterative_offset_refinement(agile_config(), ds.imu, ds.radar, max_iters=3)

        return self._get(("refine", offset), go)


@pytest.fixture(scope="session")
def runs():
    return Runs()


def random_imu_signal(rng):
    """Smooth body rate and specific force, as callables of time."""
    w0, w1 = rng.normal(0, 0.5, 3), rng.normal(0, 0.5, 3)
    a0, a1 = rng.normal(0, 2.0, 3) + [0, 0, 9.81], rng.normal(0, 2.0, 3)
    fw, fa = rng.uniform(0.2, 2.0, 3), rng.uniform(0.2, 2.0, 3)

    def gyro(t):
        return w0 + w1 * np.sin(2 * np.pi * fw * t)

    def accel(t):
        return a0 + a1 * np.cos(2 * np.pi * fa * t)

    return gyro, accel


def direct_integration(x0, gyro, accel, duration, dt, g):
    """Reference strapdown integration with exact midpoint signal values."""
    R, p, v = x0.R.copy(), x0.p.copy(), x0.v.copy()
    n = int(round(duration / dt))
    for k in range(n):
        t = x0.timestamp + k * dt
        tm = t + 0.5 * dt
        R_mid = R @ so3_exp(gyro(tm) * 0.5 * dt)
        acc = R_mid @ accel(tm) + g
        p = p + v * dt + 0.5 * acc * dt * dt
        v = v + acc * dt
        R = R @ so3_exp(gyro(tm) * dt)
    return R, p, v


D = TANGENT_DIM


class LinearFactor:
    """Test-only Gaussian factor ``sum_k A_k local(base_k, x_k) + c``."""

    robust = False

    def __init__(self, keys, bases, A, c):
        self.keys = tuple(keys)
        self.bases = bases
        self.A = A
        self.c = c

    def error(self, states):
        return sum(A @ state_local(b, states[k]) for k, b, A in zip(self.keys, self.bases, self.A)) + self.c

    def linearize(self, states):
        # exact at the base point, where the right Jacobian is the identity
        return self.error(states), list(zip(self.keys, self.A))


def toy_window(rng, n_states=3, n_factors=6):
    w = FactorGraphWindow(GravityModel(), Extrinsics())
    base = NavState()
    for k in range(n_states):
        w.states[k] = base.replace(timestamp=0.1 * k)
        w.order.append(k)
        w.last_imu[k] = None
    w._next_key = n_states
    w.factors.append(LinearPrior(0, base, rng.normal(size=(D, D)), rng.normal(size=D)))
    for _ in range(n_factors):
        # chain topology, as in the smoother: the dropped state only links to its successor
        a = int(rng.integers(n_states - 1))
        b = a + 1
        A = [rng.normal(size=(8, D)), rng.normal(size=(8, D))]
        w.factors.append(LinearFactor((a, b), (base, base), A, rng.normal(size=8)))
    for k in range(n_states - 1):
        A = [rng.normal(size=(D, D)), rng.normal(size=(D, D))]
        w.factors.append(LinearFactor((k, k + 1), (base, base), A, rng.normal(size=D)))
    return w


def dense_marginal(H, g, n_drop):
    m, k = slice(0, n_drop), slice(n_drop, None)
    Hmm_inv = np.linalg.inv(H[m, m])
    return H[k, k] - H[k, m] @ Hmm_inv @ H[m, k], g[k] - H[k, m] @ Hmm_inv @ g[m]
