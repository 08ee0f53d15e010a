"""On-manifold IMU preintegration between two keyframes.

Deltas are integrated with the midpoint rule on consecutive samples, the
9x9 covariance of (dtheta, dv, dp) with a first-order Euler step. Bias
Jacobians allow first-order correction of the deltas when the bias estimate
moves away from the linearization point; past ``RELINEARIZE_THRESHOLD`` the
block is re-integrated from its buffered samples.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ExcessiveGap, NonMonotonicTime
from .geometry import right_jacobian, right_jacobian_inv, skew, so3_exp, so3_log
from .state import BA, BG, NavState, POS, ROT, VEL

MAX_GAP = 0.1
RELINEARIZE_THRESHOLD = 0.02

# residual block order
E_R = slice(0, 3)
E_P = slice(3, 6)
E_V = slice(6, 9)
E_BG = slice(9, 12)
E_BA = slice(12, 15)

_I3 = np.eye(3)


@dataclass(frozen=True)
class ImuNoise:
    """Continuous-time noise densities.

    gyro_noise [rad/s/sqrt(Hz)], accel_noise [m/s^2/sqrt(Hz)],
    gyro_walk [rad/s^2/sqrt(Hz)], accel_walk [m/s^3/sqrt(Hz)].
    """

    gyro_noise: float = 1.7e-4
    accel_noise: float = 2e-3
    gyro_walk: float = 2e-5
    accel_walk: float = 3e-3


class PreintegratedImu:
    """Accumulator for the relative motion between two keyframes.

    ``start`` is the IMU sample valid at the first keyframe; every call to
    :meth:`integrate` extends the block by one interval ending at the given
    sample.
    """

    def __init__(self, start, bg=None, ba=None, noise=None, track_covariance=True):
        self.start = start
        self.noise = noise or ImuNoise()
        self.bg0 = np.zeros(3) if bg is None else np.array(bg, dtype=float)
        self.ba0 = np.zeros(3) if ba is None else np.array(ba, dtype=float)
        self.track_covariance = track_covariance
        self.samples = []
        self._reset()

    def _reset(self):
        self.dR = np.eye(3)
        self.dp = np.zeros(3)
        self.dv = np.zeros(3)
        self.dt = 0.0
        self.J_R_bg = np.zeros((3, 3))
        self.J_v_bg = np.zeros((3, 3))
        self.J_v_ba = np.zeros((3, 3))
        self.J_p_bg = np.zeros((3, 3))
        self.J_p_ba = np.zeros((3, 3))
        self.cov = np.zeros((9, 9))
        self.last = self.start
        self._info = None

    @property
    def end_time(self):
        return self.start.timestamp + self.dt

    def integrate(self, sample, dt):
        if not dt > 0.0:
            raise NonMonotonicTime(f"non-positive IMU interval {dt!r} at t={sample.timestamp}")
        if dt >= MAX_GAP:
            raise ExcessiveGap(f"IMU gap of {dt:.4f} s at t={sample.timestamp}")
        self.samples.append((sample, dt))
        self._step(self.last, sample, dt)
        self.last = sample
        return self

    def _step(self, s0, s1, dt):
        w = 0.5 * (s0.gyro + s1.gyro) - self.bg0
        a0 = s0.accel - self.ba0
        a1 = s1.accel - self.ba0
        a = 0.5 * (a0 + a1)

        dR_inc = so3_exp(w * dt)
        dR_new = self.dR @ dR_inc
        acc = 0.5 * (self.dR @ a0 + dR_new @ a1)

        # covariance and bias Jacobians use the pre-update rotation
        Jr = right_jacobian(w * dt)
        Ra = self.dR @ skew(a)
        dt2 = dt * dt
        if not self.track_covariance:
            self.dp = self.dp + self.dv * dt + 0.5 * acc * dt2
            self.dv = self.dv + acc * dt
            self.dR = dR_new
            self.dt += dt
            return

        A = np.eye(9)
        A[0:3, 0:3] = dR_inc.T
        A[3:6, 0:3] = -Ra * dt
        A[6:9, 0:3] = -0.5 * Ra * dt2
        A[6:9, 3:6] = _I3 * dt
        Bg = np.zeros((9, 3))
        Bg[0:3] = Jr * dt
        Ba = np.zeros((9, 3))
        Ba[3:6] = self.dR * dt
        Ba[6:9] = 0.5 * self.dR * dt2
        qg = self.noise.gyro_noise ** 2 / dt
        qa = self.noise.accel_noise ** 2 / dt
        self.cov = A @ self.cov @ A.T + qg * (Bg @ Bg.T) + qa * (Ba @ Ba.T)

        self.J_p_ba += self.J_v_ba * dt - 0.5 * self.dR * dt2
        self.J_p_bg += self.J_v_bg * dt - 0.5 * Ra @ self.J_R_bg * dt2
        self.J_v_ba -= self.dR * dt
        self.J_v_bg -= Ra @ self.J_R_bg * dt
        self.J_R_bg = dR_inc.T @ self.J_R_bg - Jr * dt

        self.dp = self.dp + self.dv * dt + 0.5 * acc * dt2
        self.dv = self.dv + acc * dt
        self.dR = dR_new
        self.dt += dt
        self._info = None

    def needs_relinearization(self, bg, ba):
        return (np.linalg.norm(bg - self.bg0) > RELINEARIZE_THRESHOLD
                or np.linalg.norm(ba - self.ba0) > RELINEARIZE_THRESHOLD)

    def reintegrate(self, bg, ba):
        """Re-run the buffered samples about a new bias linearization point."""
        self.bg0 = np.array(bg, dtype=float)
        self.ba0 = np.array(ba, dtype=float)
        samples = self.samples
        self._reset()
        for s, dt in samples:
            self._step(self.last, s, dt)
            self.last = s
        return self

    def copy(self):
        other = PreintegratedImu(self.start, self.bg0, self.ba0, self.noise, self.track_covariance)
        other.samples = list(self.samples)
        for name in ("dR", "dp", "dv", "J_R_bg", "J_v_bg", "J_v_ba", "J_p_bg", "J_p_ba", "cov"):
            setattr(other, name, getattr(self, name).copy())
        other.dt = self.dt
        other.last = self.last
        return other

    # -- bias-corrected deltas ------------------------------------------------

    def corrected(self, bg, ba):
        dbg = bg - self.bg0
        dba = ba - self.ba0
        dR = self.dR @ so3_exp(self.J_R_bg @ dbg)
        dv = self.dv + self.J_v_bg @ dbg + self.J_v_ba @ dba
        dp = self.dp + self.J_p_bg @ dbg + self.J_p_ba @ dba
        return dR, dp, dv

    def covariance15(self):
        """Residual covariance in [e_R, e_p, e_v, e_bg, e_ba] order."""
        order = [0, 1, 2, 6, 7, 8, 3, 4, 5]
        C = np.zeros((15, 15))
        C[:9, :9] = self.cov[np.ix_(order, order)]
        dt = max(self.dt, 1e-9)
        C[9:12, 9:12] = _I3 * self.noise.gyro_walk ** 2 * dt
        C[12:15, 12:15] = _I3 * self.noise.accel_walk ** 2 * dt
        return C

    def sqrt_information(self):
        """Upper-triangular ``L`` with ``L.T @ L`` the inverse covariance."""
        if self._info is None:
            C = self.covariance15()
            C = 0.5 * (C + C.T)
            try:
                Lc = np.linalg.cholesky(C)
            except np.linalg.LinAlgError:
                # jitter scaled to the smallest block so it never dominates it
                Lc = np.linalg.cholesky(C + np.eye(15) * 1e-9 * max(np.diag(C).min(), 1e-30))
            self._info = np.linalg.inv(Lc)
        return self._info

    # -- factor interface --------------------------------------------------------

    def residual(self, xi, xj, gravity):
        return self.evaluate(xi, xj, gravity, jacobians=False)[0]

    def evaluate(self, xi, xj, gravity, jacobians=True):
        """Unwhitened 15-residual and its Jacobians w.r.t. both tangents."""
        g = gravity.g
        T = self.dt
        dR, dp, dv = self.corrected(xi.bg, xi.ba)
        RiT = xi.R.T
        dvel = xj.v - xi.v - g * T
        dpos = xj.p - xi.p - xi.v * T - 0.5 * g * T * T

        r = np.empty(15)
        eR_mat = dR.T @ RiT @ xj.R
        eR = so3_log(eR_mat)
        r[E_R] = eR
        r[E_P] = RiT @ dpos - dp
        r[E_V] = RiT @ dvel - dv
        r[E_BG] = xj.bg - xi.bg
        r[E_BA] = xj.ba - xi.ba
        if not jacobians:
            return r, None, None

        Ji = np.zeros((15, 16))
        Jj = np.zeros((15, 16))
        Jr_inv = right_jacobian_inv(eR)
        Ji[E_R, ROT] = -Jr_inv @ xj.R.T @ xi.R
        Jj[E_R, ROT] = Jr_inv
        dbg = xi.bg - self.bg0
        Ji[E_R, BG] = -Jr_inv @ eR_mat.T @ right_jacobian(self.J_R_bg @ dbg) @ self.J_R_bg

        Ji[E_P, ROT] = skew(RiT @ dpos)
        Ji[E_P, POS] = -RiT
        Jj[E_P, POS] = RiT
        Ji[E_P, VEL] = -RiT * T
        Ji[E_P, BG] = -self.J_p_bg
        Ji[E_P, BA] = -self.J_p_ba

        Ji[E_V, ROT] = skew(RiT @ dvel)
        Ji[E_V, VEL] = -RiT
        Jj[E_V, VEL] = RiT
        Ji[E_V, BG] = -self.J_v_bg
        Ji[E_V, BA] = -self.J_v_ba

        Ji[E_BG, BG] = -_I3
        Jj[E_BG, BG] = _I3
        Ji[E_BA, BA] = -_I3
        Jj[E_BA, BA] = _I3
        return r, Ji, Jj

    def predict(self, xi, gravity):
        g = gravity.g
        T = self.dt
        dR, dp, dv = self.corrected(xi.bg, xi.ba)
        return NavState(
            R=xi.R @ dR,
            p=xi.p + xi.v * T + 0.5 * g * T * T + xi.R @ dp,
            v=xi.v + g * T + xi.R @ dv,
            bg=xi.bg,
            ba=xi.ba,
            t_offset=xi.t_offset,
            timestamp=xi.timestamp + T,
        )


def preint_integrate(p, sample, dt):
    return p.integrate(sample, dt)


def preint_residual(p, x_prev, x_curr, gravity):
    return p.residual(x_prev, x_curr, gravity)


def preint_predict(x_prev, p, gravity):
    return p.predict(x_prev, gravity)


def integrate_segment(start, samples, bg=None, ba=None, noise=None):
    """Preintegrate ``samples`` (time-ordered, all after ``start``)."""
    pre = PreintegratedImu(start, bg, ba, noise)
    t = start.timestamp
    for s in samples:
        pre.integrate(s, s.timestamp - t)
        t = s.timestamp
    return pre
