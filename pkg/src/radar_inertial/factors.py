"""Residuals and Jacobians of the factor types in the smoother.

Every factor exposes ``keys`` and ``linearize(states)`` returning the
whitened residual together with a list of ``(key, jacobian)`` pairs, where
each Jacobian is taken with respect to the 16-dimensional state tangent.
Only the radar factor is robustified.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import right_jacobian_inv, skew
from .state import BA, BG, OFF, ROT, TANGENT_DIM, VEL, state_local


@dataclass(frozen=True)
class HuberKernel:
    delta: float = 1.345

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("Huber delta must be positive")

    def __call__(self, squared_norm):
        return huber_apply(squared_norm, self.delta)


def huber_apply(squared_norm, delta):
    """Huber loss of a whitened residual and its IRLS weight.

    The loss is ``s/2`` inside the threshold and ``delta*|e| - delta^2/2``
    outside, with ``s = |e|^2``.
    """
    if squared_norm < 0 or not delta > 0:
        raise ValueError("huber_apply needs squared_norm >= 0 and delta > 0")
    e = np.sqrt(squared_norm)
    if e <= delta:
        return 0.5 * squared_norm, 1.0
    return delta * e - 0.5 * delta * delta, delta / e


def whitener(cov):
    """Square-root information ``W`` with ``W.T @ W == inv(cov)``."""
    L = np.linalg.cholesky(0.5 * (cov + cov.T))
    return np.linalg.inv(L)


class RadarFactor:
    """Ego-velocity measurement with temporal-offset compensation.

    Predicted radar-frame velocity::

        h = R_RI (R_IW v + (w - bg) x t_RI - t_O * a_c)
        a_c = a - ba + R_IW g

    with ``w``, ``a`` the last IMU sample at or before the radar stamp and
    ``g`` the world gravity vector (pointing down), so ``a_c`` is the
    gravity-free acceleration in the IMU frame.
    """

    robust = True

    def __init__(self, key, measurement, last_imu, extrinsics, gravity):
        if last_imu.timestamp > measurement.timestamp + 1e-12:
            raise ValueError("IMU sample is newer than the radar measurement")
        self.key = key
        self.keys = (key,)
        self.z = np.asarray(measurement.v, dtype=float)
        self.W = whitener(measurement.cov)
        self.last_imu = last_imu
        self.extrinsics = extrinsics
        self.gravity = gravity
        self._lever = -skew(np.asarray(extrinsics.t_ri, dtype=float))  # w x t == lever @ w

    def corrected_accel(self, x):
        return self.last_imu.accel - x.ba + x.R.T @ self.gravity.g

    def predict(self, x):
        w = self.last_imu.gyro - x.bg
        a_c = self.corrected_accel(x)
        return self.extrinsics.R_ri @ (x.R.T @ x.v + self._lever @ w - x.t_offset * a_c)

    def raw_residual(self, x):
        return self.z - self.predict(x)

    def residual(self, x):
        return self.W @ self.raw_residual(x)

    def jacobian(self, x):
        R_ri, t_ri = self.extrinsics.R_ri, self.extrinsics.t_ri
        R_iw = x.R.T
        H = np.zeros((3, TANGENT_DIM))
        H[:, ROT] = R_ri @ (skew(R_iw @ x.v) - x.t_offset * skew(R_iw @ self.gravity.g))
        H[:, VEL] = R_ri @ R_iw
        H[:, BG] = R_ri @ skew(t_ri)
        H[:, BA] = R_ri * x.t_offset
        J = -self.W @ H
        # the residual is affine in t_O; write its coefficient directly
        J[:, OFF] = self.W @ (R_ri @ self.corrected_accel(x))
        return J

    def error(self, states):
        return self.residual(states[self.key])

    def linearize(self, states):
        x = states[self.key]
        return self.residual(x), [(self.key, self.jacobian(x))]


def radar_residual(x, factor):
    return factor.residual(x)


def radar_jacobians(x, factor):
    return factor.jacobian(x)


class ConstantOffsetFactor:
    """Random-walk link between the temporal offsets of consecutive states."""

    robust = False

    def __init__(self, key_prev, key_curr, sigma=1e-4):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.keys = (key_prev, key_curr)
        self.sigma = sigma

    def residual(self, x_prev, x_curr):
        return np.array([(x_curr.t_offset - x_prev.t_offset) / self.sigma])

    def error(self, states):
        return self.residual(states[self.keys[0]], states[self.keys[1]])

    def linearize(self, states):
        i, j = self.keys
        r = self.residual(states[i], states[j])
        Ji = np.zeros((1, TANGENT_DIM))
        Jj = np.zeros((1, TANGENT_DIM))
        Ji[0, OFF] = -1.0 / self.sigma
        Jj[0, OFF] = 1.0 / self.sigma
        return r, [(i, Ji), (j, Jj)]


def offset_residual(x_prev, x_curr, sigma=1e-4):
    return float(ConstantOffsetFactor(0, 1, sigma).residual(x_prev, x_curr)[0])


class ImuFactor:
    """Whitened preintegration residual between consecutive states."""

    robust = False

    def __init__(self, key_prev, key_curr, preint, gravity):
        self.keys = (key_prev, key_curr)
        self.preint = preint
        self.gravity = gravity

    def maybe_relinearize(self, states):
        x = states[self.keys[0]]
        if self.preint.needs_relinearization(x.bg, x.ba):
            self.preint.reintegrate(x.bg, x.ba)

    def error(self, states):
        i, j = self.keys
        return self.preint.sqrt_information() @ self.preint.residual(states[i], states[j], self.gravity)

    def linearize(self, states):
        i, j = self.keys
        r, Ji, Jj = self.preint.evaluate(states[i], states[j], self.gravity)
        W = self.preint.sqrt_information()
        return W @ r, [(i, W @ Ji), (j, W @ Jj)]


class LinearPrior:
    """Gaussian prior ``|S local(x_lin, x) + r0|^2`` on a single state.

    Used both for the initial prior (diagonal ``S``, ``r0 = 0``) and for the
    marginal prior left behind by marginalization.
    """

    robust = False

    def __init__(self, key, x_lin, sqrt_info, r0=None):
        self.key = key
        self.keys = (key,)
        self.x_lin = x_lin
        self.S = np.atleast_2d(np.asarray(sqrt_info, dtype=float))
        self.r0 = np.zeros(self.S.shape[0]) if r0 is None else np.asarray(r0, dtype=float)

    @classmethod
    def from_sigmas(cls, key, mean, sigmas):
        return cls(key, mean, np.diag(1.0 / np.asarray(sigmas, dtype=float)))

    @property
    def information(self):
        return self.S.T @ self.S

    def residual(self, x):
        return self.S @ state_local(self.x_lin, x) + self.r0

    def error(self, states):
        return self.residual(states[self.key])

    def linearize(self, states):
        x = states[self.key]
        d = state_local(self.x_lin, x)
        J = self.S.copy()
        J[:, ROT] = self.S[:, ROT] @ right_jacobian_inv(d[ROT])
        return self.S @ d + self.r0, [(self.key, J)]
