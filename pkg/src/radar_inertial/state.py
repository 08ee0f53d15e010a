"""Estimation state, sensor samples and the manifold retract/local pair.

Orientation is stored as ``R`` = R_WI (IMU-to-world). The radar model needs
the world-to-IMU rotation, available as :attr:`NavState.R_iw`. Tangent
vectors use the 16-element layout

    [dtheta(3), dp(3), dv(3), dbg(3), dba(3), dt_offset(1)]

where ``dtheta`` perturbs R_WI on the right (IMU frame) and every other
block is additive.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import is_rotation, so3_exp, so3_log

TANGENT_DIM = 16
ROT = slice(0, 3)
POS = slice(3, 6)
VEL = slice(6, 9)
BG = slice(9, 12)
BA = slice(12, 15)
OFF = 15

GRAVITY = 9.81
MAX_OFFSET = 1.0


def _vec(x):
    return np.asarray(x, dtype=float).reshape(3)


@dataclass(frozen=True)
class NavState:
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bg: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ba: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t_offset: float = 0.0
    timestamp: float = 0.0

    def __post_init__(self):
        for name in ("p", "v", "bg", "ba"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float))

    @property
    def R_iw(self):
        return self.R.T

    def is_sane(self):
        return is_rotation(self.R, 1e-6) and abs(self.t_offset) < MAX_OFFSET

    def replace(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class Extrinsics:
    R_ri: np.ndarray = field(default_factory=lambda: np.eye(3))
    t_ri: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "R_ri", np.asarray(self.R_ri, dtype=float))
        object.__setattr__(self, "t_ri", _vec(self.t_ri))


@dataclass(frozen=True)
class ImuSample:
    timestamp: float
    gyro: np.ndarray
    accel: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gyro", _vec(self.gyro))
        object.__setattr__(self, "accel", _vec(self.accel))

    def shifted(self, dt):
        return replace(self, timestamp=self.timestamp + dt)


@dataclass(frozen=True)
class RadarTarget:
    direction: np.ndarray
    doppler: float
    range: float = float("nan")


@dataclass(frozen=True)
class RadarScan:
    timestamp: float
    targets: tuple = ()

    def directions(self):
        if not self.targets:
            return np.zeros((0, 3))
        return np.array([t.direction for t in self.targets], dtype=float)

    def dopplers(self):
        return np.array([t.doppler for t in self.targets], dtype=float)

    def shifted(self, dt):
        return replace(self, timestamp=self.timestamp + dt)


@dataclass(frozen=True)
class GravityModel:
    """Gravitational acceleration in the world frame (points down)."""

    g: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -GRAVITY]))

    def __post_init__(self):
        object.__setattr__(self, "g", _vec(self.g))

    @classmethod
    def with_magnitude(cls, magnitude=GRAVITY):
        return cls(np.array([0.0, 0.0, -magnitude]))


def state_retract(x, delta):
    delta = np.asarray(delta, dtype=float)
    return NavState(
        R=x.R @ so3_exp(delta[ROT]),
        p=x.p + delta[POS],
        v=x.v + delta[VEL],
        bg=x.bg + delta[BG],
        ba=x.ba + delta[BA],
        t_offset=x.t_offset + delta[OFF],
        timestamp=x.timestamp,
    )


def state_local(a, b):
    """Tangent ``d`` with ``state_retract(a, d) == b``."""
    d = np.empty(TANGENT_DIM)
    d[ROT] = so3_log(a.R.T @ b.R)
    d[POS] = b.p - a.p
    d[VEL] = b.v - a.v
    d[BG] = b.bg - a.bg
    d[BA] = b.ba - a.ba
    d[OFF] = b.t_offset - a.t_offset
    return d
