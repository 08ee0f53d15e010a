"""Synthetic trajectories and IMU / Doppler-radar streams.

Trajectories are analytic: each position coordinate and each ZYX Euler angle
is a sum of sinusoids multiplied by a C2 envelope, so velocities,
accelerations and body rates are exact. Radar scans are generated at true
sample times and *stamped* ``t + offset`` to emulate a delayed sensor clock.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRange
from .geometry import rotation_from_rpy
from .state import Extrinsics, GRAVITY, ImuSample, RadarScan, RadarTarget

MODES = ("stationary-then-agile", "sinusoid", "piecewise")


@dataclass(frozen=True)
class TrajectorySpec:
    duration: float = 60.0
    mode: str = "stationary-then-agile"
    hold: float = 5.0
    ramp: float = 1.0
    pos_amplitude: tuple = (0.20, 0.20, 0.05)
    pos_frequency: tuple = (1.1, 0.9, 1.3)
    pos_phase: tuple = (0.0, 1.0, 2.0)
    att_amplitude: tuple = (0.25, 0.20, 0.60)   # roll, pitch, yaw [rad]
    att_frequency: tuple = (0.7, 0.8, 0.4)
    att_phase: tuple = (0.5, 1.5, 0.0)
    segments: tuple = ()  # (start, end) pairs of motion bursts, piecewise mode

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown trajectory mode {self.mode!r}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")


def _smoothstep(u):
    """Quintic smoothstep and its first two derivatives w.r.t. ``u``."""
    if u <= 0.0:
        return 0.0, 0.0, 0.0
    if u >= 1.0:
        return 1.0, 0.0, 0.0
    return (u ** 3 * (10 - 15 * u + 6 * u * u),
            30 * u * u * (1 - u) ** 2,
            60 * u * (1 - u) * (1 - 2 * u))


def _envelope(spec, t):
    if spec.mode == "sinusoid":
        return 1.0, 0.0, 0.0
    if spec.mode == "stationary-then-agile":
        if spec.ramp <= 0:
            return (1.0, 0.0, 0.0) if t >= spec.hold else (0.0, 0.0, 0.0)
        s, ds, dds = _smoothstep((t - spec.hold) / spec.ramp)
        return s, ds / spec.ramp, dds / spec.ramp ** 2
    # piecewise: sum of bursts with smooth on/off ramps
    e = de = dde = 0.0
    r = max(spec.ramp, 1e-6)
    for start, end in spec.segments:
        up = _smoothstep((t - start) / r)
        down = _smoothstep((end - t) / r)
        e += up[0] * down[0]
        de += (up[1] * down[0] - up[0] * down[1]) / r
        dde += (up[2] * down[0] - 2 * up[1] * down[1] + up[0] * down[2]) / r ** 2
    return e, de, dde


def _channel(amp, freq, phase, origin, env, t):
    """Value and two derivatives of ``env(t) * A sin(2 pi f (t - origin) + phi)``.

    The sinusoid is taken relative to its value at ``origin`` so that the
    channel starts at zero.
    """
    w = 2 * np.pi * freq
    arg = w * (t - origin) + phase
    s = amp * (np.sin(arg) - np.sin(phase))
    ds = amp * w * np.cos(arg)
    dds = -amp * w * w * np.sin(arg)
    e, de, dde = env
    return e * s, de * s + e * ds, dde * s + 2 * de * ds + e * dds


def _origin(spec):
    return spec.hold if spec.mode == "stationary-then-agile" else 0.0


def eval_trajectory(spec, t):
    """Ground truth at time ``t``: (R_WI, p_W, v_W, a_W, omega_I)."""
    if t < -1e-12 or t > spec.duration + 1e-12:
        raise OutOfRange(f"t={t} outside [0, {spec.duration}]")
    env = _envelope(spec, t)
    t0 = _origin(spec)
    p = np.empty(3)
    v = np.empty(3)
    a = np.empty(3)
    for i in range(3):
        p[i], v[i], a[i] = _channel(spec.pos_amplitude[i], spec.pos_frequency[i],
                                    spec.pos_phase[i], t0, env, t)
    ang = np.empty(3)
    rate = np.empty(3)
    for i in range(3):
        ang[i], rate[i], _ = _channel(spec.att_amplitude[i], spec.att_frequency[i],
                                      spec.att_phase[i], t0, env, t)
    roll, pitch, yaw = ang
    droll, dpitch, dyaw = rate
    R = rotation_from_rpy(roll, pitch, yaw)
    sr, cr = np.sin(roll), np.cos(roll)
    sp, cp = np.sin(pitch), np.cos(pitch)
    omega = np.array([
        droll - dyaw * sp,
        dpitch * cr + dyaw * sr * cp,
        -dpitch * sr + dyaw * cr * cp,
    ])
    return R, p, v, a, omega


@dataclass(frozen=True)
class SensorSpec:
    imu_rate: float = 400.0
    radar_rate: float = 10.0
    gyro_noise: float = 0.0
    accel_noise: float = 0.0
    gyro_walk: float = 0.0
    accel_walk: float = 0.0
    gyro_bias: tuple = (0.0, 0.0, 0.0)
    accel_bias: tuple = (0.0, 0.0, 0.0)
    n_targets: int = 60
    range_min: float = 5.0
    range_max: float = 50.0
    fov_half_angle: float = None  # radians about radar +x; None = full sphere
    doppler_noise: float = 0.0
    outlier_ratio: float = 0.0
    outlier_magnitude: float = 5.0
    offset: float = 0.0
    gravity: float = GRAVITY
    extrinsics: Extrinsics = field(default_factory=Extrinsics)
    seed: int = 0

    def __post_init__(self):
        if self.imu_rate <= 0 or self.radar_rate <= 0:
            raise ValueError("sensor rates must be positive")
        if not 0.0 <= self.outlier_ratio < 1.0:
            raise ValueError("outlier_ratio must be in [0, 1)")

    @classmethod
    def noisy(cls, **kw):
        """Defaults resembling a mid-grade MEMS IMU and automotive radar."""
        base = dict(gyro_noise=1.7e-4, accel_noise=2e-3, gyro_walk=2e-5, accel_walk=3e-3,
                    gyro_bias=(0.004, -0.003, 0.002), accel_bias=(0.03, -0.02, 0.04),
                    doppler_noise=0.05, outlier_ratio=0.1,
                    extrinsics=Extrinsics(np.eye(3), (0.10, 0.0, 0.05)))
        base.update(kw)
        return cls(**base)


def _rngs(seed):
    imu_seq, radar_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(imu_seq), np.random.default_rng(radar_seq)


def imu_times(spec, sensor):
    n = int(np.floor(spec.duration * sensor.imu_rate + 1e-9)) + 1
    return np.arange(n) / sensor.imu_rate


def synthesize_imu(spec, sensor):
    rng, _ = _rngs(sensor.seed)
    g_w = np.array([0.0, 0.0, -sensor.gravity])
    dt = 1.0 / sensor.imu_rate
    bg = np.array(sensor.gyro_bias, dtype=float)
    ba = np.array(sensor.accel_bias, dtype=float)
    sg = sensor.gyro_noise / np.sqrt(dt)
    sa = sensor.accel_noise / np.sqrt(dt)
    out = []
    for k, t in enumerate(imu_times(spec, sensor)):
        R, _, _, a_w, omega = eval_trajectory(spec, t)
        noise = rng.standard_normal(12)
        if k > 0:
            bg = bg + sensor.gyro_walk * np.sqrt(dt) * noise[6:9]
            ba = ba + sensor.accel_walk * np.sqrt(dt) * noise[9:12]
        gyro = omega + bg + sg * noise[0:3]
        accel = R.T @ (a_w - g_w) + ba + sa * noise[3:6]
        out.append(ImuSample(float(t), gyro, accel))
    return out


def _directions(rng, n, fov):
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    if fov is None:
        return d
    cos_lim = np.cos(fov)
    keep = d[d[:, 0] >= cos_lim]
    while len(keep) < n:
        extra = rng.standard_normal((4 * n, 3))
        extra /= np.linalg.norm(extra, axis=1, keepdims=True)
        keep = np.vstack([keep, extra[extra[:, 0] >= cos_lim]])
    return keep[:n]


def radar_velocity(spec, sensor, t):
    """Ego-velocity of the radar origin in the radar frame at true time ``t``."""
    R, _, v, _, omega = eval_trajectory(spec, t)
    ex = sensor.extrinsics
    return ex.R_ri @ (R.T @ v + np.cross(omega, ex.t_ri))


def radar_true_times(spec, sensor):
    n = int(np.floor(spec.duration * sensor.radar_rate + 1e-9)) + 1
    return np.arange(n) / sensor.radar_rate


def synthesize_radar(spec, sensor):
    if sensor.n_targets < 10:
        raise ValueError("need at least 10 landmarks per scan")
    _, rng = _rngs(sensor.seed)
    scans = []
    for t in radar_true_times(spec, sensor):
        v_r = radar_velocity(spec, sensor, t)
        n = sensor.n_targets
        dirs = _directions(rng, n, sensor.fov_half_angle)
        ranges = rng.uniform(sensor.range_min, sensor.range_max, n)
        noise = rng.standard_normal(n) * sensor.doppler_noise
        outlier = rng.random(n) < sensor.outlier_ratio
        junk = rng.uniform(-sensor.outlier_magnitude, sensor.outlier_magnitude, n)
        doppler = -dirs @ v_r + noise
        doppler = np.where(outlier, junk, doppler)
        targets = tuple(RadarTarget(dirs[i], float(doppler[i]), float(ranges[i])) for i in range(n))
        scans.append(RadarScan(float(t + sensor.offset), targets))
    return scans


def ground_truth(spec, times):
    from .evaluation import TrajectoryRecord

    Rs, ps, vs = [], [], []
    for t in times:
        R, p, v, _, _ = eval_trajectory(spec, t)
        Rs.append(R)
        ps.append(p)
        vs.append(v)
    return TrajectoryRecord(np.asarray(times, dtype=float), np.array(ps), np.array(Rs), np.array(vs))


@dataclass
class SimulatedDataset:
    trajectory: TrajectorySpec
    sensor: SensorSpec
    imu: list
    radar: list
    truth: object


def simulate(spec=None, sensor=None):
    spec = spec or TrajectorySpec()
    sensor = sensor or SensorSpec()
    imu = synthesize_imu(spec, sensor)
    radar = synthesize_radar(spec, sensor)
    truth = ground_truth(spec, [s.timestamp for s in imu])
    return SimulatedDataset(spec, sensor, imu, radar, truth)
