"""End-to-end radar-inertial odometry with online temporal-offset estimation.

The IMU and radar streams are merged in time order. Each radar scan becomes a
keyframe: its ego-velocity is fitted, a state is appended to the sliding
window, the window is optimized and a snapshot is published. Between
keyframes the navigation output propagates the latest snapshot at IMU rate.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .ego_velocity import EgoVelocityEstimator, FrontEndConfig
from .errors import DegenerateGeometry, InsufficientTargets, NoConvergence, NonMonotonicTime, NotStationary
from .evaluation import TrajectoryRecord
from .factors import HuberKernel
from .geometry import rotation_from_rpy
from .preintegration import ImuNoise, PreintegratedImu
from .smoother import FactorGraphWindow, SolverConfig
from .state import Extrinsics, GRAVITY, GravityModel, NavState, is_rotation

log = logging.getLogger(__name__)

FROZEN_SIGMA = 1e-12


@dataclass(frozen=True)
class PriorSigmas:
    roll_pitch: float = 0.02
    yaw: float = 1e-3
    position: float = 1e-3
    velocity: float = 0.1
    gyro_bias: float = 0.01
    accel_bias: float = 0.1

    def vector(self, offset_sigma):
        return np.array([self.roll_pitch, self.roll_pitch, self.yaw]
                        + [self.position] * 3 + [self.velocity] * 3
                        + [self.gyro_bias] * 3 + [self.accel_bias] * 3 + [offset_sigma])


@dataclass(frozen=True)
class PipelineConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    front_end: FrontEndConfig = field(default_factory=FrontEndConfig)
    imu_noise: ImuNoise = field(default_factory=ImuNoise)
    extrinsics: Extrinsics = field(default_factory=Extrinsics)
    prior: PriorSigmas = field(default_factory=PriorSigmas)
    gravity: float = GRAVITY
    initial_offset: float = 0.0
    offset_prior_sigma: float = 0.02
    init_duration: float = 1.0
    doppler_sign: float = 1.0
    converge_window: float = 10.0

    def validate(self):
        from .errors import ConfigError

        sig = [self.offset_prior_sigma, self.solver.offset_sigma, self.init_duration,
               self.imu_noise.gyro_noise, self.imu_noise.accel_noise,
               self.imu_noise.gyro_walk, self.imu_noise.accel_walk]
        if any(not s > 0 for s in sig):
            raise ConfigError("noise densities, sigmas and init duration must be positive")
        if not is_rotation(self.extrinsics.R_ri, 1e-6):
            raise ConfigError("extrinsic rotation is not a valid rotation matrix")
        if abs(self.doppler_sign) != 1.0:
            raise ConfigError("doppler_sign must be +1 or -1")
        if abs(self.gravity - GRAVITY) > 0.05:
            raise ConfigError("gravity magnitude must be 9.81 +- 0.05")
        return self


def freeze_offset_mode(cfg):
    """Same configuration with the temporal offset pinned at its initial value."""
    return replace(cfg, solver=replace(cfg.solver, offset_sigma=FROZEN_SIGMA),
                   offset_prior_sigma=FROZEN_SIGMA)


def initialize_stationary(samples, gravity=GRAVITY, initial_offset=0.0):
    """Gyro bias and roll/pitch from a stationary IMU segment.

    Returns ``(bg, roll, pitch, state)``; the state has zero yaw, position,
    velocity and accelerometer bias.
    """
    samples = list(samples)
    if len(samples) < 2 or samples[-1].timestamp - samples[0].timestamp < 1.0 - 1e-9:
        raise ValueError("stationary initialization needs at least 1 s of IMU samples")
    acc = np.array([s.accel for s in samples])
    gyr = np.array([s.gyro for s in samples])
    norms = np.linalg.norm(acc, axis=1)
    if norms.std() >= 0.05 * gravity:
        raise NotStationary(f"accelerometer magnitude std {norms.std():.3f} m/s^2 too large")
    bg = gyr.mean(axis=0)
    f = acc.mean(axis=0)
    roll = float(np.arctan2(f[1], f[2]))
    pitch = float(np.arctan2(-f[0], np.hypot(f[1], f[2])))
    state = NavState(R=rotation_from_rpy(roll, pitch, 0.0), bg=bg, t_offset=initial_offset,
                     timestamp=samples[-1].timestamp)
    return bg, roll, pitch, state


@dataclass
class OdometryResult:
    keyframes: TrajectoryRecord
    navigation: TrajectoryRecord
    offsets: np.ndarray  # (n, 2): time, offset estimate after each optimization
    accepted_scans: int = 0
    rejected_scans: int = 0
    iterations: list = field(default_factory=list)

    def converged_offset(self, window=None):
        """Mean offset estimate over the trailing ``window`` seconds."""
        t, o = self.offsets[:, 0], self.offsets[:, 1]
        if window is None:
            return float(o[-1])
        return float(o[t >= t[-1] - window].mean())


class Odometry:
    """Stateful odometry engine fed one sample at a time."""

    def __init__(self, cfg=None):
        self.cfg = (cfg or PipelineConfig()).validate()
        self.gravity = GravityModel.with_magnitude(self.cfg.gravity)
        self.front_end = EgoVelocityEstimator(self.cfg.front_end, self.cfg.doppler_sign)
        self.window = FactorGraphWindow(self.gravity, self.cfg.extrinsics, self.cfg.solver.offset_sigma)
        self.kernel = HuberKernel(self.cfg.solver.huber_delta) if self.cfg.solver.robust else None
        self.init_samples = []
        self.init_state = None
        self.last_imu = None
        self.preint = None
        self.nav = None
        self.snapshot = None
        self.keyframes = []
        self.navigation = []
        self.offsets = []
        self.iterations = []
        self.accepted = 0
        self.rejected = 0

    # -- IMU side ---------------------------------------------------------------

    def add_imu(self, sample):
        if self.last_imu is not None and sample.timestamp <= self.last_imu.timestamp:
            raise NonMonotonicTime(f"IMU timestamp {sample.timestamp} is not increasing")
        if self.init_state is None:
            self.init_samples.append(sample)
            if sample.timestamp - self.init_samples[0].timestamp >= self.cfg.init_duration - 1e-9:
                _, _, _, self.init_state = initialize_stationary(
                    self.init_samples, self.cfg.gravity, self.cfg.initial_offset)
        if self.preint is not None:
            dt = sample.timestamp - self.preint.end_time
            self.preint.integrate(sample, dt)
            self.nav.integrate(sample, dt)
            self.navigation.append(self.nav.predict(self.snapshot.state, self.gravity))
        self.last_imu = sample

    # -- radar side -----------------------------------------------------------------

    def add_radar(self, scan):
        """Insert a keyframe at the scan stamp. Returns False if the scan was skipped."""
        if self.init_state is None or self.last_imu is None or scan.timestamp < self.last_imu.timestamp:
            return False
        if self.window.order and scan.timestamp <= self.window.newest.timestamp:
            raise NonMonotonicTime(f"radar stamp {scan.timestamp} is not after the newest keyframe")
        try:
            meas = self.front_end.process(scan)
        except (InsufficientTargets, DegenerateGeometry) as exc:
            log.info("scan at %.6f skipped by front end: %s", scan.timestamp, exc)
            meas = None
        if meas is not None and meas.accepted:
            self.accepted += 1
        else:
            self.rejected += 1

        t = scan.timestamp
        start = self.last_imu.shifted(t - self.last_imu.timestamp)
        if not self.window.order:
            x0 = self.init_state.replace(timestamp=t)
            sig = self.cfg.prior.vector(self.cfg.offset_prior_sigma)
            self.window.add_first_state(x0, sig, self.last_imu, meas)
        else:
            if t > self.preint.end_time:
                self.preint.integrate(start, t - self.preint.end_time)
            self.window.add_keyframe(meas, self.preint, self.last_imu, timestamp=t)

        result = self.window.optimize(self.cfg.solver)
        self.window.marginalize(self.cfg.solver.lag, self.kernel)
        self.snapshot = self.window.snapshot(result.iterations, result.cost)
        self.iterations.append(result.iterations)

        x = self.snapshot.state
        self.keyframes.append(x)
        self.offsets.append((t, x.t_offset))
        self.preint = PreintegratedImu(start, x.bg, x.ba, self.cfg.imu_noise)
        self.nav = PreintegratedImu(start, x.bg, x.ba, self.cfg.imu_noise, track_covariance=False)
        return True

    def result(self):
        meta = {"mode": "frozen" if self.cfg.offset_prior_sigma <= FROZEN_SIGMA else "estimated"}
        return OdometryResult(
            keyframes=TrajectoryRecord.from_states(self.keyframes, **meta),
            navigation=TrajectoryRecord.from_states(_dedupe(self.navigation), **meta),
            offsets=np.array(self.offsets, dtype=float).reshape(-1, 2),
            accepted_scans=self.accepted,
            rejected_scans=self.rejected,
            iterations=list(self.iterations),
        )


def _dedupe(states):
    out = []
    for s in states:
        if out and s.timestamp <= out[-1].timestamp:
            continue
        out.append(s)
    return out


def run_odometry(cfg, imu_stream, radar_stream):
    """Process complete streams; radar scans are visited in stamp order."""
    odo = Odometry(cfg)
    imu = list(imu_stream)
    scans = sorted(radar_stream, key=lambda s: s.timestamp)
    i = 0
    n = len(imu)
    for scan in scans:
        while i < n and imu[i].timestamp <= scan.timestamp:
            odo.add_imu(imu[i])
            i += 1
        if i == n and (n == 0 or scan.timestamp > imu[-1].timestamp):
            break
        odo.add_radar(scan)
    while i < n:
        odo.add_imu(imu[i])
        i += 1
    if not odo.keyframes:
        raise ValueError("no radar keyframe was processed after initialization")
    return odo.result()


def iterative_offset_refinement(cfg, imu_stream, radar_stream, max_iters=3, tolerance=1e-3):
    """Repeatedly re-stamp the radar stream by the running offset estimate.

    Returns ``(cumulative_offset, per_iteration_estimates)``.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    imu = list(imu_stream)
    radar = list(radar_stream)
    cumulative = 0.0
    estimates = []
    for _ in range(max_iters):
        shifted = [s.shifted(-cumulative) for s in radar]
        res = run_odometry(cfg, imu, shifted)
        est = res.converged_offset(cfg.converge_window)
        estimates.append(est)
        cumulative += est
        log.info("refinement iteration %d: offset %.3f ms, cumulative %.3f ms",
                 len(estimates), est * 1e3, cumulative * 1e3)
        if abs(est) < tolerance:
            break
        if len(estimates) >= 3 and abs(estimates[-1]) >= abs(estimates[-2]) >= abs(estimates[-3]):
            raise NoConvergence(f"offset estimates stopped shrinking: {estimates}")
    return cumulative, estimates
