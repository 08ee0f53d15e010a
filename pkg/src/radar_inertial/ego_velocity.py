"""Radar ego-velocity from a single Doppler scan.

Static targets satisfy ``doppler_i = -r_i . v`` where ``r_i`` is the unit
direction to the target and ``v`` the radar's own velocity, both in the radar
frame. The velocity is fitted with a 3-point RANSAC followed by a least
squares refit on the consensus set, then gated by a sliding average of
recently accepted estimates.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, InsufficientTargets

MIN_SINGULAR_VALUE = 1e-6


@dataclass(frozen=True)
class RansacParams:
    max_iterations: int = 200
    inlier_threshold: float = 0.15
    min_inlier_ratio: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.inlier_threshold > 0:
            raise ValueError("inlier_threshold must be positive")


@dataclass(frozen=True)
class FrontEndConfig:
    ransac: RansacParams = field(default_factory=RansacParams)
    covariance_mode: str = "fit"  # "fit" or "fixed"
    fixed_sigma: float = 0.05
    min_cov_diag: float = 1e-4
    window: int = 5
    gate: float = 2.0


@dataclass
class EgoVelocityMeasurement:
    timestamp: float
    v: np.ndarray
    cov: np.ndarray
    inlier_count: int
    accepted: bool
    inliers: np.ndarray = None


def _check_geometry(A):
    if A.shape[0] < 3:
        raise InsufficientTargets(f"need at least 3 targets, got {A.shape[0]}")
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= MIN_SINGULAR_VALUE:
        raise DegenerateGeometry(f"target directions are rank deficient (smallest singular value {s[-1]:.2e})")


def ls_ego_velocity(directions, dopplers, min_cov_diag=1e-4):
    """Least squares ego-velocity and its covariance.

    Returns ``(v, cov)`` with ``cov = s2 * inv(A^T A)``, ``s2`` the residual
    variance, and each diagonal entry raised to at least ``min_cov_diag``.
    """
    A = -np.asarray(directions, dtype=float).reshape(-1, 3)
    b = np.asarray(dopplers, dtype=float).reshape(-1)
    _check_geometry(A)
    v, *_ = np.linalg.lstsq(A, b, rcond=None)
    n = len(b)
    res = A @ v - b
    s2 = float(res @ res) / (n - 3) if n > 3 else 0.0
    cov = s2 * np.linalg.inv(A.T @ A)
    cov = 0.5 * (cov + cov.T)
    d = np.diag(cov)
    cov[np.diag_indices(3)] = np.maximum(d, min_cov_diag)
    return v, cov


def ransac_ego_velocity(directions, dopplers, params=None, timestamp=0.0,
                        min_cov_diag=1e-4):
    params = params or RansacParams()
    A = -np.asarray(directions, dtype=float).reshape(-1, 3)
    b = np.asarray(dopplers, dtype=float).reshape(-1)
    n = len(b)
    if n < 3:
        raise InsufficientTargets(f"need at least 3 targets, got {n}")

    # all minimal subsets drawn and solved in one batch
    rng = np.random.default_rng(params.seed)
    idx = np.argsort(rng.random((params.max_iterations, n)), axis=1)[:, :3]
    M = A[idx]
    ok = np.abs(np.linalg.det(M)) >= MIN_SINGULAR_VALUE
    if not ok.any():
        raise DegenerateGeometry("no full-rank 3-target subset found")
    V = np.linalg.solve(M[ok], b[idx[ok]][..., None])[..., 0]
    inl = np.abs(A @ V.T - b[:, None]) < params.inlier_threshold
    best = inl[:, int(np.argmax(inl.sum(axis=0)))]

    v, cov = ls_ego_velocity(-A[best], b[best], min_cov_diag)
    # one re-classification pass against the refined fit
    mask = np.abs(A @ v - b) < params.inlier_threshold
    if mask.sum() >= 3 and not np.array_equal(mask, best):
        try:
            v2, cov2 = ls_ego_velocity(-A[mask], b[mask], min_cov_diag)
        except DegenerateGeometry:
            mask = best
        else:
            v, cov, best = v2, cov2, mask
    else:
        mask = best
    count = int(mask.sum())
    accepted = count >= 3 and count / n >= params.min_inlier_ratio
    return EgoVelocityMeasurement(timestamp, v, cov, count, accepted, mask)


def sliding_average_filter(history, candidate, gate):
    """Gate ``candidate`` against the mean of ``history``.

    ``history`` is a deque of accepted velocities; the candidate is appended
    when it passes.
    """
    if not gate > 0:
        raise ValueError("gate must be positive")
    v = np.asarray(candidate.v if hasattr(candidate, "v") else candidate, dtype=float)
    if history and np.linalg.norm(v - np.mean(history, axis=0)) > gate:
        return False
    history.append(v.copy())
    return True


class SlidingAverageFilter:
    def __init__(self, window=5, gate=2.0):
        self.history = deque(maxlen=window)
        self.gate = gate

    def __call__(self, candidate):
        return sliding_average_filter(self.history, candidate, self.gate)


class EgoVelocityEstimator:
    """Front end turning radar scans into gated ego-velocity measurements."""

    def __init__(self, config=None, doppler_sign=1.0):
        self.config = config or FrontEndConfig()
        self.doppler_sign = doppler_sign
        self.filter = SlidingAverageFilter(self.config.window, self.config.gate)

    def process(self, scan):
        cfg = self.config
        meas = ransac_ego_velocity(scan.directions(), self.doppler_sign * scan.dopplers(),
                                   cfg.ransac, scan.timestamp, cfg.min_cov_diag)
        if cfg.covariance_mode == "fixed":
            meas.cov = np.eye(3) * cfg.fixed_sigma ** 2
        if meas.accepted:
            meas.accepted = self.filter(meas)
        return meas
