"""Trajectory containers and error metrics (origin-aligned ATE, RPE per meter)."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientMotion, NoOverlap, NonMonotonicTime
from .geometry import so3_log

ASSOCIATION_TOLERANCE = 0.01
RPE_SEGMENT = 1.0
RPE_SEGMENT_TOLERANCE = 0.1


@dataclass
class TrajectoryRecord:
    t: np.ndarray
    p: np.ndarray
    R: np.ndarray
    v: np.ndarray = None
    t_offset: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        n = len(self.t)
        self.p = np.asarray(self.p, dtype=float).reshape(n, 3)
        self.R = np.asarray(self.R, dtype=float).reshape(n, 3, 3)
        if self.v is not None:
            self.v = np.asarray(self.v, dtype=float).reshape(n, 3)
        if self.t_offset is not None:
            self.t_offset = np.asarray(self.t_offset, dtype=float).reshape(n)
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise NonMonotonicTime("trajectory timestamps must be strictly increasing")

    def __len__(self):
        return len(self.t)

    @classmethod
    def from_states(cls, states, **metadata):
        states = list(states)
        return cls(
            t=[s.timestamp for s in states],
            p=[s.p for s in states],
            R=[s.R for s in states],
            v=[s.v for s in states],
            t_offset=[s.t_offset for s in states],
            metadata=dict(metadata),
        )

    def shifted(self, dt):
        return TrajectoryRecord(self.t + dt, self.p, self.R, self.v, self.t_offset, dict(self.metadata))


def associate(est, gt, tolerance=ASSOCIATION_TOLERANCE):
    """Index pairs ``(i_est, i_gt)`` matching each estimate to the nearest truth."""
    if len(est) == 0 or len(gt) == 0:
        raise NoOverlap("empty trajectory")
    j = np.searchsorted(gt.t, est.t)
    lo = np.clip(j - 1, 0, len(gt) - 1)
    hi = np.clip(j, 0, len(gt) - 1)
    pick = np.where(np.abs(gt.t[lo] - est.t) <= np.abs(gt.t[hi] - est.t), lo, hi)
    ok = np.abs(gt.t[pick] - est.t) <= tolerance + 1e-12
    if not ok.any():
        raise NoOverlap("no estimate lies within the association tolerance of the ground truth")
    return np.nonzero(ok)[0], pick[ok]


def origin_align(est, gt, ie, ig):
    """Positions and rotations of ``est`` moved so its first associated pose matches truth."""
    R_a = gt.R[ig[0]] @ est.R[ie[0]].T
    p = (est.p[ie] - est.p[ie[0]]) @ R_a.T + gt.p[ig[0]]
    R = np.einsum("ij,njk->nik", R_a, est.R[ie])
    return p, R


def ate_origin_aligned(est, gt, tolerance=ASSOCIATION_TOLERANCE):
    """Position RMSE after aligning the first poses (no least-squares fit)."""
    ie, ig = associate(est, gt, tolerance)
    p, _ = origin_align(est, gt, ie, ig)
    err = p - gt.p[ig]
    return float(np.sqrt(np.mean(np.sum(err * err, axis=1))))


def rpe_per_meter(est, gt, segment=RPE_SEGMENT, tolerance=ASSOCIATION_TOLERANCE):
    """Mean relative translation [m/m] and rotation [deg/m] errors over ~1 m segments.

    For every pose, the partner is the later pose whose ground-truth path
    distance is closest to ``segment``; pairs off by more than 10% are skipped.
    """
    ie, ig = associate(est, gt, tolerance)
    gp, gR = gt.p[ig], gt.R[ig]
    ep, eR = est.p[ie], est.R[ie]
    steps = np.linalg.norm(np.diff(gp, axis=0), axis=1)
    dist = np.concatenate([[0.0], np.cumsum(steps)])
    if dist[-1] < 2.0 * segment:
        raise InsufficientMotion(f"ground-truth path of {dist[-1]:.3f} m is shorter than {2 * segment} m")

    t_errs, r_errs = [], []
    for i in range(len(dist)):
        target = dist[i] + segment
        k = np.searchsorted(dist, target)
        cands = [c for c in (k - 1, k) if i < c < len(dist)]
        if not cands:
            break
        j = min(cands, key=lambda c: abs(dist[c] - target))
        length = dist[j] - dist[i]
        if abs(length - segment) > RPE_SEGMENT_TOLERANCE * segment:
            continue
        Rg = gR[i].T @ gR[j]
        tg = gR[i].T @ (gp[j] - gp[i])
        Re = eR[i].T @ eR[j]
        te = eR[i].T @ (ep[j] - ep[i])
        t_errs.append(np.linalg.norm(Rg.T @ (te - tg)) / length)
        r_errs.append(np.degrees(np.linalg.norm(so3_log(Rg.T @ Re))) / length)
    if not t_errs:
        raise InsufficientMotion("no pose pair is separated by the RPE segment length")
    return float(np.mean(t_errs)), float(np.mean(r_errs))
