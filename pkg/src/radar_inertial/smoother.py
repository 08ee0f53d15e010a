"""Fixed-lag sliding-window smoother.

States are keyed by radar keyframes. The window is optimized with
Levenberg-Marquardt, robust factors re-weighted each iteration (IRLS), and
states that fall out of the lag are folded into a Gaussian prior on the
oldest survivor through a Schur complement.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NonMonotonicTime, SolverDiverged
from .factors import ConstantOffsetFactor, HuberKernel, ImuFactor, LinearPrior, RadarFactor
from .state import TANGENT_DIM, state_retract

log = logging.getLogger(__name__)

D = TANGENT_DIM


@dataclass(frozen=True)
class SolverConfig:
    lag: float = 1.0
    max_iterations: int = 10
    tolerance: float = 1e-6
    relative_tolerance: float = 1e-5
    lambda_init: float = 1e-4
    lambda_up: float = 10.0
    lambda_down: float = 0.3
    lambda_max: float = 1e6
    max_rejections: int = 6
    huber_delta: float = 1.345
    robust: bool = True
    offset_sigma: float = 1e-4

    def __post_init__(self):
        if not (self.lag > 0 and self.tolerance > 0):
            raise ValueError("lag and tolerance must be positive")


@dataclass(frozen=True)
class Snapshot:
    """Immutable view of the newest optimized state, for the navigation side."""

    state: object
    last_imu: object
    iterations: int = 0
    cost: float = 0.0


@dataclass
class OptimizeResult:
    iterations: int
    cost: float
    costs: list = field(default_factory=list)


class FactorGraphWindow:
    def __init__(self, gravity, extrinsics, offset_sigma=1e-4):
        self.gravity = gravity
        self.extrinsics = extrinsics
        self.offset_sigma = offset_sigma
        self.states = {}
        self.order = []
        self.factors = []
        self.last_imu = {}
        self._next_key = 0

    # -- structure ------------------------------------------------------------

    def __len__(self):
        return len(self.order)

    @property
    def newest_key(self):
        return self.order[-1]

    @property
    def newest(self):
        return self.states[self.order[-1]]

    @property
    def span(self):
        if not self.order:
            return 0.0
        return self.states[self.order[-1]].timestamp - self.states[self.order[0]].timestamp

    def _new_key(self):
        k = self._next_key
        self._next_key += 1
        return k

    def count(self, kind):
        return sum(isinstance(f, kind) for f in self.factors)

    def add_first_state(self, state, prior_sigmas, last_imu, measurement=None):
        if self.order:
            raise ValueError("window already initialized")
        k = self._new_key()
        self.states[k] = state
        self.order.append(k)
        self.last_imu[k] = last_imu
        self.factors.append(LinearPrior.from_sigmas(k, state, prior_sigmas))
        if measurement is not None and measurement.accepted:
            self.factors.append(RadarFactor(k, measurement, last_imu, self.extrinsics, self.gravity))
        return k

    def add_keyframe(self, measurement, preint, last_imu, timestamp=None):
        """Append a state initialized by IMU prediction from the newest one.

        ``measurement`` may be None or rejected, in which case only the IMU
        and offset factors are attached.
        """
        prev = self.newest_key
        x_prev = self.states[prev]
        t = timestamp if timestamp is not None else measurement.timestamp
        if not t > x_prev.timestamp:
            raise NonMonotonicTime(f"keyframe at {t} is not after {x_prev.timestamp}")
        if abs(x_prev.timestamp + preint.dt - t) > 1e-6:
            raise ValueError("preintegration does not span the keyframe gap")
        x_new = preint.predict(x_prev, self.gravity).replace(timestamp=t)
        k = self._new_key()
        self.states[k] = x_new
        self.order.append(k)
        self.last_imu[k] = last_imu
        self.factors.append(ImuFactor(prev, k, preint, self.gravity))
        self.factors.append(ConstantOffsetFactor(prev, k, self.offset_sigma))
        if measurement is not None and measurement.accepted:
            self.factors.append(RadarFactor(k, measurement, last_imu, self.extrinsics, self.gravity))
        return k

    def check_structure(self):
        keys = self.order
        for a, b in zip(keys[:-1], keys[1:]):
            imu = [f for f in self.factors if isinstance(f, ImuFactor) and f.keys == (a, b)]
            ct = [f for f in self.factors if isinstance(f, ConstantOffsetFactor) and f.keys == (a, b)]
            if len(imu) != 1 or len(ct) != 1:
                return False
        for k in keys:
            if sum(isinstance(f, RadarFactor) and f.key == k for f in self.factors) > 1:
                return False
        return True

    def snapshot(self, iterations=0, cost=0.0):
        k = self.newest_key
        return Snapshot(self.states[k], self.last_imu[k], iterations, cost)

    # -- cost / linear system ---------------------------------------------------

    def _robust(self, f, kernel):
        return kernel is not None and getattr(f, "robust", False)

    def cost(self, states=None, kernel=None, factors=None):
        states = self.states if states is None else states
        total = 0.0
        for f in (self.factors if factors is None else factors):
            r = f.error(states)
            s = float(r @ r)
            if self._robust(f, kernel):
                total += kernel(s)[0]
            else:
                total += 0.5 * s
        return total

    def linear_system(self, keys=None, kernel=None, factors=None, states=None):
        """Gauss-Newton ``H``, gradient ``g`` and cost over ``keys``."""
        keys = self.order if keys is None else keys
        states = self.states if states is None else states
        index = {k: i * D for i, k in enumerate(keys)}
        n = len(keys) * D
        H = np.zeros((n, n))
        g = np.zeros(n)
        total = 0.0
        for f in (self.factors if factors is None else factors):
            r, blocks = f.linearize(states)
            s = float(r @ r)
            w = 1.0
            if self._robust(f, kernel):
                loss, w = kernel(s)
                total += loss
            else:
                total += 0.5 * s
            blocks = [(index[k], J) for k, J in blocks if k in index]
            for ia, Ja in blocks:
                WJa = w * Ja.T
                g[ia:ia + D] += WJa @ r
                for ib, Jb in blocks:
                    H[ia:ia + D, ib:ib + D] += WJa @ Jb
        return H, g, total

    # -- optimization -----------------------------------------------------------

    def optimize(self, cfg=None):
        cfg = cfg or SolverConfig()
        kernel = HuberKernel(cfg.huber_delta) if cfg.robust else None
        for f in self.factors:
            if isinstance(f, ImuFactor):
                f.maybe_relinearize(self.states)

        lam = cfg.lambda_init
        H, g, cost = self.linear_system(kernel=kernel)
        costs = [cost]
        rejections = 0
        it = 0
        while it < cfg.max_iterations:
            it += 1
            delta = _damped_solve(H, g, lam)
            step = float(np.linalg.norm(delta))
            if step < cfg.tolerance:
                break
            trial = {k: state_retract(self.states[k], delta[i * D:(i + 1) * D])
                     for i, k in enumerate(self.order)}
            new_cost = self.cost(trial, kernel)
            if new_cost < cost:
                converged = cost - new_cost < cfg.relative_tolerance * cost
                self.states = trial
                lam = max(lam * cfg.lambda_down, 1e-12)
                rejections = 0
                H, g, cost = self.linear_system(kernel=kernel)
                costs.append(cost)
                if converged or step < 10 * cfg.tolerance:
                    break
            else:
                lam = min(lam * cfg.lambda_up, cfg.lambda_max)
                rejections += 1
                if rejections >= cfg.max_rejections and lam >= cfg.lambda_max:
                    if step > 1e-3:
                        raise SolverDiverged(f"no cost decrease after {rejections} damped steps (cost {cost:.3e})")
                    break
        return OptimizeResult(it, cost, costs)

    # -- marginalization -----------------------------------------------------------

    def marginalize(self, lag, kernel=None):
        """Drop states strictly older than ``newest - lag``.

        Each dropped state's factors are linearized at the current estimate
        and condensed into a :class:`LinearPrior` on its successor.
        """
        removed = 0
        if not self.order:
            return removed
        cutoff = self.newest.timestamp - lag
        while len(self.order) > 1 and self.states[self.order[0]].timestamp < cutoff - 1e-9:
            self._marginalize_oldest(kernel)
            removed += 1
        return removed

    def _marginalize_oldest(self, kernel):
        m, n = self.order[0], self.order[1]
        involved = [f for f in self.factors if m in f.keys]
        keys = [m, n]
        H, g, _ = self.linear_system(keys=keys, kernel=kernel, factors=involved)
        prior = schur_prior(n, self.states[n], H, g)
        self.factors = [f for f in self.factors if m not in f.keys]
        self.factors.insert(0, prior)
        del self.states[m]
        del self.last_imu[m]
        self.order.pop(0)


def _damped_solve(H, g, lam):
    # Jacobi scaling keeps pinned (huge-information) coordinates well conditioned
    # Levenberg damping (lam * I); Marquardt's diag(H) scaling would freeze
    # the weakly constrained gauge directions (yaw, position)
    d = np.sqrt(np.maximum(np.diag(H), 1e-12))
    Hs = H / np.outer(d, d)
    A = Hs + np.diag(lam / (d * d))
    try:
        y = np.linalg.solve(A, -g / d)
    except np.linalg.LinAlgError:
        y = np.linalg.lstsq(A, -g / d, rcond=None)[0]
    return y / d


def schur_prior(key, x_lin, H, g, keep=slice(D, 2 * D), drop=slice(0, D)):
    """Condense ``(H, g)`` over [dropped, kept] into a prior on the kept state."""
    d = np.sqrt(np.maximum(np.diag(H), 1e-300))
    Hs = H / np.outer(d, d)
    gs = g / d
    Hmm = Hs[drop, drop]
    Hmk = Hs[drop, keep]
    Hmm_inv_Hmk = np.linalg.lstsq(0.5 * (Hmm + Hmm.T), np.column_stack([Hmk, gs[drop]]), rcond=1e-13)[0]
    Hp = Hs[keep, keep] - Hmk.T @ Hmm_inv_Hmk[:, :-1]
    gp = gs[keep] - Hmk.T @ Hmm_inv_Hmk[:, -1]
    Hp = 0.5 * (Hp + Hp.T)
    evals, evecs = np.linalg.eigh(Hp)
    ok = evals > max(evals.max(), 1.0) * 1e-13
    sq = np.sqrt(evals[ok])
    dk = d[keep]
    S = (sq[:, None] * evecs[:, ok].T) * dk[None, :]
    r0 = (evecs[:, ok].T @ gp) / sq
    return LinearPrior(key, x_lin, S, r0)


def navigation_predict(snapshot, imu_tail, gravity, noise=None):
    """Propagate the snapshot state through IMU samples newer than it."""
    from .preintegration import PreintegratedImu

    x = snapshot.state
    samples = [s for s in imu_tail if s.timestamp > x.timestamp]
    if not samples:
        return x
    pre = PreintegratedImu(snapshot.last_imu.shifted(x.timestamp - snapshot.last_imu.timestamp),
                           x.bg, x.ba, noise, track_covariance=False)
    t = x.timestamp
    for s in samples:
        pre.integrate(s, s.timestamp - t)
        t = s.timestamp
    return pre.predict(x, gravity)
