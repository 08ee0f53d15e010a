"""Walk through online temporal-offset estimation on simulated data.

Run with ``python demos/offset_convergence.py [--duration 60]``.
"""

# %% [markdown]
# A radar whose clock lags the IMU reports each Doppler scan a few
# milliseconds late. During fast motion the measured ego-velocity then
# belongs to an earlier instant, and the smoother sees a residual that grows
# with acceleration. Estimating the lag as a state removes most of it.

# %%
import argparse

import numpy as np

from radar_inertial.evaluation import ate_origin_aligned
from radar_inertial.pipeline import freeze_offset_mode, run_odometry
from radar_inertial.scenarios import SWEEP_OFFSETS, agile_config, agile_dataset

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--duration", type=float, default=30.0)
parser.add_argument("--seed", type=int, default=7)
args = parser.parse_args()

# %% [markdown]
# One simulated sequence: a 5 s stationary hold, then multi-axis
# oscillation. The radar stream is re-stamped for each injected delay, so
# every run sees identical measurement content.

# %%
base = agile_dataset(0.0, noisy=True, duration=args.duration, seed=args.seed)
print(f"{len(base.imu)} IMU samples, {len(base.radar)} radar scans")

# %%
cfg = agile_config()
estimates = []
for off in SWEEP_OFFSETS:
    res = run_odometry(cfg, base.imu, [s.shifted(off) for s in base.radar])
    est = res.converged_offset(cfg.converge_window)
    estimates.append(est)
    hold = res.offsets[res.offsets[:, 0] <= 5.0, 1]
    print(f"injected {off * 1e3:5.1f} ms -> estimated {est * 1e3:6.2f} ms "
          f"(spread during the hold {np.ptp(hold) * 1e3:.2f} ms)")
print(f"mean step between runs {np.diff(estimates).mean() * 1e3:.2f} ms (true step 2.5 ms)")

# %% [markdown]
# While the platform is still, the offset has no lever: its Jacobian is the
# gravity-compensated acceleration, which is zero apart from noise. The
# estimate wanders until motion starts and only then locks on.
#
# Finally compare trajectory accuracy with the offset estimated and pinned.

# %%
radar = [s.shifted(0.010) for s in base.radar]
for name, c in (("estimated", cfg), ("frozen", freeze_offset_mode(cfg))):
    res = run_odometry(c, base.imu, radar)
    print(f"{name:>9}: ATE {ate_origin_aligned(res.navigation, base.truth):.4f} m")
