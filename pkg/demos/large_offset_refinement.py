"""Recover a 100 ms radar delay by repeated re-stamping.

Run with ``python demos/large_offset_refinement.py``.
"""

# %% [markdown]
# The offset factor is a first-order correction, so a delay of a tenth of a
# second is only partly absorbed in one pass. Shifting the radar stamps by
# the running estimate and re-running the odometry shrinks the residual
# delay each time.

# %%
import argparse

from radar_inertial.pipeline import iterative_offset_refinement
from radar_inertial.scenarios import agile_config, agile_dataset

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--offset", type=float, default=0.100)
parser.add_argument("--duration", type=float, default=60.0)
args = parser.parse_args()

ds = agile_dataset(args.offset, noisy=True, duration=args.duration)
total, estimates = iterative_offset_refinement(agile_config(), ds.imu, ds.radar, max_iters=3)

# %%
running = 0.0
for i, e in enumerate(estimates, start=1):
    running += e
    print(f"pass {i}: residual delay estimate {e * 1e3:7.2f} ms, cumulative {running * 1e3:7.2f} ms")
print(f"injected {args.offset * 1e3:.2f} ms, recovered {total * 1e3:.2f} ms")
