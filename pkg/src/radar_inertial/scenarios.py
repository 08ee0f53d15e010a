"""Ready-made simulator scenarios and matching estimator settings.

The agile scenario is the workhorse for the temporal-offset experiments: a
5 s stationary hold followed by fast multi-axis oscillation (peak
acceleration ~10 m/s^2, peak body rate ~1.5 rad/s).
"""

from dataclasses import replace

import numpy as np

from .ego_velocity import FrontEndConfig
from .pipeline import PipelineConfig
from .simulator import SensorSpec, TrajectorySpec, simulate
from .state import Extrinsics

SWEEP_OFFSETS = (0.0025, 0.005, 0.0075, 0.010, 0.0125, 0.015)


def agile_trajectory(duration=60.0):
    return TrajectorySpec(duration=duration, mode="stationary-then-agile")


def agile_sensor(offset=0.0, noisy=True, seed=7):
    if noisy:
        return SensorSpec.noisy(offset=offset, seed=seed)
    return SensorSpec(offset=offset, seed=seed,
                      extrinsics=Extrinsics(np.eye(3), (0.10, 0.0, 0.05)))


def agile_dataset(offset=0.0, noisy=True, duration=60.0, seed=7):
    return simulate(agile_trajectory(duration), agile_sensor(offset, noisy, seed))


def agile_config(extrinsics=None):
    """Estimator configuration matching :func:`agile_sensor`.

    The sliding-average gate is widened because velocity swings by more than
    2 m/s within half a second on this profile.
    """
    ex = extrinsics or Extrinsics(np.eye(3), (0.10, 0.0, 0.05))
    return PipelineConfig(extrinsics=ex, front_end=replace(FrontEndConfig(), gate=5.0))
