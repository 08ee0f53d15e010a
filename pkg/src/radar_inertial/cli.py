"""Command-line driver: ``rio <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 solver divergence / no convergence.
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigError, RioError
from .evaluation import ate_origin_aligned, rpe_per_meter
from .pipeline import freeze_offset_mode, iterative_offset_refinement, run_odometry
from .scenarios import SWEEP_OFFSETS, agile_config, agile_sensor
from .simulator import SensorSpec, TrajectorySpec, simulate

log = logging.getLogger("rio")


@dataclass(frozen=True)
class SimulationConfig:
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    sensor: SensorSpec = field(default_factory=lambda: agile_sensor(noisy=True))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _pipeline_config(args):
    cfg = agile_config()
    if getattr(args, "config", None):
        cfg = io.load_config(args.config, cfg)
    if getattr(args, "freeze_offset", False):
        cfg = freeze_offset_mode(cfg)
    return cfg.validate()


def _sim_config(args, path):
    cfg = SimulationConfig()
    if path:
        cfg = io.load_config(path, cfg)
    traj, sensor = cfg.trajectory, cfg.sensor
    if args.duration is not None:
        traj = replace(traj, duration=args.duration)
    if args.seed is not None:
        sensor = replace(sensor, seed=args.seed)
    if args.clean:
        sensor = replace(sensor, gyro_noise=0.0, accel_noise=0.0, gyro_walk=0.0, accel_walk=0.0,
                         gyro_bias=(0.0, 0.0, 0.0), accel_bias=(0.0, 0.0, 0.0),
                         doppler_noise=0.0, outlier_ratio=0.0)
    if getattr(args, "offset", None) is not None:
        sensor = replace(sensor, offset=args.offset)
    return SimulationConfig(traj, sensor)


# -- subcommands --------------------------------------------------------------------


def cmd_simulate(args):
    cfg = _sim_config(args, args.config)
    if args.dump_config:
        sys.stdout.write(io.dump_config(cfg))
        return 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = simulate(cfg.trajectory, cfg.sensor)
    io.write_imu_csv(ds.imu, out / "imu.csv")
    io.write_radar_jsonl(ds.radar, out / "radar.jsonl")
    io.export_tum(ds.truth, out / "groundtruth.tum")
    (out / "estimator.cfg").write_text(io.dump_config(agile_config(cfg.sensor.extrinsics)))
    (out / "simulation.cfg").write_text(io.dump_config(cfg))
    print(f"wrote {len(ds.imu)} IMU samples and {len(ds.radar)} radar scans to {out}")
    return 0


def _load_streams(args):
    return io.load_imu_csv(args.imu), io.load_radar_jsonl(args.radar)


def cmd_run(args):
    cfg = _pipeline_config(args)
    if args.dump_config:
        sys.stdout.write(io.dump_config(cfg))
        return 0
    imu, radar = _load_streams(args)
    res = run_odometry(cfg, imu, radar)
    traj = res.navigation if args.navigation else res.keyframes
    io.export_tum(traj, args.trajectory)
    io.write_offset_history(res.offsets, args.offsets)
    print(f"keyframes {len(res.keyframes)}  accepted scans {res.accepted_scans}  "
          f"rejected scans {res.rejected_scans}")
    print(f"converged offset {res.converged_offset(cfg.converge_window) * 1e3:.3f} ms")
    return 0


def cmd_refine(args):
    cfg = _pipeline_config(args)
    if args.dump_config:
        sys.stdout.write(io.dump_config(cfg))
        return 0
    imu, radar = _load_streams(args)
    total, estimates = iterative_offset_refinement(cfg, imu, radar, args.max_iters, args.tolerance)
    for i, e in enumerate(estimates, start=1):
        print(f"iteration {i}: {e * 1e3:.3f} ms")
    print(f"cumulative offset {total * 1e3:.3f} ms")
    return 0


def cmd_eval(args):
    est = io.load_tum(args.est)
    gt = io.load_tum(args.gt)
    ate = ate_origin_aligned(est, gt)
    t_rel, r_rel = rpe_per_meter(est, gt)
    print(f"{'metric':<16}{'value':>14}")
    print(f"{'ATE [m]':<16}{ate:>14.6f}")
    print(f"{'t_rel [m/m]':<16}{t_rel:>14.6f}")
    print(f"{'r_rel [deg/m]':<16}{r_rel:>14.6f}")
    return 0


def cmd_sweep(args):
    cfg = _pipeline_config(args)
    if args.dump_config:
        sys.stdout.write(io.dump_config(cfg))
        return 0
    sim = _sim_config(args, args.sim_config)
    base = simulate(sim.trajectory, replace(sim.sensor, offset=0.0))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    estimates = []
    for off in SWEEP_OFFSETS:
        radar = [s.shifted(off) for s in base.radar]
        res = run_odometry(cfg, base.imu, radar)
        io.write_offset_history(res.offsets, out / f"offset_{off * 1e3:g}ms.csv")
        est = res.converged_offset(cfg.converge_window)
        estimates.append(est)
        print(f"injected {off * 1e3:6.2f} ms  estimated {est * 1e3:7.3f} ms", flush=True)
    steps = np.diff(estimates)
    with open(out / "summary.csv", "w") as fh:
        fh.write("injected_seconds,estimated_seconds\n")
        for off, est in zip(SWEEP_OFFSETS, estimates):
            fh.write(f"{off:.6f},{est:.17g}\n")
    print(f"mean consecutive step {steps.mean() * 1e3:.3f} ms")
    return 0


# -- parser -------------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="rio", description="Radar-inertial odometry with temporal offset estimation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def sim_args(sp):
        sp.add_argument("--config", help="simulation config file (trajectory.* / sensor.* keys)")
        sp.add_argument("--duration", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--clean", action="store_true", help="disable all noise, biases and outliers")

    def est_args(sp):
        sp.add_argument("--config", help="estimator config file (key = value)")
        sp.add_argument("--freeze-offset", action="store_true", help="pin the offset at its initial value")
        sp.add_argument("--dump-config", action="store_true", help="print the effective config and exit")

    sp = sub.add_parser("simulate", help="write synthetic IMU/radar streams and ground truth")
    sim_args(sp)
    sp.add_argument("--offset", type=float, help="injected radar delay [s]")
    sp.add_argument("--out", default="sim")
    sp.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("run", help="run odometry on stream files")
    est_args(sp)
    sp.add_argument("--imu")
    sp.add_argument("--radar")
    sp.add_argument("--trajectory", default="trajectory.tum")
    sp.add_argument("--offsets", default="offsets.csv")
    sp.add_argument("--navigation", action="store_true", help="export the IMU-rate output")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("refine-offset", help="iterative large-offset refinement")
    est_args(sp)
    sp.add_argument("--imu")
    sp.add_argument("--radar")
    sp.add_argument("--max-iters", type=int, default=3)
    sp.add_argument("--tolerance", type=float, default=1e-3)
    sp.set_defaults(func=cmd_refine)

    sp = sub.add_parser("eval", help="ATE and RPE of an estimate against ground truth")
    sp.add_argument("est")
    sp.add_argument("gt")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("convergence-sweep", help="offset traces for a ladder of injected delays")
    est_args(sp)
    sp.add_argument("--sim-config", help="simulation config file for the generated data")
    sp.add_argument("--duration", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--clean", action="store_true")
    sp.add_argument("--out", default="sweep")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_help(sys.stderr)
        return 1
    if args.command in ("run", "refine-offset") and not args.dump_config and not (args.imu and args.radar):
        parser.error(f"{args.command} needs --imu and --radar")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"rio: config error: {exc}", file=sys.stderr)
        return exc.exit_code
    except RioError as exc:
        print(f"rio: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"rio: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
