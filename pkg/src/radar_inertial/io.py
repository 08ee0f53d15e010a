"""Stream files, trajectory export and flat configuration files.

Formats:

* IMU CSV, header ``t,gx,gy,gz,ax,ay,az``, SI units.
* Radar JSON lines, one scan per line:
  ``{"t": ..., "targets": [{"r": [x, y, z], "range": ..., "doppler": ...}]}``.
* TUM trajectories, ``t px py pz qx qy qz qw``.
* Offset history CSV, header ``t,offset_seconds``.
* Config files: ``dotted.key = value`` lines, values in JSON syntax.
"""

import csv
import dataclasses
import json

import numpy as np

from .errors import BadDirection, ConfigError, NonMonotonicTime, ParseError
from .evaluation import TrajectoryRecord
from .geometry import quaternion_to_rotation, rotation_to_quaternion
from .state import ImuSample, RadarScan, RadarTarget

IMU_HEADER = ["t", "gx", "gy", "gz", "ax", "ay", "az"]
OFFSET_HEADER = ["t", "offset_seconds"]
DIRECTION_TOLERANCE = 1e-3


def _g(x):
    return format(float(x) + 0.0, ".17g")  # + 0.0 folds -0.0 into 0.0


# -- IMU ------------------------------------------------------------------------


def write_imu_csv(samples, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(IMU_HEADER)
        for s in samples:
            w.writerow([_g(s.timestamp)] + [_g(x) for x in s.gyro] + [_g(x) for x in s.accel])


def load_imu_csv(path):
    out = []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or [h.strip() for h in header] != IMU_HEADER:
            raise ParseError(f"{path}:1: expected header {','.join(IMU_HEADER)}")
        for lineno, row in enumerate(rows, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 7:
                raise ParseError(f"{path}:{lineno}: expected 7 columns, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if not np.all(np.isfinite(vals)):
                raise ParseError(f"{path}:{lineno}: non-finite value")
            if out and vals[0] <= out[-1].timestamp:
                raise NonMonotonicTime(f"{path}:{lineno}: timestamp {vals[0]} is not increasing")
            out.append(ImuSample(vals[0], vals[1:4], vals[4:7]))
    return out


# -- radar ------------------------------------------------------------------------


def _direction(raw, where):
    try:
        r = np.asarray(raw, dtype=float).reshape(3)
    except (TypeError, ValueError):
        raise ParseError(f"{where}: direction must be 3 numbers") from None
    n = np.linalg.norm(r)
    if not abs(n - 1.0) <= DIRECTION_TOLERANCE:
        raise BadDirection(f"{where}: direction norm {n:.6f} is not unit")
    return r / n


def load_radar_jsonl(path):
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
                t = float(obj["t"])
                raw = obj["targets"]
                targets = tuple(
                    RadarTarget(_direction(tg["r"], where), float(tg["doppler"]),
                                float(tg.get("range", float("nan"))))
                    for tg in raw
                )
            except BadDirection:
                raise
            except (ValueError, KeyError, TypeError, ParseError) as exc:
                raise ParseError(f"{where}: {exc}") from None
            if out and t <= out[-1].timestamp:
                raise NonMonotonicTime(f"{where}: scan stamp {t} is not increasing")
            out.append(RadarScan(t, targets))
    return out


def write_radar_jsonl(scans, path):
    with open(path, "w") as fh:
        for s in scans:
            targets = [{"r": [float(x) for x in tg.direction], "range": float(tg.range),
                        "doppler": float(tg.doppler)} for tg in s.targets]
            fh.write(json.dumps({"t": float(s.timestamp), "targets": targets}) + "\n")


# -- trajectories ---------------------------------------------------------------------


def export_tum(traj, path):
    with open(path, "w") as fh:
        for t, p, R in zip(traj.t, traj.p, traj.R):
            q = rotation_to_quaternion(R)
            q = q / np.linalg.norm(q)
            fields = [f"{t:.6f}"] + [_g(x) for x in p] + [_g(x) for x in q]
            fh.write(" ".join(fields) + "\n")


def load_tum(path):
    t, p, R = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise ParseError(f"{path}:{lineno}: expected 8 fields, got {len(parts)}")
            try:
                vals = [float(x) for x in parts]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            t.append(vals[0])
            p.append(vals[1:4])
            R.append(quaternion_to_rotation(vals[4:8]))
    if not t:
        raise ParseError(f"{path}: no poses")
    return TrajectoryRecord(np.array(t), np.array(p), np.array(R))


def write_offset_history(offsets, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(OFFSET_HEADER)
        for t, o in np.asarray(offsets, dtype=float).reshape(-1, 2):
            w.writerow([f"{t:.6f}", _g(o)])


def load_offset_history(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != OFFSET_HEADER:
        raise ParseError(f"{path}:1: expected header {','.join(OFFSET_HEADER)}")
    try:
        return np.array([[float(a), float(b)] for a, b in rows[1:]]).reshape(-1, 2)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


# -- configuration ----------------------------------------------------------------------


def _plain(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def flatten_config(obj, prefix=""):
    """``{dotted_key: value}`` for a (nested) dataclass instance."""
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        key = prefix + f.name
        if dataclasses.is_dataclass(value):
            out.update(flatten_config(value, key + "."))
        else:
            out[key] = _plain(value)
    return out


def dump_config(obj):
    return "".join(f"{k} = {json.dumps(v)}\n" for k, v in flatten_config(obj).items())


def parse_config_text(text, source="<config>"):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        try:
            values[key] = json.loads(raw)
        except json.JSONDecodeError:
            values[key] = raw
    return values


def apply_config(obj, values, prefix=""):
    """Copy of dataclass ``obj`` with dotted ``values`` applied.

    Unknown keys raise :class:`ConfigError`.
    """
    values = dict(values)
    changes = {}
    for f in dataclasses.fields(obj):
        key = prefix + f.name
        current = getattr(obj, f.name)
        if dataclasses.is_dataclass(current):
            sub = {k: v for k, v in values.items() if k.startswith(key + ".")}
            if sub:
                changes[f.name] = apply_config(current, sub, key + ".")
                for k in sub:
                    values.pop(k)
        elif key in values:
            v = values.pop(key)
            if isinstance(current, tuple) and isinstance(v, list):
                v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
            elif isinstance(current, float) and isinstance(v, int) and not isinstance(v, bool):
                v = float(v)
            changes[f.name] = v
    if values:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(values))}")
    try:
        return dataclasses.replace(obj, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, default):
    with open(path) as fh:
        return apply_config(default, parse_config_text(fh.read(), str(path)))
