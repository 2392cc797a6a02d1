"""Raw accelerometer logs -> validated sensor streams -> fixed-size windows.

Log rows look like ``sensor,timestamp,x,y,z`` with the timestamp in integer
microseconds and accelerations in g.  Streams are held as numpy arrays rather
than per-row objects; a one-minute experiment is ~96k rows.
"""
from __future__ import annotations

import enum
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    ConfigInvalid,
    MalformedLine,
    MissingSensor,
    RangeViolation,
    TimestampOrder,
    UnknownSensor,
)

SAMPLING_RATE_HZ = 800
SENSOR_RANGE_G = 8.0
WINDOW_SIZE = 800
HEADER = ("sensor", "timestamp", "x", "y", "z")


class Sensor(str, enum.Enum):
    CENTRAL = "Central"
    OUTER = "Outer"

    @classmethod
    def parse(cls, token):
        key = token.strip().lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise UnknownSensor(f"unknown sensor {token.strip()!r}")


class BladeCondition(str, enum.Enum):
    NORMAL = "Normal"
    DEFECT_TYPE1 = "DefectType1"
    DEFECT_TYPE2 = "DefectType2"
    DEFECT_TYPE3 = "DefectType3"

    @property
    def label(self):
        return 0 if self is BladeCondition.NORMAL else 1


@dataclass(frozen=True)
class RecordFormat:
    delimiter: str = ","
    max_abs_g: float = SENSOR_RANGE_G


DEFAULT_FORMAT = RecordFormat()


@dataclass(frozen=True)
class VibrationRecord:
    sensor: Sensor
    timestamp: int
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class ExperimentMeta:
    experiment_id: str
    blade_condition: BladeCondition
    blade_instance: int | None = None
    duration_s: float = 60.0

    def __post_init__(self):
        object.__setattr__(self, "blade_condition", BladeCondition(self.blade_condition))
        if self.blade_condition is not BladeCondition.NORMAL and self.blade_instance not in (1, 2):
            raise ConfigInvalid(
                f"{self.experiment_id}: defective blades need blade_instance 1 or 2, "
                f"got {self.blade_instance!r}"
            )

    @property
    def label(self):
        return self.blade_condition.label


@dataclass
class SensorStream:
    """All samples of one sensor in one experiment, timestamp ordered."""

    sensor: Sensor
    timestamps: np.ndarray  # int64, microseconds
    xyz: np.ndarray  # (n, 3) float64, g

    def __len__(self):
        return len(self.timestamps)

    @classmethod
    def from_records(cls, sensor, records):
        records = [r for r in records if r.sensor is sensor]
        ts = np.array([r.timestamp for r in records], dtype=np.int64)
        xyz = np.array([(r.x, r.y, r.z) for r in records], dtype=np.float64).reshape(-1, 3)
        return cls(sensor, ts, xyz)


@dataclass
class Experiment:
    meta: ExperimentMeta
    streams: dict = field(default_factory=dict)  # Sensor -> SensorStream

    @property
    def counts(self):
        return {s: len(st) for s, st in self.streams.items()}


@dataclass
class Window:
    sensor: Sensor
    start_timestamp: int
    x_series: np.ndarray
    y_series: np.ndarray
    z_series: np.ndarray
    experiment_id: str
    label: int

    def as_array(self):
        return np.stack([self.x_series, self.y_series, self.z_series])


@dataclass
class WindowPair:
    central: Window
    outer: Window
    experiment_id: str
    label: int

    def as_array(self):
        """(2, 3, W) array: sensor, axis, sample."""
        return np.stack([self.central.as_array(), self.outer.as_array()])


def is_header(line, fmt=DEFAULT_FORMAT):
    parts = [p.strip().lower() for p in line.strip().split(fmt.delimiter)]
    return tuple(parts) == HEADER


def _parse_fields(parts, fmt, lineno=None):
    if len(parts) != 5:
        raise MalformedLine(f"expected 5 fields, got {len(parts)}", lineno)
    try:
        sensor = Sensor.parse(parts[0])
    except UnknownSensor as exc:
        raise UnknownSensor(str(exc), lineno) from None
    try:
        ts = int(parts[1])
        x, y, z = float(parts[2]), float(parts[3]), float(parts[4])
    except ValueError:
        raise MalformedLine("non-numeric field", lineno) from None
    for v in (x, y, z):
        if not math.isfinite(v):
            raise MalformedLine("non-finite value", lineno)
        if abs(v) > fmt.max_abs_g:
            raise RangeViolation(f"|{v}| exceeds {fmt.max_abs_g} g", lineno)
    return sensor, ts, x, y, z


def parse_record_line(line, fmt=DEFAULT_FORMAT):
    """Parse one CSV row into a :class:`VibrationRecord`.

    The sensor token is matched case-insensitively.  Out-of-range
    accelerations raise :class:`RangeViolation`; they are never clamped.
    """
    return VibrationRecord(*_parse_fields(line.strip().split(fmt.delimiter), fmt))


def format_record_line(record, fmt=DEFAULT_FORMAT, precision=None):
    """Inverse of :func:`parse_record_line`.

    With ``precision=None`` floats are written with ``repr`` so that parsing
    the line back gives exactly the same values.
    """
    if precision is None:
        vals = [repr(float(v)) for v in (record.x, record.y, record.z)]
    else:
        vals = [f"{v:.{precision}f}" for v in (record.x, record.y, record.z)]
    return fmt.delimiter.join([record.sensor.value, str(int(record.timestamp)), *vals])


def load_experiment(path, meta, fmt=DEFAULT_FORMAT):
    """Read one experiment log and split it into per-sensor streams.

    Parse errors abort the load and carry the offending 1-based line number.
    """
    cols = {s: ([], []) for s in Sensor}
    last_ts = {s: None for s in Sensor}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            if lineno == 1 and is_header(line, fmt):
                continue
            sensor, ts, x, y, z = _parse_fields(line.rstrip("\r\n").split(fmt.delimiter), fmt, lineno)
            prev = last_ts[sensor]
            if prev is not None and ts < prev:
                raise TimestampOrder(
                    f"{sensor.value} timestamp {ts} precedes {prev}", lineno
                )
            last_ts[sensor] = ts
            cols[sensor][0].append(ts)
            cols[sensor][1].append((x, y, z))
    exp = Experiment(meta)
    for sensor, (ts, xyz) in cols.items():
        if ts:
            exp.streams[sensor] = SensorStream(
                sensor,
                np.asarray(ts, dtype=np.int64),
                np.asarray(xyz, dtype=np.float64).reshape(-1, 3),
            )
    return exp


def window_stream(stream, window_size=WINDOW_SIZE, experiment_id="", label=0):
    """Cut a stream into consecutive non-overlapping windows.

    The trailing partial group (``len(stream) % window_size`` samples) is
    dropped.
    """
    if window_size < 2:
        raise ValueError("window_size must be >= 2")
    n_windows = len(stream) // window_size
    windows = []
    for k in range(n_windows):
        lo, hi = k * window_size, (k + 1) * window_size
        block = stream.xyz[lo:hi]
        windows.append(
            Window(
                sensor=stream.sensor,
                start_timestamp=int(stream.timestamps[lo]),
                x_series=block[:, 0],
                y_series=block[:, 1],
                z_series=block[:, 2],
                experiment_id=experiment_id,
                label=label,
            )
        )
    return windows


def pair_windows(experiment, window_size=WINDOW_SIZE):
    meta = experiment.meta
    missing = [s.value for s in Sensor if len(experiment.streams.get(s, ())) == 0]
    if missing:
        raise MissingSensor(f"{meta.experiment_id}: no records for {', '.join(missing)}")
    central = window_stream(experiment.streams[Sensor.CENTRAL], window_size, meta.experiment_id, meta.label)
    outer = window_stream(experiment.streams[Sensor.OUTER], window_size, meta.experiment_id, meta.label)
    return [WindowPair(c, o, meta.experiment_id, meta.label) for c, o in zip(central, outer)]


def assemble_corpus(experiments, window_size=WINDOW_SIZE, fmt=DEFAULT_FORMAT, n_workers=1):
    """Load every ``(path, meta)`` pair and return index-paired windows.

    Experiments are independent, so ``n_workers > 1`` loads them on a thread
    pool; output order always follows the input order.
    """
    experiments = list(experiments)

    def one(item):
        path, meta = item
        return pair_windows(load_experiment(path, meta, fmt), window_size)

    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            chunks = list(pool.map(one, experiments))
    else:
        chunks = [one(item) for item in experiments]
    return [pair for chunk in chunks for pair in chunk]


def stack_pairs(pairs):
    """Window pairs -> ``(windows, labels, experiment_ids)``.

    ``windows`` has shape (n, 2, 3, W): pair, sensor (Central, Outer), axis.
    """
    if not pairs:
        return np.empty((0, 2, 3, 0)), np.empty(0, dtype=int), np.empty(0, dtype=object)
    windows = np.stack([p.as_array() for p in pairs])
    labels = np.array([p.label for p in pairs], dtype=int)
    ids = np.array([p.experiment_id for p in pairs], dtype=object)
    return windows, labels, ids


def read_manifest(path):
    """JSON array of ``{path, experiment_id, blade_condition, blade_instance}``.

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"manifest {path}: {exc}") from None
    if not isinstance(entries, list):
        raise ConfigInvalid(f"manifest {path}: expected a JSON array")
    out = []
    for entry in entries:
        try:
            meta = ExperimentMeta(
                experiment_id=str(entry["experiment_id"]),
                blade_condition=BladeCondition(entry["blade_condition"]),
                blade_instance=entry.get("blade_instance"),
                duration_s=float(entry.get("duration_s", 60.0)),
            )
            file_path = Path(entry["path"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigInvalid(f"manifest {path}: bad entry {entry!r}: {exc}") from None
        if not file_path.is_absolute():
            file_path = path.parent / file_path
        out.append((file_path, meta))
    return out


def write_manifest(path, entries):
    """Write ``[(file_path, meta), ...]`` with paths relative to the manifest."""
    path = Path(path)
    rows = []
    for file_path, meta in entries:
        rel = os.path.relpath(Path(file_path).resolve(), path.parent.resolve())
        rows.append(
            {
                "path": rel,
                "experiment_id": meta.experiment_id,
                "blade_condition": meta.blade_condition.value,
                "blade_instance": meta.blade_instance,
            }
        )
    path.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
