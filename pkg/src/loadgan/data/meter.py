"""Smart-meter series and the ``timestamp,load_kw`` CSV format."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..errors import DataError

EPOCH = np.datetime64("1970-01-01T00:00:00", "s")


@dataclass(frozen=True)
class CsvSchema:
    timestamp: str = "timestamp"
    load: str = "load_kw"


@dataclass(frozen=True, eq=False)
class MeterSeries:
    """Uniformly spaced UTC readings.  ``timestamps`` is ``datetime64[s]`` (naive UTC)."""

    timestamps: np.ndarray
    loads: np.ndarray
    resolution: int

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[s]")
        x = np.asarray(self.loads, dtype=np.float64)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "loads", x)
        if ts.shape != x.shape or ts.ndim != 1:
            raise DataError("timestamps and loads must be 1-D arrays of equal length")
        if self.resolution <= 0:
            raise DataError("resolution must be a positive number of seconds")
        if not np.all(np.isfinite(x)) or np.any(x < 0):
            bad = np.flatnonzero(~np.isfinite(x) | (x < 0))[:5]
            raise DataError(f"loads must be finite and nonnegative (bad indices {bad.tolist()})")
        steps = np.diff(ts).astype(np.int64)
        if np.any(steps <= 0):
            raise DataError("timestamps must be strictly increasing (duplicate or unsorted rows)")
        gaps = np.flatnonzero(steps != self.resolution)
        if gaps.size:
            listed = ", ".join(f"{ts[i]} -> {ts[i + 1]}" for i in gaps[:5])
            raise DataError(f"non-uniform spacing ({gaps.size} gaps at resolution "
                            f"{self.resolution}s): {listed}")

    def __len__(self):
        return self.loads.size

    def __eq__(self, other):
        return (isinstance(other, MeterSeries) and self.resolution == other.resolution
                and np.array_equal(self.timestamps, other.timestamps)
                and np.array_equal(self.loads, other.loads))


def parse_timestamp(text: str) -> np.datetime64:
    """ISO-8601 to naive-UTC ``datetime64[s]``; offset-free input is taken as UTC."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(dt.replace(microsecond=0), "s")


def format_timestamp(ts: np.datetime64) -> str:
    return str(np.datetime64(ts, "s")) + "Z"


def load_meter_csv(path, schema: CsvSchema = CsvSchema(), resolution: int | None = None) -> MeterSeries:
    path = Path(path)
    stamps, loads = [], []
    with path.open(newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        try:
            ti, li = header.index(schema.timestamp), header.index(schema.load)
        except ValueError:
            raise DataError(f"{path}: header must contain {schema.timestamp!r} and "
                            f"{schema.load!r}, got {header}") from None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                stamps.append(parse_timestamp(row[ti]))
                loads.append(float(row[li]))
            except (IndexError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: malformed row {row!r} ({exc})") from None
    if not stamps:
        raise DataError(f"{path}: no data rows")
    ts = np.array(stamps, dtype="datetime64[s]")
    x = np.array(loads)
    order = np.argsort(ts, kind="stable")
    ts, x = ts[order], x[order]
    if resolution is None:
        if ts.size < 2:
            raise DataError(f"{path}: cannot infer resolution from a single row")
        steps = np.diff(ts).astype(np.int64)
        positive = steps[steps > 0]
        resolution = int(np.min(positive)) if positive.size else 0
        if resolution == 0:
            raise DataError(f"{path}: duplicate timestamps only")
    return MeterSeries(ts, x, int(resolution))


def write_meter_csv(series: MeterSeries, path, schema: CsvSchema = CsvSchema()):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([schema.timestamp, schema.load])
        for t, v in zip(series.timestamps, series.loads):
            w.writerow([format_timestamp(t), repr(float(v))])
