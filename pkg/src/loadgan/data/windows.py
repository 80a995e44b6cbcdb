"""Season/hour-of-day selection of training samples."""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, EmptyDatasetError
from .meter import MeterSeries

log = logging.getLogger(__name__)


def _as_date(d) -> dt.date:
    if isinstance(d, dt.datetime):
        return d.date()
    if isinstance(d, dt.date):
        return d
    return dt.date.fromisoformat(str(d))


@dataclass(frozen=True)
class WindowFilter:
    """Inclusive local-date range and half-open local-hour range ``[hour_start, hour_end)``.

    ``utc_offset_hours`` converts UTC timestamps to the site-local clock the
    hours refer to.
    """

    date_start: dt.date
    date_end: dt.date
    hour_start: float = 0.0
    hour_end: float = 24.0
    utc_offset_hours: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "date_start", _as_date(self.date_start))
        object.__setattr__(self, "date_end", _as_date(self.date_end))
        if self.date_start > self.date_end:
            raise ConfigError("date_start must not be after date_end")
        if not 0 <= self.hour_start < self.hour_end <= 24:
            raise ConfigError("hours must satisfy 0 <= hour_start < hour_end <= 24")


def filter_window(series: MeterSeries, filt: WindowFilter) -> np.ndarray:
    """Readings inside the window, one row per local day.

    Days whose window is incomplete (series starts or ends inside it) are dropped.
    """
    window_s = round((filt.hour_end - filt.hour_start) * 3600)
    if window_s % series.resolution:
        raise ConfigError(f"resolution {series.resolution}s does not divide the "
                          f"{window_s}s window")
    per_day = window_s // series.resolution
    local = series.timestamps + np.timedelta64(round(filt.utc_offset_hours * 3600), "s")
    days = local.astype("datetime64[D]")
    sec_of_day = (local - days).astype(np.int64)
    start_d = np.datetime64(filt.date_start, "D")
    end_d = np.datetime64(filt.date_end, "D")
    keep = ((days >= start_d) & (days <= end_d)
            & (sec_of_day >= filt.hour_start * 3600) & (sec_of_day < filt.hour_end * 3600))
    if not keep.any():
        raise EmptyDatasetError("window filter selected no readings")
    kd, kx = days[keep], series.loads[keep]
    uniq, starts, counts = np.unique(kd, return_index=True, return_counts=True)
    full = counts == per_day
    if not full.all():
        log.info("dropping %d incomplete day(s) from the window", int((~full).sum()))
    rows = [kx[i:i + per_day] for i, ok in zip(starts, full) if ok]
    if not rows:
        raise EmptyDatasetError("window filter selected no complete day")
    return np.vstack(rows)


def to_samples(windows: np.ndarray, s: int) -> np.ndarray:
    """Split per-day window rows into consecutive training samples of width ``s``."""
    windows = np.atleast_2d(windows)
    if windows.shape[1] % s:
        raise ConfigError(f"window of {windows.shape[1]} readings does not split into samples of {s}")
    return windows.reshape(-1, s)
