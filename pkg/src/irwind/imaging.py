"""Frame/sequence ingestion, temperature normalization and weather alignment.

On-disk layout of a sequence directory:

* ``sequence.csv``      manifest, columns ``index,timestamp,sun_elevation_deg,sun_azimuth_deg``
* ``frame_<k:05d>.csv`` one per manifest row, M rows of N comma-separated
  integers in centikelvin (value / 100 = kelvin)
* ``mask_<k:05d>.csv``  optional binary cloud masks, all frames or none
* ``weather.csv``       columns ``timestamp,pressure_hpa,air_temp_k,dew_point_k,humidity``
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateRangeError,
    ExtrapolationError,
    FormatError,
    SequenceError,
)

# Normalized temperatures are clamped away from {0, 1}: the beta density
# used downstream is undefined at the endpoints.
CLAMP_EPS = 1e-6


@dataclass(frozen=True)
class IRFrame:
    """One radiometric infrared frame: temperatures in kelvin plus metadata."""

    temps: np.ndarray  # (M, N) kelvin
    timestamp: float  # seconds since epoch
    sun_elevation: float  # degrees
    sun_azimuth: float  # degrees
    index: int  # position in the sequence

    @property
    def shape(self) -> tuple[int, int]:
        return self.temps.shape


@dataclass(frozen=True)
class WeatherRecord:
    """Ground weather-station sample."""

    timestamp: float  # seconds
    pressure: float  # hPa
    air_temp: float  # kelvin
    dew_point: float  # kelvin
    humidity: float  # fraction in [0, 1]

    def __post_init__(self):
        if self.dew_point > self.air_temp + 1e-9:
            raise FormatError(
                f"dew point {self.dew_point} K above air temperature {self.air_temp} K"
            )
        if not 0.0 <= self.humidity <= 1.0:
            raise FormatError(f"humidity {self.humidity} outside [0, 1]")


def _read_grid(path: Path) -> np.ndarray:
    """Read a rectangular CSV of numbers; raise FormatError on ragged rows."""
    rows = []
    try:
        with open(path, newline="") as fh:
            for line in csv.reader(fh):
                if not line:
                    continue
                rows.append([float(v) for v in line])
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot parse {path}: {exc}") from exc
    if not rows:
        raise FormatError(f"empty frame file {path}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError(f"ragged rows in {path}")
    return np.asarray(rows, dtype=float)


def load_sequence(path: str | Path) -> tuple[list[IRFrame], list[np.ndarray] | None]:
    """Load a sequence directory into time-sorted frames plus optional masks.

    Frames are sorted by manifest timestamp regardless of row order.  The
    index column must be a contiguous 0..n-1 set and masks must exist for
    every frame or for none.
    """
    path = Path(path)
    manifest = path / "sequence.csv"
    if not manifest.is_file():
        raise SequenceError(f"no sequence.csv in {path}")
    entries = []
    with open(manifest, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                entries.append(
                    (
                        int(row["index"]),
                        float(row["timestamp"]),
                        float(row["sun_elevation_deg"]),
                        float(row["sun_azimuth_deg"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise FormatError(f"bad manifest row {row!r}: {exc}") from exc
    if not entries:
        raise SequenceError(f"empty manifest in {path}")

    entries.sort(key=lambda e: e[1])
    timestamps = [e[1] for e in entries]
    if any(t1 <= t0 for t0, t1 in zip(timestamps, timestamps[1:])):
        raise SequenceError("timestamps are not strictly increasing")
    indices = sorted(e[0] for e in entries)
    if indices != list(range(len(entries))):
        raise SequenceError(f"frame indices not contiguous: {indices}")

    frames = []
    shape = None
    for k, ts, elev, azim in entries:
        grid = _read_grid(path / f"frame_{k:05d}.csv") / 100.0  # centikelvin -> K
        if shape is None:
            shape = grid.shape
        elif grid.shape != shape:
            raise FormatError(f"frame {k} shape {grid.shape} != {shape}")
        if not np.all(np.isfinite(grid)) or np.any(grid <= 0):
            raise FormatError(f"frame {k} has non-finite or non-positive temperatures")
        frames.append(
            IRFrame(temps=grid, timestamp=ts, sun_elevation=elev, sun_azimuth=azim, index=k)
        )

    mask_files = [path / f"mask_{f.index:05d}.csv" for f in frames]
    present = [p.is_file() for p in mask_files]
    if any(present) and not all(present):
        raise SequenceError("cloud masks present for some frames but not all")
    masks = None
    if all(present):
        masks = []
        for p in mask_files:
            m = _read_grid(p)
            if m.shape != shape or not np.isin(m, (0.0, 1.0)).all():
                raise FormatError(f"mask {p} is not a binary grid of shape {shape}")
            masks.append(m.astype(np.uint8))
    return frames, masks


def normalize(frame: IRFrame | np.ndarray) -> np.ndarray:
    """Min-max map of frame temperatures onto [0, 1], clamped into (0, 1).

    Raises DegenerateRangeError for a constant frame: its mixture fit
    would be meaningless downstream.
    """
    temps = frame.temps if isinstance(frame, IRFrame) else np.asarray(frame, dtype=float)
    lo, hi = float(temps.min()), float(temps.max())
    if hi <= lo:
        raise DegenerateRangeError(f"constant frame at {lo} K")
    tbar = (temps - lo) / (hi - lo)
    return np.clip(tbar, CLAMP_EPS, 1.0 - CLAMP_EPS)


def to_intensity(frame: IRFrame | np.ndarray) -> np.ndarray:
    """8-bit-range intensities: the same min-max normalization scaled by 255.

    The exact transform to intensity units is an assumption of this
    implementation; the differencing downstream only needs a fixed
    monotone map.
    """
    temps = frame.temps if isinstance(frame, IRFrame) else np.asarray(frame, dtype=float)
    lo, hi = float(temps.min()), float(temps.max())
    if hi <= lo:
        raise DegenerateRangeError(f"constant frame at {lo} K")
    return (temps - lo) * (255.0 / (hi - lo))


def load_weather(path: str | Path) -> list[WeatherRecord]:
    """Read weather.csv into records sorted by timestamp."""
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                records.append(
                    WeatherRecord(
                        timestamp=float(row["timestamp"]),
                        pressure=float(row["pressure_hpa"]),
                        air_temp=float(row["air_temp_k"]),
                        dew_point=float(row["dew_point_k"]),
                        humidity=float(row["humidity"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise FormatError(f"bad weather row {row!r}: {exc}") from exc
    records.sort(key=lambda r: r.timestamp)
    return records


def interpolate_weather(records: list[WeatherRecord], t: float) -> WeatherRecord:
    """Per-field linear interpolation of the station records at time t.

    The station cadence (10 min in the reference setup) is much coarser
    than the frame cadence, so every frame gets its own interpolated record.
    """
    if not records:
        raise ExtrapolationError("no weather records")
    ts = np.array([r.timestamp for r in records])
    if t < ts[0] or t > ts[-1]:
        raise ExtrapolationError(f"t={t} outside weather record range [{ts[0]}, {ts[-1]}]")

    def interp(field):
        return float(np.interp(t, ts, np.array([getattr(r, field) for r in records])))

    return WeatherRecord(
        timestamp=t,
        pressure=interp("pressure"),
        air_temp=interp("air_temp"),
        dew_point=interp("dew_point"),
        humidity=interp("humidity"),
    )


def fallback_cloud_mask(
    tbar: np.ndarray, heights: np.ndarray, ceiling_m: float = 12_000.0, quantile: float = 0.5
) -> np.ndarray:
    """Threshold mask used when no segmentation masks ship with a sequence.

    A pixel counts as cloud when it sits below the ceiling and is warmer
    than the frame's clear-sky quantile (clear sky is cold in the
    longwave band).
    """
    warm = tbar > np.quantile(tbar, quantile)
    return ((heights < ceiling_m) & warm).astype(np.uint8)
