"""Geo-tagged count observations and their CSV format.

CSV layout (header required)::

    x,y,duration_s,counts
    10.0,20.0,600,1800
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CSV_HEADER = ["x", "y", "duration_s", "counts"]


class ObservationParseError(ValueError):
    """Malformed observation file; message carries the offending line number."""


class ObservationValidationError(ValueError):
    pass


@dataclass(frozen=True)
class ObservationRecord:
    x: float
    y: float
    duration: float
    counts: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ObservationValidationError(f"duration must be > 0, got {self.duration}")
        if not self.counts >= 0:
            raise ObservationValidationError(f"counts must be >= 0, got {self.counts}")

    @property
    def rate(self):
        return self.counts / self.duration


def observation_arrays(obs):
    """Split observations into ``(xy, counts, durations)`` float arrays."""
    xy = np.array([[o.x, o.y] for o in obs], dtype=float).reshape(-1, 2)
    counts = np.array([o.counts for o in obs], dtype=float)
    durations = np.array([o.duration for o in obs], dtype=float)
    return xy, counts, durations


def merge_colocated(obs):
    """Merge observations sharing a location by summing counts and durations.

    The first occurrence fixes the position in the output order.
    """
    merged = {}
    for o in obs:
        key = (float(o.x), float(o.y))
        if key in merged:
            c, t = merged[key]
            merged[key] = (c + o.counts, t + o.duration)
        else:
            merged[key] = (o.counts, o.duration)
    return [ObservationRecord(x, y, t, c) for (x, y), (c, t) in merged.items()]


def _parse_number(text, lineno, name):
    try:
        value = float(text)
    except ValueError:
        raise ObservationParseError(f"line {lineno}: {name}={text!r} is not a number") from None
    if not np.isfinite(value):
        raise ObservationParseError(f"line {lineno}: {name}={text!r} is not finite")
    return value


def load_observations_csv(path):
    path = Path(path)
    records = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise ObservationParseError(
                f"line 1: expected header {','.join(CSV_HEADER)!r}, got {header!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 4:
                raise ObservationParseError(f"line {lineno}: expected 4 fields, got {len(row)}")
            x, y, duration, counts = (
                _parse_number(v.strip(), lineno, name) for v, name in zip(row, CSV_HEADER)
            )
            if duration <= 0 or counts < 0:
                raise ObservationValidationError(
                    f"line {lineno}: duration must be > 0 and counts >= 0"
                )
            records.append(ObservationRecord(x, y, duration, counts))
    return records


def write_observations_csv(path, obs):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for o in obs:
            writer.writerow([repr(float(o.x)), repr(float(o.y)), repr(float(o.duration)), _fmt_count(o.counts)])


def _fmt_count(c):
    c = float(c)
    return str(int(c)) if c.is_integer() else repr(c)
