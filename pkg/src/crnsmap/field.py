"""Surrogate ground-truth count-rate fields.

A :class:`RateField` is the simulation's truth: the mean neutron count rate
(counts/s) at every cell centre of a :class:`~crnsmap.grid.GridSpec`.

Text format (also used for kriging maps)::

    # {"cell_size": 5.0, "nx": 4, "ny": 2, "origin_x": 0.0, "origin_y": 0.0}
    2.5,2.5,5,5
    2.5,2.5,5,5

The first line is a JSON header, followed by ``ny`` rows of ``nx`` values
written with 17 significant digits, so a load reproduces the array exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, InvalidGridError, read_grid_text, write_grid_text
from .kriging import OK, krige_grid
from .observations import ObservationRecord, merge_colocated

DEFAULT_CELL_SIZE = 5.0


class FieldDomainError(ValueError):
    """Query outside the field extent."""


@dataclass(frozen=True, eq=False)
class RateField:
    spec: GridSpec
    rates: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        rates = np.array(self.rates, dtype=float)
        if rates.shape != self.spec.shape:
            raise ValueError(f"rates shape {rates.shape} does not match grid {self.spec.shape}")
        if not np.all(np.isfinite(rates)):
            raise ValueError("rates must be finite")
        if np.any(rates < 0):
            raise ValueError("rates must be >= 0")
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)

    def rate_at(self, x, y):
        return rate_at(self, x, y)


def make_step_field(spec, border_x, rate_wet, rate_dry):
    """Two-valued field: cells whose centre lies left of ``border_x`` are wet."""
    if not isinstance(spec, GridSpec):
        spec = GridSpec(*spec)
    if rate_wet < 0 or rate_dry < 0:
        raise ValueError("rates must be >= 0")
    if not spec.origin_x <= border_x <= spec.origin_x + spec.width:
        raise InvalidGridError(f"border_x={border_x} outside the field extent")
    row = np.where(spec.node_x() < border_x, float(rate_wet), float(rate_dry))
    rates = np.tile(row, (spec.ny, 1))
    return RateField(
        spec,
        rates,
        {"kind": "step", "border_x": float(border_x), "rate_wet": float(rate_wet), "rate_dry": float(rate_dry)},
    )


def rate_at(field, x, y):
    """Bilinear interpolation between cell centres.

    Inside the outer half-cell band the nearest edge values are used, so the
    result is exact at every centre and bounded by the surrounding values.
    """
    spec = field.spec
    if not spec.contains(x, y):
        raise FieldDomainError(f"({x}, {y}) lies outside the field extent")
    fx = np.clip((x - spec.origin_x) / spec.cell_size - 0.5, 0.0, spec.nx - 1)
    fy = np.clip((y - spec.origin_y) / spec.cell_size - 0.5, 0.0, spec.ny - 1)
    i0 = min(int(fx), spec.nx - 2) if spec.nx > 1 else 0
    j0 = min(int(fy), spec.ny - 2) if spec.ny > 1 else 0
    i1 = min(i0 + 1, spec.nx - 1)
    j1 = min(j0 + 1, spec.ny - 1)
    ax = fx - i0
    ay = fy - j0
    r = field.rates
    top = (1 - ax) * r[j0, i0] + ax * r[j0, i1]
    bottom = (1 - ax) * r[j1, i0] + ax * r[j1, i1]
    return max(float((1 - ay) * top + ay * bottom), 0.0)


def build_surrogate_from_observations(obs, spec, vg):
    """Ordinary-kriging extrapolation of observed rates onto ``spec``.

    Co-located observations are merged first (counts and durations summed);
    negative estimates are clamped to zero and the number clamped is reported
    in the metadata.
    """
    merged = merge_colocated(obs)
    if len(merged) < 2:
        raise ValueError("need at least 2 distinct observation locations")
    kmap = krige_grid(merged, vg, None, spec, method=OK)
    return RateField(
        spec,
        kmap.estimate,
        {
            "kind": "ordinary_kriging",
            "n_observations": len(merged),
            "variogram": vg.to_dict(),
            "n_clamped": kmap.metadata["n_clamped_estimate"],
        },
    )


def replicate_transect(transect, n_lines=6, line_spacing=10.0, y0=None):
    """Copy a single transect into ``n_lines`` parallel lines along +y.

    The transect's own ``y`` is replaced by ``y0 + k * line_spacing`` for line
    ``k``; ``y0`` defaults to the transect's mean ``y``.
    """
    if y0 is None:
        y0 = float(np.mean([o.y for o in transect]))
    return [
        ObservationRecord(o.x, y0 + k * line_spacing, o.duration, o.counts)
        for k in range(n_lines)
        for o in transect
    ]


def save_rate_field(path, field):
    write_grid_text(path, field.spec, field.rates)


def load_rate_field(path):
    spec, values = read_grid_text(path)
    return RateField(spec, values)
