"""Regular planar grid geometry shared by rate fields and kriging maps.

Grid values live at cell centres. Arrays are stored row-major with shape
``(ny, nx)``: row ``j`` holds the cells whose centre has ``y = origin_y +
(j + 0.5) * cell_size``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class InvalidGridError(ValueError):
    """Raised for non-positive grid dimensions."""


@dataclass(frozen=True)
class GridSpec:
    origin_x: float
    origin_y: float
    cell_size: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.cell_size > 0:
            raise InvalidGridError(f"cell_size must be > 0, got {self.cell_size}")
        if int(self.nx) != self.nx or self.nx < 1:
            raise InvalidGridError(f"nx must be an integer >= 1, got {self.nx}")
        if int(self.ny) != self.ny or self.ny < 1:
            raise InvalidGridError(f"ny must be an integer >= 1, got {self.ny}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    @classmethod
    def from_extent(cls, width, height, cell_size, origin_x=0.0, origin_y=0.0):
        """Grid covering ``width x height`` metres; both must be multiples of
        ``cell_size`` (to floating tolerance)."""
        nx = int(round(width / cell_size))
        ny = int(round(height / cell_size))
        if nx < 1 or ny < 1 or not np.isclose(nx * cell_size, width) or not np.isclose(
            ny * cell_size, height
        ):
            raise InvalidGridError(
                f"extent {width}x{height} is not a whole number of {cell_size} m cells"
            )
        return cls(origin_x, origin_y, cell_size, nx, ny)

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def width(self):
        return self.nx * self.cell_size

    @property
    def height(self):
        return self.ny * self.cell_size

    @property
    def extent(self):
        return (self.width, self.height)

    @property
    def center(self):
        return (self.origin_x + 0.5 * self.width, self.origin_y + 0.5 * self.height)

    @property
    def diagonal(self):
        return float(np.hypot(self.width, self.height))

    def node_x(self):
        return self.origin_x + (np.arange(self.nx) + 0.5) * self.cell_size

    def node_y(self):
        return self.origin_y + (np.arange(self.ny) + 0.5) * self.cell_size

    def node_coords(self):
        """All cell centres as an ``(ny * nx, 2)`` array in row-major order."""
        xx, yy = np.meshgrid(self.node_x(), self.node_y())
        return np.column_stack([xx.ravel(), yy.ravel()])

    def contains(self, x, y):
        return (
            self.origin_x <= x <= self.origin_x + self.width
            and self.origin_y <= y <= self.origin_y + self.height
        )

    def to_dict(self):
        return {
            "origin_x": float(self.origin_x),
            "origin_y": float(self.origin_y),
            "cell_size": float(self.cell_size),
            "nx": self.nx,
            "ny": self.ny,
        }

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"origin_x", "origin_y", "cell_size", "nx", "ny"}
        if unknown:
            raise InvalidGridError(f"unknown grid keys: {sorted(unknown)}")
        return cls(
            float(d.get("origin_x", 0.0)),
            float(d.get("origin_y", 0.0)),
            float(d["cell_size"]),
            d["nx"],
            d["ny"],
        )


def write_grid_text(path, spec, values):
    values = np.asarray(values, dtype=float)
    if values.shape != spec.shape:
        raise ValueError("values shape does not match grid")
    lines = ["# " + json.dumps(spec.to_dict(), sort_keys=True)]
    lines += [",".join(format(v, ".17g") for v in row) for row in values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid_text(path):
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise ValueError(f"{path}: missing JSON header line")
    spec = GridSpec.from_dict(json.loads(text[0][1:]))
    rows = [[float(v) for v in line.split(",")] for line in text[1:] if line.strip()]
    values = np.array(rows, dtype=float)
    if values.shape != spec.shape:
        raise ValueError(f"{path}: data shape {values.shape} does not match header {spec.shape}")
    return spec, values
