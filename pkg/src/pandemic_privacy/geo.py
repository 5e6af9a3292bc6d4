"""Planar points and coordinate-array helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class GeoPoint:
    """A location in dimensionless planar units."""

    x: float
    y: float

    def __post_init__(self):
        x, y = float(self.x), float(self.y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise InvalidInputError(f"coordinates must be finite, got ({self.x!r}, {self.y!r})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def distance(self, other: GeoPoint) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def __iter__(self):
        yield self.x
        yield self.y


PointsLike = Union[np.ndarray, Iterable[GeoPoint], Iterable[tuple]]


def as_coords(points: PointsLike) -> np.ndarray:
    """Return ``points`` as a finite float array of shape (n, 2)."""
    if isinstance(points, np.ndarray):
        arr = points.astype(float, copy=False)
    else:
        arr = np.array([tuple(p) for p in points], dtype=float)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInputError(f"points must have shape (n, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("coordinates must be finite")
    return arr


def as_points(coords: np.ndarray) -> list[GeoPoint]:
    return [GeoPoint(x, y) for x, y in np.asarray(coords, dtype=float)]
