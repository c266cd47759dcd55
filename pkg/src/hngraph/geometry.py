"""Planar point sets over a square or a torus, and the distance metric on them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from hngraph.errors import ParameterError

SQUARE = "square"
TORUS = "torus"


@dataclass(frozen=True)
class Region:
    kind: str = SQUARE
    side: float = 1.0

    def __post_init__(self):
        if self.kind not in (SQUARE, TORUS):
            raise ParameterError(f"unknown region kind {self.kind!r}")
        if not (math.isfinite(self.side) and self.side > 0):
            raise ParameterError(f"region side must be positive and finite, got {self.side}")

    @property
    def area(self) -> float:
        return self.side * self.side

    @property
    def periodic(self) -> bool:
        return self.kind == TORUS

    @property
    def diameter(self) -> float:
        if self.periodic:
            return self.side * math.sqrt(2) / 2
        return self.side * math.sqrt(2)

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x < self.side and 0.0 <= y < self.side

    def __str__(self):
        return f"{self.kind}:{self.side!r}"

    @classmethod
    def parse(cls, text: str) -> "Region":
        kind, _, side = text.partition(":")
        try:
            return cls(kind.strip(), float(side))
        except ValueError:
            raise ParameterError(f"bad region {text!r}, expected kind:side") from None


def _axis_gap(d, side, periodic):
    d = abs(d)
    if periodic:
        # minimum image; equals the minimum over the 9 wrap images for
        # coordinates inside [0, side)
        d = min(d, side - d)
    return d


def distance(a, b, region: Region) -> float:
    """Euclidean distance, or minimum-image distance on a torus."""
    ax, ay = a
    bx, by = b
    if not (region.contains(ax, ay) and region.contains(bx, by)):
        raise ParameterError(f"point outside region {region}")
    dx = _axis_gap(ax - bx, region.side, region.periodic)
    dy = _axis_gap(ay - by, region.side, region.periodic)
    return math.sqrt(dx * dx + dy * dy)


def pair_distances(xy_a: np.ndarray, xy_b: np.ndarray, region: Region) -> np.ndarray:
    """Row-wise distances between two (m, 2) arrays (or one broadcast point).

    Uses exactly the same float operations as :func:`distance`, so scalar and
    vectorised callers agree bit-for-bit.
    """
    d = np.abs(np.asarray(xy_a, dtype=float) - np.asarray(xy_b, dtype=float))
    if region.periodic:
        d = np.minimum(d, region.side - d)
    dx = d[..., 0]
    dy = d[..., 1]
    return np.sqrt(dx * dx + dy * dy)


@dataclass(frozen=True, eq=False)
class PointSet:
    """Immutable node positions; node ``i`` sits at ``xy[i]``."""

    xy: np.ndarray
    region: Region
    seed: int | None = None
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        xy = np.array(self.xy, dtype=float).reshape(-1, 2)
        if xy.size and not (np.all(xy >= 0.0) and np.all(xy < self.region.side)):
            raise ParameterError("point outside region")
        xy.setflags(write=False)
        object.__setattr__(self, "xy", xy)
        ids = np.arange(len(xy)) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        if len(ids) != len(xy):
            raise ParameterError("ids and coordinates differ in length")
        if len(ids) > 1 and not np.all(np.diff(ids) > 0):
            raise ParameterError("ids must be strictly increasing")
        ids.setflags(write=False)
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return len(self.xy)

    def __eq__(self, other):
        if not isinstance(other, PointSet):
            return NotImplemented
        return (
            self.region == other.region
            and self.seed == other.seed
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.xy, other.xy)
        )

    def points(self):
        return [(int(i), float(x), float(y)) for i, (x, y) in zip(self.ids, self.xy)]


def _uniform_xy(rng, n, side):
    xy = rng.random((n, 2)) * side
    # guard the half-open upper bound against rounding up to `side`
    return np.minimum(xy, np.nextafter(side, 0.0))


def uniform_points(region: Region, n: int, seed: int) -> PointSet:
    if n < 0:
        raise ParameterError(f"n must be non-negative, got {n}")
    rng = np.random.default_rng(seed)
    return PointSet(_uniform_xy(rng, int(n), region.side), region, seed)


def poisson_points(region: Region, lam: float, seed: int) -> PointSet:
    """Homogeneous Poisson process of intensity ``lam`` per unit area."""
    if not (lam > 0 and math.isfinite(lam)):
        raise ParameterError(f"density must be positive, got {lam}")
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(lam * region.area))
    return PointSet(_uniform_xy(rng, n, region.side), region, seed)
