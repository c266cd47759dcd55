"""Hierarchical neighbor graphs: construction, repair, routing, metrics and WSN simulation."""

from hngraph.errors import (
    HnError,
    LevelOverflowError,
    NotFoundError,
    ParameterError,
    ThresholdNotFoundError,
    UnreachableError,
)
from hngraph.geometry import PointSet, Region, distance, poisson_points, uniform_points
from hngraph.core import (
    HnGraph,
    LevelAssignment,
    Params,
    assign_level,
    build_from_levels,
    build_graph,
    build_radius_bounded,
    height,
    level_sets,
)

__version__ = "0.1.0"

__all__ = [
    "HnError",
    "HnGraph",
    "LevelAssignment",
    "LevelOverflowError",
    "NotFoundError",
    "ParameterError",
    "Params",
    "PointSet",
    "Region",
    "ThresholdNotFoundError",
    "UnreachableError",
    "assign_level",
    "build_from_levels",
    "build_graph",
    "build_radius_bounded",
    "distance",
    "height",
    "level_sets",
    "poisson_points",
    "uniform_points",
]
