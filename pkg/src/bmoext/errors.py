"""Structured failures shared across the toolkit."""

from __future__ import annotations


class GeometryError(Exception):
    """Base class for all toolkit failures."""


class PolygonError(GeometryError):
    """Invalid polygon input (self-intersection, malformed loops)."""


class QuadratureError(GeometryError):
    """Line integral could not be bounded (integrand unbounded or curve
    leaves the domain)."""


class DisconnectedGraphError(GeometryError):
    """Endpoints fall in different grid components at this resolution."""

    def __init__(self, msg, component_sizes=None):
        super().__init__(msg)
        self.component_sizes = component_sizes or []


class EmptyInteriorError(GeometryError):
    """The thick interior {dist >= lambda} is empty in the window, so the
    scale-lambda norm degenerates to the homogeneous one."""


class MatchingError(GeometryError):
    """No comparable-size partner cube within the certified search radius."""

    def __init__(self, cube_key, search_radius):
        super().__init__(
            f"no matching cube for {cube_key} within radius {search_radius:.6g}")
        self.cube_key = cube_key
        self.search_radius = search_radius


class ExtensionError(GeometryError):
    """Extension assignment failed for a set of complement cubes, evidence
    that the requested scale exceeds the geometry."""

    def __init__(self, failed_cubes):
        super().__init__(
            f"matching failed for {len(failed_cubes)} complement cubes "
            f"(first: {failed_cubes[0] if failed_cubes else None})")
        self.failed_cubes = failed_cubes


class WhitneyInvariantError(GeometryError):
    """A decomposition invariant failed; names the offending cube."""
