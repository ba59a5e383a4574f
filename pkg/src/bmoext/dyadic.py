"""Dyadic cube arithmetic: identity, geometry, hierarchy and adjacency.

All cubes live in a square world window subdivided in powers of two, so
every cube of every experiment embeds in one dyadic tree and sidelength
comparisons between cubes are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

N_DIM = 2
SQRT_N = math.sqrt(N_DIM)


@dataclass(frozen=True)
class Window:
    """Square world window [x0, x0+size] x [y0, y0+size]."""

    origin: tuple[float, float]
    size: float

    def __post_init__(self):
        # normalize numpy scalars so equality, hashing and repr stay plain
        object.__setattr__(self, "origin",
                           (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "size", float(self.size))
        if not self.size > 0:
            raise ValueError(f"window size must be positive, got {self.size}")

    def cell_size(self, level: int) -> float:
        return self.size * 2.0 ** (-level)

    def cell_of_point(self, p, level: int) -> tuple[int, int]:
        """Index of the level-`level` cell containing p (clamped to the window)."""
        n = 1 << level
        s = self.cell_size(level)
        i = int(np.floor((p[0] - self.origin[0]) / s))
        j = int(np.floor((p[1] - self.origin[1]) / s))
        return (min(max(i, 0), n - 1), min(max(j, 0), n - 1))

    def contains_point(self, p) -> bool:
        x0, y0 = self.origin
        return x0 <= p[0] <= x0 + self.size and y0 <= p[1] <= y0 + self.size


@dataclass(frozen=True)
class DyadicCube:
    """Closed dyadic cube: level plus integer coordinates in a window."""

    level: int
    coords: tuple[int, int]
    window: Window

    def __post_init__(self):
        n = 1 << self.level
        if self.level < 0:
            raise ValueError("cube level must be >= 0")
        for c in self.coords:
            if not (0 <= c < n):
                raise ValueError(f"coords {self.coords} outside level-{self.level} grid")

    @property
    def side(self) -> float:
        return self.window.cell_size(self.level)

    @property
    def lower(self) -> np.ndarray:
        s = self.side
        return np.array([self.window.origin[0] + self.coords[0] * s,
                         self.window.origin[1] + self.coords[1] * s])

    @property
    def center(self) -> np.ndarray:
        return self.lower + 0.5 * self.side

    @property
    def corners(self) -> np.ndarray:
        lo = self.lower
        s = self.side
        return np.array([lo, lo + [s, 0.0], lo + [0.0, s], lo + [s, s]])

    @property
    def measure(self) -> float:
        return self.side ** N_DIM

    def sort_key(self):
        return (self.level, self.coords[0], self.coords[1])

    def parent(self) -> DyadicCube:
        if self.level == 0:
            raise ValueError("root cube has no parent")
        return DyadicCube(self.level - 1, (self.coords[0] // 2, self.coords[1] // 2), self.window)

    def children(self) -> list[DyadicCube]:
        i, j = self.coords
        lv = self.level + 1
        return [DyadicCube(lv, (2 * i + di, 2 * j + dj), self.window)
                for dj in (0, 1) for di in (0, 1)]

    def child(self, k: int) -> DyadicCube:
        return self.children()[k]

    def int_box(self, at_level: int) -> tuple[int, int, int, int]:
        """Closed integer extent (ilo, ihi, jlo, jhi) in level-`at_level` cells."""
        if at_level < self.level:
            raise ValueError("at_level must be at least the cube level")
        f = 1 << (at_level - self.level)
        i, j = self.coords
        return (i * f, (i + 1) * f, j * f, (j + 1) * f)

    def contains_point(self, p) -> bool:
        lo = self.lower
        s = self.side
        return lo[0] <= p[0] <= lo[0] + s and lo[1] <= p[1] <= lo[1] + s

    def contains_cube(self, other: DyadicCube) -> bool:
        if other.level < self.level:
            return False
        f = 1 << (other.level - self.level)
        return (other.coords[0] // f, other.coords[1] // f) == self.coords


def cube_geometry(q: DyadicCube):
    """(center, side, corners) of a cube, from the window formula."""
    return q.center, q.side, q.corners


def cubes_adjacent(q1: DyadicCube, q2: DyadicCube) -> bool:
    """True iff the closed boxes intersect (works across levels).

    Integer arithmetic at the finer of the two levels, hence exact.
    Identical cubes count as adjacent.
    """
    if q1.window != q2.window:
        raise ValueError("cubes from different windows are not comparable")
    lv = max(q1.level, q2.level)
    a = q1.int_box(lv)
    b = q2.int_box(lv)
    return a[0] <= b[1] and b[0] <= a[1] and a[2] <= b[3] and b[2] <= a[3]


def box_gap(q1: DyadicCube, q2: DyadicCube) -> float:
    """Euclidean distance between two closed cubes (0 if they touch)."""
    lo1, s1 = q1.lower, q1.side
    lo2, s2 = q2.lower, q2.side
    gx = max(0.0, lo2[0] - (lo1[0] + s1), lo1[0] - (lo2[0] + s2))
    gy = max(0.0, lo2[1] - (lo1[1] + s1), lo1[1] - (lo2[1] + s2))
    return math.hypot(gx, gy)


def point_box_gap(q: DyadicCube, p) -> float:
    """Distance from a point to the closed cube."""
    lo = q.lower
    s = q.side
    gx = max(0.0, lo[0] - p[0], p[0] - (lo[0] + s))
    gy = max(0.0, lo[1] - p[1], p[1] - (lo[1] + s))
    return math.hypot(gx, gy)


def level_cell_centers(window: Window, level: int, ij: np.ndarray) -> np.ndarray:
    """Centers of level-`level` cells with integer coords `ij` of shape (M, 2)."""
    s = window.cell_size(level)
    return np.asarray(window.origin) + (ij + 0.5) * s
