"""Whitney decompositions of a domain and of its complement's interior.

A window cell is accepted into the family of the domain side when the
center clearance reaches (3/2)*sqrt(n) times its side, into the complement
family symmetrically, and is otherwise subdivided down to max_depth where
undecided cells form the frontier. The acceptance rule makes the classical
size-vs-distance inequalities hold by construction; they are re-checked
after every build and a violation aborts loudly, since it can only come
from a broken distance oracle.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .domains import Domain
from .dyadic import (DyadicCube, Window, SQRT_N, N_DIM, box_gap,
                     level_cell_centers)
from .errors import MatchingError, WhitneyInvariantError

ACCEPT_FACTOR = 1.5 * SQRT_N          # clearance/side ratio that accepts a cell
WC2_LOW = 1.0
WC2_HIGH = 4.0 * SQRT_N
TAG_DOMAIN = "E"
TAG_COMPLEMENT = "E'"


def matching_size_bound(epsilon: float, delta: float, n: int = N_DIM) -> float:
    """Largest complement-cube side with a guaranteed comparable partner."""
    return epsilon * delta / (16.0 * n)


def matching_distance_constant(epsilon: float, n: int = N_DIM) -> float:
    """Partner-distance bound, in units of the queried cube's side."""
    return 5.0 * math.sqrt(n) + 8.0 * n / epsilon ** 2


@dataclass
class CubeInfo:
    tag: str
    level: int
    coords: tuple[int, int]
    dist_lo: float     # rigorous bracket on dist(cube, boundary)
    dist_hi: float

    def key(self):
        return (self.level, self.coords[0], self.coords[1])


@dataclass
class WhitneyDecomposition:
    domain: Domain
    window: Window
    max_depth: int
    cubes: list[CubeInfo]
    fate: dict                         # (level,i,j) -> (kind, cube index or None)
    frontier: list[tuple[int, int, int]]
    adjacency: list[list[int]] = field(default_factory=list)

    def cube(self, idx: int) -> DyadicCube:
        info = self.cubes[idx]
        return DyadicCube(info.level, info.coords, self.window)

    def indices(self, tag: str) -> list[int]:
        return [k for k, c in enumerate(self.cubes) if c.tag == tag]

    def family(self, tag: str) -> list[DyadicCube]:
        return [self.cube(k) for k in self.indices(tag)]

    @property
    def domain_cubes(self):
        return self.family(TAG_DOMAIN)

    @property
    def complement_cubes(self):
        return self.family(TAG_COMPLEMENT)

    @property
    def frontier_volume_fraction(self) -> float:
        return len(self.frontier) * 4.0 ** (-self.max_depth)

    def index_of(self, q: DyadicCube) -> int:
        key = (q.level, q.coords[0], q.coords[1])
        kind, idx = self.fate.get(key, (None, None))
        if idx is None or kind not in (TAG_DOMAIN, TAG_COMPLEMENT):
            raise KeyError(f"cube {key} is not in this decomposition")
        return idx

    # -- adjacency ---------------------------------------------------------

    def _cells_touching(self, key, box, tag, out):
        """Collect indices of tag cubes in the subtree at `key` touching `box`.

        `box` is the closed integer extent of the query cube at its own level;
        candidate cells are compared after rescaling to a common level.
        """
        kind, idx = self.fate.get(key, (None, None))
        if kind is None:
            lvl, i, j = key
            while lvl > 0 and (lvl, i, j) not in self.fate:
                lvl, i, j = lvl - 1, i // 2, j // 2
            kind, idx = self.fate.get((lvl, i, j), (None, None))
            if kind == tag:
                out.add(idx)
            return
        if kind == "split":
            lvl, i, j = key
            q_lvl, ilo, ihi, jlo, jhi = box
            for ci in (2 * i, 2 * i + 1):
                for cj in (2 * j, 2 * j + 1):
                    f = 1 << max(0, q_lvl - (lvl + 1))
                    g = 1 << max(0, (lvl + 1) - q_lvl)
                    # child extent at the comparison level
                    a0, a1 = ci * f, (ci + 1) * f
                    b0, b1 = cj * f, (cj + 1) * f
                    c0, c1 = ilo * g, ihi * g
                    d0, d1 = jlo * g, jhi * g
                    if a0 <= c1 and c0 <= a1 and b0 <= d1 and d0 <= b1:
                        self._cells_touching((lvl + 1, ci, cj), box, tag, out)
        elif kind == tag:
            out.add(idx)

    def neighbor_indices(self, idx: int) -> list[int]:
        info = self.cubes[idx]
        lvl = info.level
        i, j = info.coords
        n = 1 << lvl
        out: set[int] = set()
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                ci, cj = i + di, j + dj
                if not (0 <= ci < n and 0 <= cj < n):
                    continue
                self._cells_touching((lvl, ci, cj), (lvl, i, i + 1, j, j + 1),
                                     info.tag, out)
        out.discard(idx)
        return sorted(out, key=lambda k: self.cubes[k].key())

    def neighbors(self, q: DyadicCube) -> list[DyadicCube]:
        """Same-family cubes whose closed boxes intersect q (q excluded)."""
        return [self.cube(k) for k in self.adjacency[self.index_of(q)]]

    # -- point location ----------------------------------------------------

    def locate(self, p):
        """(kind, index) of the decomposition cell containing the point."""
        if not self.window.contains_point(p):
            raise ValueError(f"point {tuple(np.asarray(p))} outside the window")
        key = (0, 0, 0)
        while True:
            kind, idx = self.fate.get(key, (None, None))
            if kind is None:
                raise KeyError(f"no decomposition cell at {key}")
            if kind != "split":
                return kind, idx
            lvl = key[0] + 1
            i, j = self.window.cell_of_point(p, lvl)
            key = (lvl, i, j)


def build_whitney(domain: Domain, window: Window, max_depth: int,
                  check: bool = True) -> WhitneyDecomposition:
    """Subdivide the window into the two Whitney families plus a frontier."""
    if max_depth > 40 or max_depth < 0:
        raise ValueError("max_depth must be in [0, 40]")
    if not domain.window_inside_bbox(window):
        raise ValueError("window must sit inside the domain bounding box")

    origin = np.asarray(window.origin)
    cubes: list[CubeInfo] = []
    fate: dict = {}
    frontier: list[tuple[int, int, int]] = []

    active = np.zeros((1, 2), dtype=np.int64)
    for level in range(max_depth + 1):
        if len(active) == 0:
            break
        side = window.cell_size(level)
        centers = level_cell_centers(window, level, active)
        sd = domain.signed_distance(centers)
        thr = ACCEPT_FACTOR * side
        acc_e = sd >= thr
        acc_ep = -sd >= thr
        undecided = ~(acc_e | acc_ep)

        for tag, mask in ((TAG_DOMAIN, acc_e), (TAG_COMPLEMENT, acc_ep)):
            cells = active[mask]
            if len(cells) == 0:
                continue
            ctr = centers[mask]
            corner_off = np.array([[0.0, 0.0], [side, 0.0], [0.0, side], [side, side]])
            lows = origin + cells * side
            corners = (lows[:, None, :] + corner_off[None, :, :]).reshape(-1, 2)
            csd = np.abs(domain.signed_distance(corners)).reshape(-1, 4)
            c_abs = np.abs(sd[mask])
            lo = np.maximum(0.0, c_abs - 0.5 * SQRT_N * side)
            hi = np.minimum(c_abs, csd.min(axis=1))
            for k in range(len(cells)):
                key = (level, int(cells[k, 0]), int(cells[k, 1]))
                fate[key] = (tag, len(cubes))
                cubes.append(CubeInfo(tag, level, (key[1], key[2]),
                                      float(lo[k]), float(hi[k])))

        rest = active[undecided]
        if level == max_depth:
            for k in range(len(rest)):
                key = (level, int(rest[k, 0]), int(rest[k, 1]))
                fate[key] = ("frontier", None)
                frontier.append(key)
        else:
            for k in range(len(rest)):
                fate[(level, int(rest[k, 0]), int(rest[k, 1]))] = ("split", None)
            if len(rest):
                off = np.array([[0, 0], [1, 0], [0, 1], [1, 1]])
                active = (rest[:, None, :] * 2 + off[None, :, :]).reshape(-1, 2)
                order = np.lexsort((active[:, 1], active[:, 0]))
                active = active[order]
            else:
                active = rest

    dec = WhitneyDecomposition(domain, window, max_depth, cubes, fate, frontier)
    dec.adjacency = [dec.neighbor_indices(k) for k in range(len(cubes))]
    if check:
        check_invariants(dec)
    return dec


def check_invariants(dec: WhitneyDecomposition):
    """Disjointness, size-vs-distance bracket, bounded neighbor ratio, cover."""
    w = dec.window.size
    tol = 1e-9 * w

    # exact cover accounting in finest-cell units
    total = sum(4 ** (dec.max_depth - c.level) for c in dec.cubes)
    total += len(dec.frontier)
    if total != 4 ** dec.max_depth:
        raise WhitneyInvariantError(
            f"families plus frontier cover {total} of {4 ** dec.max_depth} finest cells")

    for idx, info in enumerate(dec.cubes):
        side = dec.window.cell_size(info.level)
        # disjoint interiors: no accepted ancestor
        lvl, i, j = info.key()
        while lvl > 0:
            lvl, i, j = lvl - 1, i // 2, j // 2
            kind, _ = dec.fate.get((lvl, i, j), (None, None))
            if kind in (TAG_DOMAIN, TAG_COMPLEMENT):
                raise WhitneyInvariantError(
                    f"cube {info.key()} nested inside accepted {(lvl, i, j)}")
        if info.dist_lo < WC2_LOW * side - tol:
            raise WhitneyInvariantError(
                f"{info.tag} cube {info.key()}: clearance bracket "
                f"[{info.dist_lo:.3g}, {info.dist_hi:.3g}] below side {side:.3g}")
        if info.dist_hi > WC2_HIGH * side + tol:
            raise WhitneyInvariantError(
                f"{info.tag} cube {info.key()}: clearance bracket "
                f"[{info.dist_lo:.3g}, {info.dist_hi:.3g}] above {WC2_HIGH:.3g} x side")
        for nb in dec.adjacency[idx]:
            if abs(dec.cubes[nb].level - info.level) > 2:
                raise WhitneyInvariantError(
                    f"adjacent cubes {info.key()} / {dec.cubes[nb].key()} "
                    "have side ratio outside [1/4, 4]")


# ---------------------------------------------------------------------------
# queries

def _grouped_by_level(dec: WhitneyDecomposition, tag: str):
    groups: dict[int, tuple[np.ndarray, np.ndarray]] = getattr(dec, "_groups_" + tag.replace("'", "p"), None)
    if groups is None:
        groups = {}
        for idx, info in enumerate(dec.cubes):
            if info.tag != tag:
                continue
            groups.setdefault(info.level, []).append((info.coords[0], info.coords[1], idx))
        groups = {lvl: (np.array([(a, b) for a, b, _ in rows], dtype=np.int64),
                        np.array([k for _, _, k in rows], dtype=np.int64))
                  for lvl, rows in groups.items()}
        setattr(dec, "_groups_" + tag.replace("'", "p"), groups)
    return groups


def _box_distances(window: Window, level: int, coords: np.ndarray,
                   lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Distances from boxes (level, coords) to the closed box [lo, hi]."""
    s = window.cell_size(level)
    blo = np.asarray(window.origin) + coords * s
    bhi = blo + s
    gx = np.maximum(0.0, np.maximum(lo[0] - bhi[:, 0], blo[:, 0] - hi[0]))
    gy = np.maximum(0.0, np.maximum(lo[1] - bhi[:, 1], blo[:, 1] - hi[1]))
    return np.hypot(gx, gy)


def matching_cube(dec: WhitneyDecomposition, q: DyadicCube, epsilon: float,
                  delta: float) -> DyadicCube:
    """Comparable-size domain cube near a complement cube.

    Candidates satisfy side ratio in [1, 4] and box distance at most
    (5 sqrt(n) + 8 n / epsilon^2) * side(q); the nearest wins, ties broken
    by coarser level then lexicographic coords. The guarantee regime is
    side(q) <= epsilon * delta / (16 n); outside it the search may fail.
    """
    if not (0 < epsilon <= 1) or delta <= 0:
        raise ValueError("need 0 < epsilon <= 1 and delta > 0")
    key = (q.level, q.coords[0], q.coords[1])
    kind, _ = dec.fate.get(key, (None, None))
    if kind != TAG_COMPLEMENT:
        raise KeyError(f"cube {key} is not a complement cube of this decomposition")

    side = q.side
    c_dist = matching_distance_constant(epsilon)
    radius = c_dist * side + 1e-12 * dec.window.size
    lo = q.lower
    hi = lo + side
    groups = _grouped_by_level(dec, TAG_DOMAIN)

    best = None
    for lvl in range(max(0, q.level - 2), q.level + 1):
        if lvl not in groups:
            continue
        coords, idxs = groups[lvl]
        d = _box_distances(dec.window, lvl, coords, lo, hi)
        ok = np.nonzero(d <= radius)[0]
        if ok.size == 0:
            continue
        sub = ok[np.lexsort((coords[ok, 1], coords[ok, 0], d[ok]))[0]]
        cand = (float(d[sub]), lvl, int(coords[sub, 0]), int(coords[sub, 1]),
                int(idxs[sub]))
        if best is None or cand[:4] < best[:4]:
            best = cand
    if best is None:
        raise MatchingError(key, radius)
    return dec.cube(best[4])


def find_interior_point(domain: Domain, q: DyadicCube, epsilon: float,
                        budget: int = 1024):
    """A point of the open cube with clearance >= epsilon * side / 32.

    Checks the center, then samples the annulus side/8 < |z - c| < side/4.
    Returns the point, or None as evidence against the requested epsilon
    at this scale.
    """
    target = epsilon * q.side / 32.0
    c = q.center
    if domain.sd(c) >= target:
        return c
    n_r = max(4, int(math.sqrt(budget / 16)))
    n_a = max(16, budget // n_r)
    radii = q.side * (0.125 + 0.125 * (np.arange(n_r) + 0.5) / n_r)
    angles = 2.0 * np.pi * np.arange(n_a) / n_a
    pts = np.column_stack([
        (c[0] + radii[:, None] * np.cos(angles)[None, :]).ravel(),
        (c[1] + radii[:, None] * np.sin(angles)[None, :]).ravel(),
    ])
    sd = domain.signed_distance(pts)
    ok = np.nonzero(sd >= target)[0]
    if ok.size == 0:
        return None
    return pts[ok[0]].copy()


def find_big_cube_near(dec: WhitneyDecomposition, x, epsilon: float, delta: float):
    """Nearest domain cube with side >= eps*delta/(320 n) within the reach
    bound delta * (1/eps + sqrt(n)); None when the window holds no witness."""
    if not (0 < epsilon <= 1) or delta <= 0:
        raise ValueError("need 0 < epsilon <= 1 and delta > 0")
    x = np.asarray(x, dtype=float)
    min_side = epsilon * delta / (320.0 * N_DIM)
    reach = delta * (1.0 / epsilon + SQRT_N)
    groups = _grouped_by_level(dec, TAG_DOMAIN)
    best = None
    for lvl, (coords, idxs) in sorted(groups.items()):
        if dec.window.cell_size(lvl) < min_side:
            continue
        s = dec.window.cell_size(lvl)
        blo = np.asarray(dec.window.origin) + coords * s
        gx = np.maximum(0.0, np.maximum(blo[:, 0] - x[0], x[0] - (blo[:, 0] + s)))
        gy = np.maximum(0.0, np.maximum(blo[:, 1] - x[1], x[1] - (blo[:, 1] + s)))
        d = np.hypot(gx, gy)
        ok = np.nonzero(d < reach)[0]
        if ok.size == 0:
            continue
        sub = ok[np.lexsort((coords[ok, 1], coords[ok, 0], d[ok]))[0]]
        cand = (float(d[sub]), lvl, int(coords[sub, 0]), int(coords[sub, 1]),
                int(idxs[sub]))
        if best is None or cand[:4] < best[:4]:
            best = cand
    return dec.cube(best[4]) if best is not None else None


def whitney_chain(dec: WhitneyDecomposition, x, y) -> list[DyadicCube]:
    """Shortest hop sequence of adjacent domain cubes joining the cubes of
    x and y; length 1 means both points share a cube."""
    kinds = []
    for p in (x, y):
        kind, idx = dec.locate(p)
        if kind != TAG_DOMAIN:
            raise KeyError(f"point {tuple(np.asarray(p, float))} is not inside a "
                           f"domain cube (landed in {kind}); deepen max_depth")
        kinds.append(idx)
    src, dst = kinds
    if src == dst:
        return [dec.cube(src)]
    prev = {src: None}
    queue = deque([src])
    while queue:
        cur = queue.popleft()
        if cur == dst:
            break
        for nb in dec.adjacency[cur]:
            if dec.cubes[nb].tag == TAG_DOMAIN and nb not in prev:
                prev[nb] = cur
                queue.append(nb)
    if dst not in prev:
        raise KeyError("domain cubes of x and y are not chain-connected "
                       "at this depth")
    chain = [dst]
    while prev[chain[-1]] is not None:
        chain.append(prev[chain[-1]])
    return [dec.cube(k) for k in chain[::-1]]


def cubes_covering_curve(dec: WhitneyDecomposition, pts: np.ndarray) -> list[int]:
    """Indices of domain cubes met by a densely sampled curve."""
    seen = []
    have = set()
    for p in np.atleast_2d(pts):
        try:
            kind, idx = dec.locate(p)
        except (KeyError, ValueError):
            continue
        if kind == TAG_DOMAIN and idx not in have:
            have.add(idx)
            seen.append(idx)
    return seen
