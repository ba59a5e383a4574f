"""Grid functions and bounded-mean-oscillation norm estimators.

All suprema run over the grid-aligned dyadic cubes of the window tree (a
documented estimator choice: dyadic data controls the full norm up to
dimensional constants). Cells straddling the boundary are excluded from
every integral and the excluded volume fraction is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domains import Domain
from .dyadic import DyadicCube, SQRT_N, Window, level_cell_centers
from .errors import DisconnectedGraphError
from .qhyper import MetricGraph, build_metric_graph, segment_qh_batch

MASK_OUTSIDE = 0
MASK_INSIDE = 1
MASK_STRADDLING = 2

SWEEP_BUDGET = 1 << 26


def log_plus(x: float) -> float:
    return max(math.log(x), 0.0) if x > 0 else 0.0


@dataclass
class GridFunction:
    """Real values on a uniform dyadic grid with a cell-classification mask.

    values[i, j] belongs to the cell with integer coords (i, j) at `level`;
    mask marks cells inside the domain, outside it, or straddling the
    boundary (center clearance below half the cell diagonal).
    """

    window: Window
    level: int
    values: np.ndarray
    mask: np.ndarray
    _sats: dict = field(default_factory=dict, repr=False)

    @property
    def n_cells(self) -> int:
        return 1 << self.level

    @property
    def h(self) -> float:
        return self.window.cell_size(self.level)

    @property
    def straddling_fraction(self) -> float:
        return float((self.mask == MASK_STRADDLING).mean())

    def counted(self, cells: str) -> np.ndarray:
        if cells == "inside":
            return self.mask == MASK_INSIDE
        if cells == "defined":
            return self.mask != MASK_STRADDLING
        raise ValueError("cells must be 'inside' or 'defined'")

    def copy_with(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.window, self.level, values, self.mask.copy())

    def block(self, q: DyadicCube):
        if q.window != self.window:
            raise ValueError("cube and grid live in different windows")
        if q.level > self.level:
            raise ValueError("cube is finer than the grid")
        f = 1 << (self.level - q.level)
        i, j = q.coords
        return slice(i * f, (i + 1) * f), slice(j * f, (j + 1) * f)


def classify_cells(domain: Domain, window: Window, level: int):
    n = 1 << level
    ij = np.stack(np.meshgrid(np.arange(n), np.arange(n), indexing="ij"), axis=-1)
    centers = level_cell_centers(window, level, ij.reshape(-1, 2))
    sd = domain.signed_distance(centers).reshape(n, n)
    half_diag = 0.5 * SQRT_N * window.cell_size(level)
    mask = np.full((n, n), MASK_STRADDLING, dtype=np.int8)
    mask[sd >= half_diag] = MASK_INSIDE
    mask[sd <= -half_diag] = MASK_OUTSIDE
    return mask, sd, centers.reshape(n, n, 2)


def sample_grid_function(domain: Domain, window: Window, level: int, fn,
                         everywhere: bool = False) -> GridFunction:
    """Evaluate a vectorized field at cell centers.

    With everywhere=False the values are NaN off the inside cells, which is
    the honest representation for functions only known on the domain.
    """
    mask, _, centers = classify_cells(domain, window, level)
    n = 1 << level
    vals = np.asarray(fn(centers.reshape(-1, 2)), dtype=float).reshape(n, n)
    if not everywhere:
        vals = np.where(mask == MASK_INSIDE, vals, np.nan)
    return GridFunction(window, level, vals, mask)


# ---------------------------------------------------------------------------
# cube averages

def cube_average(f: GridFunction, q: DyadicCube, cells: str = "inside") -> float:
    """Mean over the counted cells of the cube, exactly-rounded summation."""
    si, sj = f.block(q)
    m = f.counted(cells)[si, sj]
    cnt = int(m.sum())
    if cnt == 0:
        raise ValueError(f"cube ({q.level}, {q.coords}) has no counted cells")
    return math.fsum(f.values[si, sj][m].tolist()) / cnt


def cube_oscillation(f: GridFunction, q: DyadicCube, cells: str = "inside") -> float:
    """Mean absolute deviation from the cube average."""
    si, sj = f.block(q)
    m = f.counted(cells)[si, sj]
    cnt = int(m.sum())
    if cnt == 0:
        raise ValueError(f"cube ({q.level}, {q.coords}) has no counted cells")
    vals = f.values[si, sj][m]
    avg = math.fsum(vals.tolist()) / cnt
    return math.fsum(np.abs(vals - avg).tolist()) / cnt


def _level_stats(f: GridFunction, level: int, cells: str):
    """(means, oscillations, counts) over the dyadic cubes at `level`."""
    b = 1 << (f.level - level)
    nb = 1 << level
    counted = f.counted(cells)
    v = np.where(counted, np.nan_to_num(f.values, nan=0.0), 0.0)
    v4 = v.reshape(nb, b, nb, b)
    c4 = counted.reshape(nb, b, nb, b)
    counts = c4.sum(axis=(1, 3))
    sums = v4.sum(axis=(1, 3))
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    dev = np.abs(v - np.repeat(np.repeat(means, b, axis=0), b, axis=1))
    dev = np.where(counted, dev, 0.0).reshape(nb, b, nb, b).sum(axis=(1, 3))
    with np.errstate(invalid="ignore"):
        osc = np.where(counts > 0, dev / np.maximum(counts, 1), np.nan)
    return means, osc, counts


def _contained_mask(f: GridFunction, domain: Domain | None, level: int,
                    margin_factor: float = 0.5 * SQRT_N):
    """Conservative test for 'cube inside the domain' at a sweep level.

    margin_factor is the required clearance at the cube center in units of
    the side; the default covers the cube itself, sqrt(n) covers its
    concentric double.
    """
    nb = 1 << level
    if domain is None:
        return np.ones((nb, nb), dtype=bool)
    ij = np.stack(np.meshgrid(np.arange(nb), np.arange(nb), indexing="ij"), axis=-1)
    centers = level_cell_centers(f.window, level, ij.reshape(-1, 2))
    sd = domain.signed_distance(centers).reshape(nb, nb)
    side = f.window.cell_size(level)
    return sd >= margin_factor * side - 1e-12 * f.window.size


@dataclass
class NormReport:
    value: float
    small_scale_part: float
    large_scale_part: float
    lam: float | None
    attaining_cube: tuple | None
    small_attaining: tuple | None = None
    large_attaining: tuple | None = None
    abc: tuple | None = None
    degenerate: bool = False
    excluded_volume_fraction: float = 0.0
    subsampled: bool = False
    surrogate: bool = False


def require_defined(f: GridFunction, cells: str):
    """Counted cells must carry finite values; NaN would silently leak
    zeros into the sums."""
    bad = f.counted(cells) & ~np.isfinite(f.values)
    if bad.any():
        raise ValueError(f"{int(bad.sum())} counted cells have no value; "
                         "the function is not defined on the requested cells")


def _sweep(f: GridFunction, domain: Domain | None, lam: float | None,
           cells: str, margin_factor: float = 0.5 * SQRT_N):
    """Dyadic sweep returning the oscillation and |average| envelopes split
    at sidelength lam (lam None: oscillation over every scale)."""
    levels = list(range(0, f.level + 1))
    total_cubes = sum(4 ** l for l in levels)
    subsampled = False
    if total_cubes > SWEEP_BUDGET:
        levels = levels[::2] + [f.level]
        subsampled = True

    small_best = (-math.inf, None)
    large_best = (-math.inf, None)
    any_large = False
    any_cube = False
    for lvl in levels:
        side = f.window.cell_size(lvl)
        means, osc, counts = _level_stats(f, lvl, cells)
        inside = _contained_mask(f, domain, lvl, margin_factor) & (counts > 0)
        if not inside.any():
            continue
        any_cube = True
        if lam is None or side < lam:
            cand = np.where(inside, osc, -math.inf)
            pos = np.unravel_index(np.argmax(cand), cand.shape)
            if cand[pos] > small_best[0]:
                small_best = (float(cand[pos]), (lvl, int(pos[0]), int(pos[1])))
        if lam is not None and side >= lam:
            any_large = True
            cand = np.where(inside, np.abs(means), -math.inf)
            pos = np.unravel_index(np.argmax(cand), cand.shape)
            if cand[pos] > large_best[0]:
                large_best = (float(cand[pos]), (lvl, int(pos[0]), int(pos[1])))
    small = max(small_best[0], 0.0) if small_best[1] is not None else 0.0
    large = max(large_best[0], 0.0) if large_best[1] is not None else 0.0
    return (small, small_best[1], large, large_best[1], any_large, any_cube,
            subsampled)


def bmo_lambda_norm(f: GridFunction, domain: Domain | None, lam: float,
                    cells: str | None = None) -> NormReport:
    """Scale-lambda norm: oscillation below the scale, absolute averages at
    and above it, both over dyadic cubes inside the domain (all window cubes
    when domain is None). Degenerate when no counted cube reaches the scale."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    if cells is None:
        cells = "inside" if domain is not None else "defined"
    require_defined(f, cells)
    small, s_at, large, l_at, any_large, any_cube, subs = _sweep(f, domain, lam, cells)
    degenerate = not any_large
    value = max(small, large)
    attaining = s_at if small >= large else l_at
    return NormReport(value, small, large, lam, attaining, s_at, l_at,
                      degenerate=degenerate,
                      excluded_volume_fraction=f.straddling_fraction,
                      subsampled=subs)


def bmo_homogeneous_norm(f: GridFunction, domain: Domain | None,
                         cells: str | None = None) -> NormReport:
    """Oscillation supremum over every dyadic cube inside the domain."""
    if cells is None:
        cells = "inside" if domain is not None else "defined"
    require_defined(f, cells)
    small, s_at, _, _, _, _, subs = _sweep(f, domain, None, cells)
    return NormReport(small, small, 0.0, None, s_at, s_at, None,
                      excluded_volume_fraction=f.straddling_fraction,
                      subsampled=subs)


def bmo_local_norm(f: GridFunction, domain: Domain,
                   cells: str = "inside") -> NormReport:
    """Oscillation supremum over dyadic cubes whose concentric double stays
    inside the domain: the cube surrogate of the ball-based local seminorm
    (doubles in place of doubled balls; constants differ only by dimensional
    factors). Reports carry surrogate=True."""
    require_defined(f, cells)
    small, s_at, _, _, _, _, subs = _sweep(f, domain, None, cells,
                                           margin_factor=SQRT_N)
    return NormReport(small, small, 0.0, None, s_at, s_at, None,
                      excluded_volume_fraction=f.straddling_fraction,
                      subsampled=subs, surrogate=True)


def dyadic_abc_norm(f: GridFunction, lam: float) -> NormReport:
    """Dyadic data of a whole-window function: oscillation sup (a), adjacent
    equal-size average gaps (b), absolute averages above lam/(16 sqrt n) (c),
    together with the direct scale-lambda sweep for comparison."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    cells = "defined"
    require_defined(f, cells)
    a_val = 0.0
    b_val = 0.0
    c_val = 0.0
    c_floor = lam / (16.0 * SQRT_N)
    for lvl in range(0, f.level + 1):
        side = f.window.cell_size(lvl)
        means, osc, counts = _level_stats(f, lvl, cells)
        ok = counts > 0
        if ok.any():
            a_val = max(a_val, float(np.max(np.where(ok, osc, -math.inf))))
            if side >= c_floor:
                c_val = max(c_val, float(np.max(np.where(ok, np.abs(means), -math.inf))))
        for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
            lo_i, hi_i = max(0, -di), means.shape[0] - max(0, di)
            lo_j, hi_j = max(0, -dj), means.shape[1] - max(0, dj)
            m1 = means[lo_i:hi_i, lo_j:hi_j]
            m2 = means[lo_i + di:hi_i + di, lo_j + dj:hi_j + dj]
            both = ok[lo_i:hi_i, lo_j:hi_j] & ok[lo_i + di:hi_i + di, lo_j + dj:hi_j + dj]
            if both.any():
                b_val = max(b_val, float(np.max(np.where(both, np.abs(m1 - m2), -math.inf))))
    direct = bmo_lambda_norm(f, None, lam, cells=cells)
    direct.abc = (a_val, b_val, c_val)
    return direct


# ---------------------------------------------------------------------------
# test-function generators

def _field_graph(domain: Domain, window: Window, level: int) -> MetricGraph:
    # node margin slightly under half the diagonal so every inside cell is a node
    margin = 0.5 * SQRT_N * (1.0 - 1e-9)
    return build_metric_graph(domain, window, 2.0 ** (-level), node_margin=margin)


def qh_distance_field(domain: Domain, a, resolution: float,
                      window: Window | None = None,
                      graph: MetricGraph | None = None) -> GridFunction:
    """Grid field of quasi-hyperbolic distances from the source point."""
    a = np.asarray(a, dtype=float)
    if domain.sd(a) <= 0:
        raise ValueError("source point must lie inside the domain")
    window = window or domain.default_window
    level = round(math.log2(1.0 / resolution))
    if graph is None:
        graph = _field_graph(domain, window, level)
    mask, _, _ = classify_cells(domain, window, level)
    src = graph.snap(a)
    leg, _, leg_ok = segment_qh_batch(domain, a[None, :], graph.node_pos[src][None, :])
    if not leg_ok[0]:
        raise ValueError("source too close to the boundary for this resolution")
    dist, _ = graph.shortest_paths(src)

    n = 1 << level
    vals = np.full((n, n), np.nan)
    node_cells = graph.node_grid >= 0
    vals[node_cells] = dist[graph.node_grid[node_cells]] + leg[0]
    unreachable = (mask == MASK_INSIDE) & ~np.isfinite(np.where(node_cells, vals, np.inf))
    if unreachable.any():
        raise DisconnectedGraphError(
            f"{int(unreachable.sum())} inside cells unreachable from the source; "
            "refine the resolution")
    vals = np.where(mask == MASK_INSIDE, vals, np.nan)
    return GridFunction(window, level, vals, mask)


def dipole_field(domain: Domain, z1, z2, r1: float, r2: float,
                 resolution: float, window: Window | None = None,
                 graph: MetricGraph | None = None) -> GridFunction:
    """Difference of two truncated distance cones: bounded, vanishes far
    from both sources once the radii are below their interior access."""
    if r1 < 0 or r2 < 0:
        raise ValueError("radii must be nonnegative")
    window = window or domain.default_window
    level = round(math.log2(1.0 / resolution))
    if graph is None:
        graph = _field_graph(domain, window, level)
    f1 = qh_distance_field(domain, z1, resolution, window, graph)
    f2 = qh_distance_field(domain, z2, resolution, window, graph)
    vals = np.maximum(r1 - f1.values, 0.0) - np.maximum(r2 - f2.values, 0.0)
    return GridFunction(window, level, vals, f1.mask.copy())


def whitney_cellwise_field(dec, grid_level: int, rng,
                           amplitude: float = 0.5) -> GridFunction:
    """Random function constant on each domain Whitney cube, so adjacent
    averages differ by at most 2*amplitude; inside cells not covered by a
    cube inherit the nearest filled neighbor."""
    from .whitney import TAG_DOMAIN

    window = dec.window
    n = 1 << grid_level
    mask, _, _ = classify_cells(dec.domain, window, grid_level)
    vals = np.full((n, n), np.nan)
    for idx in dec.indices(TAG_DOMAIN):
        info = dec.cubes[idx]
        if info.level > grid_level:
            continue
        v = float(rng.uniform(-amplitude, amplitude))
        f = 1 << (grid_level - info.level)
        i, j = info.coords
        vals[i * f:(i + 1) * f, j * f:(j + 1) * f] = v
    # flood unfilled inside cells from filled neighbors, deterministic order
    need = (mask == MASK_INSIDE) & ~np.isfinite(vals)
    guard = 0
    while need.any() and guard < 4 * n:
        guard += 1
        filled = np.isfinite(vals)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            src = np.roll(vals, (di, dj), axis=(0, 1))
            src_ok = np.roll(filled, (di, dj), axis=(0, 1))
            if di == 1:
                src_ok[0, :] = False
            if di == -1:
                src_ok[-1, :] = False
            if dj == 1:
                src_ok[:, 0] = False
            if dj == -1:
                src_ok[:, -1] = False
            take = need & src_ok
            vals[take] = src[take]
            need = need & ~take
    vals = np.where(mask == MASK_INSIDE, vals, np.nan)
    return GridFunction(window, grid_level, vals, mask)


# ---------------------------------------------------------------------------
# average growth and gap checks

def _cube_means_lookup(f: GridFunction, levels):
    out = {}
    for lvl in sorted(set(levels)):
        means, _, counts = _level_stats(f, lvl, "inside")
        out[lvl] = (means, counts)
    return out


def log_growth_ratio(f: GridFunction, dec, lam: float) -> float:
    """max over domain Whitney cubes of |average| / (1 + log_+(lam/side))."""
    from .whitney import TAG_DOMAIN

    idxs = [k for k in dec.indices(TAG_DOMAIN) if dec.cubes[k].level <= f.level]
    lookup = _cube_means_lookup(f, [dec.cubes[k].level for k in idxs])
    best = 0.0
    for k in idxs:
        info = dec.cubes[k]
        means, counts = lookup[info.level]
        i, j = info.coords
        if counts[i, j] == 0:
            continue
        side = dec.window.cell_size(info.level)
        best = max(best, abs(float(means[i, j])) / (1.0 + log_plus(lam / side)))
    return best


def adjacent_average_gap(f: GridFunction, dec) -> float:
    """max over adjacent domain Whitney cube pairs of the average gap."""
    from .whitney import TAG_DOMAIN

    idxs = [k for k in dec.indices(TAG_DOMAIN) if dec.cubes[k].level <= f.level]
    keep = set(idxs)
    lookup = _cube_means_lookup(f, [dec.cubes[k].level for k in idxs])

    def mean_of(k):
        info = dec.cubes[k]
        means, counts = lookup[info.level]
        i, j = info.coords
        return float(means[i, j]) if counts[i, j] > 0 else None

    best = 0.0
    for k in idxs:
        mk = mean_of(k)
        if mk is None:
            continue
        for nb in dec.adjacency[k]:
            if nb <= k or nb not in keep:
                continue
            mn = mean_of(nb)
            if mn is None:
                continue
            best = max(best, abs(mk - mn))
    return best
