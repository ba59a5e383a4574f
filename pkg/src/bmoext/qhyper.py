"""Quasi-hyperbolic lengths, distances and geodesics.

The length of a curve is the line integral of 1/dist(z, boundary). Segment
integrals are bracketed with the 1-Lipschitz property of the distance
oracle: on a panel of length L with midpoint clearance m > L/2 the true
integral lies in [L/(m + L/2), L/(m - L/2)], so midpoint refinement gives a
rigorous error bound. Distances come from Dijkstra on an 8-connected grid
graph followed by a local curve-shortening pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra as _sp_dijkstra

from .domains import Domain
from .dyadic import Window
from .errors import DisconnectedGraphError, EmptyInteriorError, QuadratureError

_SD_FLOOR_FRAC = 1e-12  # of the window side: below this the integrand is unbounded


def segment_qh_batch(domain: Domain, a, b, rtol: float = 1e-3,
                     max_doublings: int = 22, floor: float = 0.0,
                     eval_budget: int = 1 << 25):
    """Integrate ds/dist over straight segments a[i] -> b[i].

    Midpoint refinement; the Lipschitz bracket per panel (clearance m,
    panel length L, m > L/2) gives a rigorous error bound, so segments are
    doubled until err <= rtol * value. Returns (values, errors, valid).
    Segments that touch or cross the boundary come back with valid=False
    and value=inf; callers decide whether that is an error.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    m = len(a)
    seg_len = np.hypot(b[:, 0] - a[:, 0], b[:, 1] - a[:, 1])
    vals = np.zeros(m)
    errs = np.zeros(m)
    valid = np.ones(m, dtype=bool)

    active = np.nonzero(seg_len > 0.0)[0]
    panels = 1
    while active.size and panels <= (1 << max_doublings):
        chunk = max(1, eval_budget // panels)
        next_active = []
        for lo in range(0, active.size, chunk):
            act = active[lo:lo + chunk]
            t = (np.arange(panels) + 0.5) / panels
            seg = b[act] - a[act]
            pts = a[act, None, :] + t[None, :, None] * seg[:, None, :]
            sd = domain.signed_distance(pts.reshape(-1, 2)).reshape(act.size, panels)
            lp = seg_len[act] / panels

            dead = (sd <= floor).any(axis=1)
            bracketable = (sd > 0.5 * lp[:, None]).all(axis=1) & ~dead
            done = np.zeros(act.size, dtype=bool)
            if bracketable.any():
                rows = np.nonzero(bracketable)[0]
                sdr = sd[rows]
                lpr = lp[rows, None]
                v = (lpr / sdr).sum(axis=1)
                e = (lpr * (0.5 * lpr) / (sdr * (sdr - 0.5 * lpr))).sum(axis=1)
                vals[act[rows]] = v
                errs[act[rows]] = e
                done[rows] = e <= rtol * np.maximum(v, 1e-300)
            if dead.any():
                vals[act[dead]] = np.inf
                errs[act[dead]] = np.inf
                valid[act[dead]] = False
            next_active.append(act[~(dead | done)])
        active = np.concatenate(next_active) if next_active else np.empty(0, dtype=int)
        panels *= 2

    if active.size:
        # segments that never bracketed are boundary contacts; the rest keep
        # their best value with the achieved (looser than rtol) error bound
        hard = active[~np.isfinite(vals[active])]
        vals[hard] = np.inf
        errs[hard] = np.inf
        valid[hard] = False
    return vals, errs, valid


def _panel_cost(domain: Domain, a, b, panels: int = 8, floor: float = 0.0):
    """Cheap fixed-panel midpoint estimate used for candidate comparison.

    valid requires clearance > panel length / 2 at every panel midpoint,
    which certifies the whole segment stays inside the domain.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    seg_len = np.hypot(b[:, 0] - a[:, 0], b[:, 1] - a[:, 1])
    t = (np.arange(panels) + 0.5) / panels
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    sd = domain.signed_distance(pts.reshape(-1, 2)).reshape(len(a), panels)
    lp = seg_len / panels
    ok = (sd > np.maximum(0.5 * lp[:, None], floor)).all(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        est = (lp[:, None] / sd).sum(axis=1)
    est = np.where(seg_len == 0.0, 0.0, est)
    ok |= seg_len == 0.0
    return np.where(ok, est, np.inf), ok


@dataclass
class Polyline:
    """Rectifiable curve as ordered points, with cached lengths."""

    points: np.ndarray
    qh_value: float | None = None
    qh_error: float | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if len(self.points) < 2:
            raise ValueError("polyline needs at least two points")

    @property
    def euclidean_length(self) -> float:
        d = np.diff(self.points, axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())

    def cum_arclength(self) -> np.ndarray:
        d = np.diff(self.points, axis=0)
        return np.concatenate([[0.0], np.cumsum(np.hypot(d[:, 0], d[:, 1]))])

    def resample(self, n: int) -> np.ndarray:
        """n points at uniform arclength spacing (endpoints included)."""
        cum = self.cum_arclength()
        s = np.linspace(0.0, cum[-1], n)
        x = np.interp(s, cum, self.points[:, 0])
        y = np.interp(s, cum, self.points[:, 1])
        return np.column_stack([x, y])


def polyline_in_domain(domain: Domain, pts: np.ndarray) -> bool:
    """Vertices and segment midpoints all strictly inside."""
    pts = np.atleast_2d(pts)
    mids = 0.5 * (pts[:-1] + pts[1:])
    probe = np.vstack([pts, mids])
    return bool((domain.signed_distance(probe) > 0.0).all())


def qh_length(domain: Domain, gamma, tol: float = 1e-6):
    """Adaptive quasi-hyperbolic length of a polyline with error bound.

    Returns (value, err) with err <= tol * value unless the refinement
    budget runs out, in which case err reports the achieved bound.
    Raises QuadratureError when the curve touches or leaves the domain.
    """
    pts = gamma.points if isinstance(gamma, Polyline) else np.atleast_2d(np.asarray(gamma, float))
    scale = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1.0)
    vals, errs, valid = segment_qh_batch(domain, pts[:-1], pts[1:], rtol=tol,
                                         floor=_SD_FLOOR_FRAC * scale)
    if not valid.all():
        k = int(np.nonzero(~valid)[0][0])
        raise QuadratureError(
            f"unbounded integrand on segment {k} "
            f"({pts[k]} -> {pts[k + 1]}): curve touches the boundary")
    if isinstance(gamma, Polyline):
        gamma.qh_value = float(vals.sum())
        gamma.qh_error = float(errs.sum())
    return float(vals.sum()), float(errs.sum())


def j_distance(domain: Domain, x, y) -> float:
    """Logarithmic distance from the point gaps to the boundary clearances."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    dx = domain.sd(x)
    dy = domain.sd(y)
    if dx <= 0 or dy <= 0:
        raise ValueError("both points must lie inside the domain")
    r = float(np.hypot(*(x - y)))
    return 0.5 * math.log((1.0 + r / dx) * (1.0 + r / dy))


# ---------------------------------------------------------------------------
# grid graph

_OFFSETS = ((1, 0), (0, 1), (1, 1), (1, -1))


@dataclass
class MetricGraph:
    """8-connected grid discretization with quasi-hyperbolic edge weights."""

    domain: Domain
    window: Window
    level: int
    node_pos: np.ndarray
    node_sd: np.ndarray
    node_grid: np.ndarray          # (N, N) int32 node index, -1 where absent
    adj: csr_matrix = field(repr=False)

    @property
    def h(self) -> float:
        return self.window.cell_size(self.level)

    @property
    def n_nodes(self) -> int:
        return len(self.node_pos)

    def snap(self, p) -> int:
        """Nearest node to p, ties broken by cell index."""
        p = np.asarray(p, float)
        if not self.window.contains_point(p):
            raise ValueError(f"point {tuple(p)} lies outside the graph window "
                             f"{self.window.origin} + {self.window.size}")
        n = 1 << self.level
        i0, j0 = self.window.cell_of_point(p, self.level)
        best = None
        ring = 0
        while ring < 2 * n:
            ilo, ihi = max(i0 - ring, 0), min(i0 + ring, n - 1)
            jlo, jhi = max(j0 - ring, 0), min(j0 + ring, n - 1)
            cells = []
            for i in range(ilo, ihi + 1):
                for j in (jlo, jhi) if ring else (j0,):
                    cells.append((i, j))
            if ring:
                for j in range(jlo + 1, jhi):
                    for i in (ilo, ihi):
                        cells.append((i, j))
            for i, j in cells:
                idx = self.node_grid[i, j]
                if idx >= 0:
                    d2 = float(((self.node_pos[idx] - p) ** 2).sum())
                    cand = (d2, i, j, idx)
                    if best is None or cand < best:
                        best = cand
            if best is not None and ring > best[0] ** 0.5 / self.h + 1:
                break
            ring += 1
        if best is None:
            raise DisconnectedGraphError("no graph node in the window; "
                                         "resolution too coarse for this domain")
        return best[3]

    def shortest_paths(self, src: int):
        """(distances, predecessors) from one node to all nodes."""
        dist, pred = _sp_dijkstra(self.adj, directed=True, indices=src,
                                  return_predecessors=True)
        return dist, pred

    def path_nodes(self, pred: np.ndarray, dst: int) -> list[int]:
        out = [dst]
        while pred[out[-1]] >= 0:
            out.append(int(pred[out[-1]]))
        return out[::-1]

    def component_sizes(self):
        ncomp, labels = connected_components(self.adj, directed=False)
        return np.bincount(labels, minlength=ncomp), labels


def _as_level(resolution: float) -> int:
    level = round(math.log2(1.0 / resolution))
    if not (0 < level <= 14) or abs(2.0 ** (-level) - resolution) > 1e-12:
        raise ValueError(f"resolution must be a dyadic fraction 1/2^k, got {resolution}")
    return level


def build_metric_graph(domain: Domain, window: Window, resolution: float,
                       node_margin: float = math.sqrt(2.0),
                       edge_rtol: float = 2e-2) -> MetricGraph:
    """Build the grid graph at cell size `resolution * window.size`.

    Nodes are cell centers with clearance above node_margin * cell size
    (default: the cell diagonal). Edge weights integrate 1/dist along the
    straight segment; edges whose integrand cannot be bracketed are dropped.
    """
    level = _as_level(resolution)
    n = 1 << level
    h = window.cell_size(level)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    centers = np.column_stack([
        window.origin[0] + (ii.ravel() + 0.5) * h,
        window.origin[1] + (jj.ravel() + 0.5) * h,
    ])
    sd = domain.signed_distance(centers)
    is_node = sd > node_margin * h
    node_grid = np.full((n, n), -1, dtype=np.int64)
    flat = np.nonzero(is_node)[0]
    node_grid.ravel()[flat] = np.arange(flat.size)
    node_pos = centers[flat]
    node_sd = sd[flat]

    rows, cols, data = [], [], []
    floor = _SD_FLOOR_FRAC * window.size
    for di, dj in _OFFSETS:
        lo_i = max(0, -di)
        hi_i = n - max(0, di)
        lo_j = max(0, -dj)
        hi_j = n - max(0, dj)
        from_ids = node_grid[lo_i:hi_i, lo_j:hi_j]
        to_ids = node_grid[lo_i + di:hi_i + di, lo_j + dj:hi_j + dj]
        ok = (from_ids >= 0) & (to_ids >= 0)
        f = from_ids[ok]
        t = to_ids[ok]
        if f.size == 0:
            continue
        w, _, valid = segment_qh_batch(domain, node_pos[f], node_pos[t],
                                       rtol=edge_rtol, floor=floor)
        f, t, w = f[valid], t[valid], w[valid]
        rows.append(f)
        cols.append(t)
        data.append(w)
        rows.append(t)
        cols.append(f)
        data.append(w)

    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        data = np.concatenate(data)
    adj = csr_matrix((data, (rows, cols)), shape=(len(node_pos), len(node_pos)))
    return MetricGraph(domain, window, level, node_pos, node_sd, node_grid, adj)


# ---------------------------------------------------------------------------
# geodesic refinement

def _refine_path(domain: Domain, pts: np.ndarray, h: float,
                 rel_tol: float = 1e-4, max_rounds: int = 60) -> np.ndarray:
    """Iterative midpoint/normal perturbation decreasing the qh length.

    Interior vertices move to the best of a fixed candidate set; alternating
    parity keeps simultaneous updates independent. Stops when a full round
    improves the total by less than rel_tol (relative).
    """
    pts = np.array(pts, dtype=float)
    scale = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), h)
    floor = _SD_FLOOR_FRAC * scale

    def total(p):
        v, ok = _panel_cost(domain, p[:-1], p[1:], floor=floor)
        return math.inf if not ok.all() else float(v.sum())

    def split_long(p, max_len):
        d = np.hypot(*(p[1:] - p[:-1]).T)
        if (d <= max_len).all():
            return p
        out = [p[0]]
        for k in range(len(p) - 1):
            if d[k] > max_len:
                m = int(math.ceil(d[k] / max_len))
                for t in range(1, m):
                    out.append(p[k] + (p[k + 1] - p[k]) * (t / m))
            out.append(p[k + 1])
        return np.asarray(out)

    pts = split_long(pts, 2.0 * h)
    prev = total(pts)
    for _ in range(max_rounds):
        for parity in (1, 0):
            idx = np.arange(1, len(pts) - 1)
            idx = idx[idx % 2 == parity]
            if idx.size == 0:
                continue
            p_prev = pts[idx - 1]
            p_next = pts[idx + 1]
            cur = pts[idx]
            mid = 0.5 * (p_prev + p_next)
            chord = p_next - p_prev
            clen = np.hypot(chord[:, 0], chord[:, 1])
            nrm = np.column_stack([-chord[:, 1], chord[:, 0]])
            nrm /= np.maximum(clen, 1e-300)[:, None]
            amp = np.maximum(0.5 * clen, 0.25 * h)[:, None]
            cands = np.stack([
                cur,
                mid,
                mid + 0.25 * amp * nrm,
                mid - 0.25 * amp * nrm,
                mid + 0.5 * amp * nrm,
                mid - 0.5 * amp * nrm,
                cur + 0.25 * amp * nrm,
                cur - 0.25 * amp * nrm,
            ])                                  # (K, m, 2)
            k_c, m_c, _ = cands.shape
            a = np.broadcast_to(p_prev, (k_c, m_c, 2)).reshape(-1, 2)
            b = cands.reshape(-1, 2)
            c = np.broadcast_to(p_next, (k_c, m_c, 2)).reshape(-1, 2)
            v1, ok1 = _panel_cost(domain, a, b, floor=floor)
            v2, ok2 = _panel_cost(domain, b, c, floor=floor)
            cost = np.where(ok1 & ok2, v1 + v2, np.inf).reshape(k_c, m_c)
            best = np.argmin(cost, axis=0)      # first minimum: 'stay' wins ties
            pts[idx] = cands[best, np.arange(m_c)]
        pts = split_long(pts, 2.0 * h)
        cur_total = total(pts)
        if not math.isfinite(cur_total) and not math.isfinite(prev):
            break
        if prev - cur_total <= rel_tol * max(abs(cur_total), 1e-12):
            break
        prev = cur_total
    return pts


def qh_distance(domain: Domain, x, y, resolution: float,
                window: Window | None = None, graph: MetricGraph | None = None,
                refine: bool = True, quad_tol: float = 2e-3):
    """Quasi-hyperbolic distance estimate and witness geodesic.

    Dijkstra on the grid graph, then curve shortening; the estimate is the
    quadrature length of an actual curve, hence an upper bound up to the
    returned quadrature error.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if domain.sd(x) <= 0 or domain.sd(y) <= 0:
        raise ValueError("both endpoints must lie inside the domain")
    if graph is None:
        window = window or domain.default_window
        graph = build_metric_graph(domain, window, resolution)
    if np.allclose(x, y):
        pl = Polyline(np.array([x, y]), qh_value=0.0, qh_error=0.0)
        return 0.0, pl

    src = graph.snap(x)
    dst = graph.snap(y)
    if src == dst:
        pts = np.array([x, graph.node_pos[src], y])
    else:
        dist, pred = graph.shortest_paths(src)
        if not np.isfinite(dist[dst]):
            sizes, _ = graph.component_sizes()
            raise DisconnectedGraphError(
                f"endpoints in different grid components (sizes {sorted(sizes, reverse=True)[:4]}); "
                "refine the resolution", component_sizes=list(sizes))
        nodes = graph.path_nodes(pred, dst)
        pts = np.vstack([x[None, :], graph.node_pos[nodes], y[None, :]])
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.hypot(*(pts[1:] - pts[:-1]).T) > 1e-15
    pts = pts[keep]
    if len(pts) < 2:
        pts = np.array([x, y])
    if refine:
        pts = _refine_path(domain, pts, graph.h)
    value, err = qh_length(domain, pts, tol=quad_tol)
    return value, Polyline(pts, qh_value=value, qh_error=err)


@dataclass
class InteriorDistance:
    """Distance from a point to the thick interior {dist >= lam}."""

    value: float
    attaining: np.ndarray
    path: Polyline
    raw_value: float        # restricted-Dijkstra value before curve shortening
    search_radius: float


def qh_distance_to_interior(domain: Domain, x, lam: float, resolution: float,
                            window: Window | None = None,
                            graph: MetricGraph | None = None,
                            refine: bool = True) -> InteriorDistance:
    """Shortest quasi-hyperbolic access to {dist >= lam}.

    A first pass to an arbitrary interior node bounds the search ball
    B_R(x) with R = max(lam * k(x, y0), |x - y0|); the reported distance
    comes from the Dijkstra run restricted to that ball.
    """
    x = np.asarray(x, float)
    if domain.sd(x) <= 0:
        raise ValueError("x must lie inside the domain")
    if domain.sd(x) >= lam:
        pl = Polyline(np.array([x, x + 0.0]), qh_value=0.0, qh_error=0.0)
        return InteriorDistance(0.0, x, pl, 0.0, 0.0)
    if graph is None:
        window = window or domain.default_window
        graph = build_metric_graph(domain, window, resolution)

    targets = np.nonzero(graph.node_sd >= lam)[0]
    if targets.size == 0:
        raise EmptyInteriorError(
            f"interior set empty at this lambda ({lam:g}) in the window; "
            "the scale-lambda norm equals the homogeneous norm here")

    src = graph.snap(x)
    leg_val, leg_err, leg_ok = segment_qh_batch(
        domain, x[None, :], graph.node_pos[src][None, :],
        floor=_SD_FLOOR_FRAC * graph.window.size)
    if not leg_ok[0]:
        raise QuadratureError("snap segment touches the boundary; refine resolution")
    dist, pred = graph.shortest_paths(src)

    gap = np.hypot(graph.node_pos[targets, 0] - x[0], graph.node_pos[targets, 1] - x[1])
    reach = np.isfinite(dist[targets])
    if not reach.any():
        sizes, _ = graph.component_sizes()
        raise DisconnectedGraphError("no interior node reachable at this resolution",
                                     component_sizes=list(sizes))
    order = np.lexsort((targets[reach], gap[reach]))
    y0 = targets[reach][order[0]]
    k_xy0 = float(dist[y0] + leg_val[0])
    radius = max(lam * k_xy0, float(gap[reach][order[0]]))

    ball = np.hypot(graph.node_pos[:, 0] - x[0], graph.node_pos[:, 1] - x[1]) <= radius
    ball[src] = True
    sub_ids = np.nonzero(ball)[0]
    remap = -np.ones(graph.n_nodes, dtype=np.int64)
    remap[sub_ids] = np.arange(sub_ids.size)
    sub = graph.adj[sub_ids][:, sub_ids]
    sdist, spred = _sp_dijkstra(sub, directed=True, indices=remap[src],
                                return_predecessors=True)

    tgt_in_ball = targets[ball[targets]]
    tvals = sdist[remap[tgt_in_ball]]
    if not np.isfinite(tvals).any():
        raise DisconnectedGraphError("interior unreachable inside the search ball")
    korder = np.lexsort((tgt_in_ball, tvals))
    t_star = tgt_in_ball[korder[0]]
    raw = float(tvals[korder[0]] + leg_val[0])

    chain = [t_star]
    while spred[remap[chain[-1]]] >= 0:
        chain.append(int(sub_ids[spred[remap[chain[-1]]]]))
    chain = chain[::-1]
    pts = np.vstack([x[None, :], graph.node_pos[chain]])
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.hypot(*(pts[1:] - pts[:-1]).T) > 1e-15
    pts = pts[keep]
    if len(pts) < 2:
        pts = np.vstack([x[None, :], graph.node_pos[t_star][None, :]])
    if refine and len(pts) > 2:
        pts = _refine_path(domain, pts, graph.h)
    value, err = qh_length(domain, pts, tol=2e-3)
    value = min(value, raw)
    return InteriorDistance(value, graph.node_pos[t_star].copy(),
                            Polyline(pts, qh_value=value, qh_error=err),
                            raw, radius)


def eta_lambda(domain: Domain, x, y, lam: float, resolution: float,
               window: Window | None = None,
               graph: MetricGraph | None = None) -> float:
    """Sum of the interior-access distances of the two points."""
    a = qh_distance_to_interior(domain, x, lam, resolution, window=window, graph=graph)
    b = qh_distance_to_interior(domain, y, lam, resolution, window=window, graph=graph)
    return a.value + b.value
