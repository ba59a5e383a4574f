"""Cigar-condition diagnostics: per-curve constants, certified per-pair
upper bounds, sampled estimates of the best (epsilon, delta) fit, and the
quasi-hyperbolic uniformity envelope.

The per-pair estimate from a fixed curve menu is only an achieved value;
negative evidence uses a sound upper bound instead: every curve joining x
and y crosses the perpendicular bisector inside the domain, and on it the
clearance condition caps epsilon by d(z) |x-y| / (|z-x| |z-y|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domains import Domain
from .dyadic import Window
from .errors import GeometryError, QuadratureError
from .qhyper import (MetricGraph, Polyline, build_metric_graph, j_distance,
                     qh_distance, qh_length, segment_qh_batch)

ENDPOINT_EXCLUSION = 1e-3
SQRT2 = math.sqrt(2.0)      # arclength fraction dropped around each endpoint
CURVE_SAMPLES = 1000
C_GRID = [2.0 ** k / 8.0 for k in range(11)]   # envelope slopes scanned


def _resample_curve(gamma) -> tuple[np.ndarray, np.ndarray, float]:
    pl = gamma if isinstance(gamma, Polyline) else Polyline(np.asarray(gamma, float))
    s = pl.euclidean_length
    pts = pl.resample(CURVE_SAMPLES + 1)
    t = np.linspace(0.0, 1.0, CURVE_SAMPLES + 1)
    return pts, t, s


def curve_epsilon(domain: Domain, x, y, gamma) -> float:
    """Best cigar epsilon the given curve certifies for the pair (x, y).

    min of the length factor |x-y|/s and the worst clearance quotient along
    the curve, sampled at arclength steps s/1000 with the endpoint fractions
    excluded; clamped to 1.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    sep = float(np.hypot(*(x - y)))
    if sep <= 0:
        raise ValueError("pair must have distinct endpoints")
    pts, t, s = _resample_curve(gamma)
    if np.hypot(*(pts[0] - x)) > 1e-9 * max(1.0, sep) or \
       np.hypot(*(pts[-1] - y)) > 1e-9 * max(1.0, sep):
        raise ValueError("curve does not join the given endpoints")
    sd = domain.signed_distance(pts)
    if (sd <= 0.0).any():
        raise QuadratureError("curve exits the domain")
    inner = (t > ENDPOINT_EXCLUSION) & (t < 1.0 - ENDPOINT_EXCLUSION)
    dz_x = np.hypot(pts[inner, 0] - x[0], pts[inner, 1] - x[1])
    dz_y = np.hypot(pts[inner, 0] - y[0], pts[inner, 1] - y[1])
    john = sd[inner] * sep / np.maximum(dz_x * dz_y, 1e-300)
    return min(1.0, sep / s, float(john.min()))


def curve_length_cigar(domain: Domain, x, y, gamma) -> tuple[float, float]:
    """Length-cigar constants of one curve: a = s/|x-y| and b = the worst
    ratio of the shorter arclength to the clearance."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    sep = float(np.hypot(*(x - y)))
    if sep <= 0:
        raise ValueError("pair must have distinct endpoints")
    pts, t, s = _resample_curve(gamma)
    sd = domain.signed_distance(pts)
    if (sd <= 0.0).any():
        raise QuadratureError("curve exits the domain")
    arc = t * s
    shorter = np.minimum(arc, s - arc)
    b = float(np.max(shorter / np.maximum(sd, 1e-300)))
    return s / sep, b


def epsilon_from_ab(a: float, b: float) -> float:
    """Cigar epsilon guaranteed by length-cigar constants: min(1/a, 1/(ab))."""
    if a <= 0 or b <= 0:
        raise ValueError("length-cigar constants must be positive")
    if a < 1.0 - 1e-9:
        raise ValueError("a = s/|x-y| cannot be below 1")
    a = max(a, 1.0)
    return min(1.0, 1.0 / a, 1.0 / (a * b))


def epsilon_upper_bound(domain: Domain, x, y, slack: float = 1.05) -> float:
    """Certified upper bound on the pair's cigar epsilon.

    Samples the perpendicular bisector (which every joining curve must
    cross inside the domain), refines around the maximum, and adds a
    Lipschitz tail bound beyond the sampled reach.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    sep = float(np.hypot(*(x - y)))
    if sep <= 0:
        raise ValueError("pair must have distinct endpoints")
    dx = max(domain.sd(x), 0.0)
    mid = 0.5 * (x + y)
    u = np.array([-(y - x)[1], (y - x)[0]]) / sep

    reach = max(256.0 * sep, 64.0 * (dx + domain.sd(y) + sep), 8.0)
    tg = np.geomspace(sep * 1e-3, reach, 160)
    ts = np.concatenate([-tg[::-1], [0.0], tg])

    def quotient(tvals):
        z = mid[None, :] + tvals[:, None] * u[None, :]
        sd = domain.signed_distance(z)
        rx = np.hypot(z[:, 0] - x[0], z[:, 1] - x[1])
        ry = np.hypot(z[:, 0] - y[0], z[:, 1] - y[1])
        q = np.where(sd > 0.0, sd * sep / np.maximum(rx * ry, 1e-300), 0.0)
        return q

    q = quotient(ts)
    for _ in range(4):
        k = int(np.argmax(q))
        lo = ts[max(0, k - 1)]
        hi = ts[min(len(ts) - 1, k + 1)]
        if hi <= lo:
            break
        ts = np.linspace(lo, hi, 65)
        q_new = quotient(ts)
        best = max(float(q.max()), float(q_new.max()))
        ts = np.concatenate([ts, [ts[int(np.argmax(q_new))]]])
        q = np.concatenate([q_new, [best]])
    s_r = math.hypot(0.5 * sep, reach)
    tail = (dx + s_r) * sep / s_r ** 2
    return min(1.0, max(float(q.max()) * slack, tail))


# ---------------------------------------------------------------------------
# pair sampling

@dataclass
class PairSample:
    x: np.ndarray
    y: np.ndarray
    sep: float
    kind: str                      # "uniform" or "adversarial"
    scale_index: int | None = None
    eps_curve: float | None = None
    eps_cap: float | None = None
    a: float | None = None
    b: float | None = None
    j_xy: float | None = None
    k_xy: float | None = None
    curve: Polyline | None = None
    flagged: bool = False

    @property
    def eps(self) -> float:
        vals = [v for v in (self.eps_curve, self.eps_cap) if v is not None]
        return min(vals) if vals else math.nan


@dataclass
class ClassificationReport:
    domain_label: str
    delta: float
    epsilon_hat: float
    ab_hat: tuple[float, float]
    cd_hat: tuple[float, float]
    pair_count: int
    worst_pairs: list[PairSample]
    verdict: str
    cap_scale_minima: list[tuple[int, float]] = field(default_factory=list)
    fit_offsets: list[tuple[int, float]] = field(default_factory=list)
    flagged_pairs: int = 0
    resolution: float | None = None
    seed: int | None = None
    pairs: list[PairSample] = field(default_factory=list)
    details: dict = field(default_factory=dict)


def _uniform_pairs(domain: Domain, window: Window, delta: float, n_pairs: int,
                   rng, margin: float) -> list[PairSample]:
    """Seeded pairs with separation under delta and endpoint clearance above
    `margin`; independent of any grid so runs at different resolutions see
    identical pairs."""
    out = []
    tries = 0
    o = np.asarray(window.origin)
    while len(out) < n_pairs and tries < 200 * n_pairs:
        tries += 1
        x = o + rng.uniform(0.0, window.size, size=2)
        if domain.sd(x) <= margin:
            continue
        r = float(delta * 10 ** rng.uniform(-1.2, 0.0)) * 0.95
        th = float(rng.uniform(0.0, 2.0 * math.pi))
        y = x + r * np.array([math.cos(th), math.sin(th)])
        if not window.contains_point(y) or domain.sd(y) <= margin:
            continue
        sep = float(np.hypot(*(x - y)))
        if sep >= delta or sep <= 4.0 * margin:
            continue
        out.append(PairSample(x, y, sep, "uniform"))
    return out


def _gradient(domain: Domain, pts: np.ndarray, step: float) -> np.ndarray:
    e1 = np.array([step, 0.0])
    e2 = np.array([0.0, step])
    gx = domain.signed_distance(pts + e1) - domain.signed_distance(pts - e1)
    gy = domain.signed_distance(pts + e2) - domain.signed_distance(pts - e2)
    g = np.column_stack([gx, gy]) / (2.0 * step)
    norm = np.hypot(g[:, 0], g[:, 1])
    ok = norm > 0.1
    g[ok] /= norm[ok, None]
    return np.where(ok[:, None], g, np.nan)


def _boundary_cloud(domain: Domain, seeds: np.ndarray, spacing: float):
    """March seed points onto the boundary; returns (points, inward normals)."""
    step = max(1e-6 * spacing, 1e-12)
    sd = domain.signed_distance(seeds)
    band = np.abs(sd) < 4.0 * spacing
    pts = seeds[band]
    if len(pts) == 0:
        return np.empty((0, 2)), np.empty((0, 2))
    normals = np.full_like(pts, np.nan)
    for _ in range(6):
        sd = domain.signed_distance(pts)
        g = _gradient(domain, pts, step)
        ok = np.isfinite(g[:, 0])
        fresh = ok & (np.abs(sd) > 10.0 * step)
        normals[fresh] = g[fresh]
        pts = np.where((ok & (np.abs(sd) > 1e-9 * spacing))[:, None],
                       pts - sd[:, None] * np.where(np.isfinite(g), g, 0.0), pts)
    sd = domain.signed_distance(pts)
    good = (np.abs(sd) < 0.05 * spacing) & np.isfinite(normals[:, 0])
    return pts[good], normals[good]


def _segment_exits(domain: Domain, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    t = np.linspace(0.0, 1.0, 33)[1:-1]
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    sd = domain.signed_distance(pts.reshape(-1, 2)).reshape(len(a), -1)
    return (sd <= 0.0).any(axis=1)


def mirror_pairs(domain: Domain, window: Window, delta: float,
                 n_scales: int = 10, per_scale: int = 48,
                 zoom_rounds: int = 2) -> list[PairSample]:
    """Adversarial close pairs facing each other across a thin boundary
    piece, produced by reflecting near-boundary points; scales shrink
    geometrically and later rounds zoom onto the regions that produced
    small certified caps."""
    spacing = window.size / 128.0
    g = np.arange(128) + 0.5
    seeds = np.asarray(window.origin) + spacing * np.stack(
        np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    pairs: list[PairSample] = []
    hot: list[np.ndarray] = []

    for rnd in range(zoom_rounds + 1):
        cloud, normals = _boundary_cloud(domain, seeds, spacing)
        if len(cloud) == 0:
            break
        for k in range(n_scales):
            sigma = delta / 8.0 * 2.0 ** (-k)
            u = cloud + sigma * normals
            sd_u = domain.signed_distance(u)
            ok = sd_u > 0.25 * sigma
            if not ok.any():
                continue
            uu = u[ok]
            gu = _gradient(domain, uu, max(1e-6 * sigma, 1e-14))
            vv = uu - 2.0 * domain.signed_distance(uu)[:, None] * gu
            fine = np.isfinite(vv[:, 0])
            sd_v = np.where(fine, domain.signed_distance(np.nan_to_num(vv)), -1.0)
            sep = np.hypot(uu[:, 0] - vv[:, 0], uu[:, 1] - vv[:, 1])
            good = fine & (sd_v > 0.0) & (sep < 0.98 * delta) & (sep > 1e-12)
            if not good.any():
                continue
            uu, vv, sep = uu[good], vv[good], sep[good]
            exits = _segment_exits(domain, uu, vv)
            uu, vv, sep = uu[exits], vv[exits], sep[exits]
            if len(uu) == 0:
                continue
            stride = max(1, len(uu) // per_scale)
            for idx in range(0, len(uu), stride):
                pairs.append(PairSample(uu[idx].copy(), vv[idx].copy(),
                                        float(sep[idx]), "adversarial",
                                        scale_index=k))
                hot.append(0.5 * (uu[idx] + vv[idx]))
        if rnd < zoom_rounds and hot:
            centers = np.asarray(hot)
            order = np.lexsort((centers[:, 1], centers[:, 0]))
            # keep the extremes: the ends of a thin feature are where the
            # certified caps pinch hardest
            reps = centers[order[np.unique(np.linspace(0, len(order) - 1, 48).astype(int))]]
            spacing = spacing / 8.0
            sub = np.linspace(-6.0, 6.0, 13) * spacing
            offs = np.stack(np.meshgrid(sub, sub, indexing="ij"), axis=-1).reshape(-1, 2)
            seeds = (reps[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    return pairs


# ---------------------------------------------------------------------------
# estimators

def _curve_menu(domain: Domain, graph: MetricGraph, p: PairSample):
    """Candidate curves: the straight segment when it stays inside, the raw
    grid geodesic, and its shortened refinement."""
    curves = []
    seg = Polyline(np.array([p.x, p.y]))
    sd = domain.signed_distance(seg.resample(64))
    if (sd > 0).all():
        curves.append(seg)
    for refine in (False, True):
        try:
            _, pl = qh_distance(domain, p.x, p.y, 2.0 ** (-graph.level),
                                graph=graph, refine=refine)
            curves.append(pl)
        except (GeometryError, ValueError):
            pass
    return curves


def evaluate_pair(domain: Domain, graph: MetricGraph, p: PairSample,
                  want_cap: bool = True):
    best = None
    for curve in _curve_menu(domain, graph, p):
        try:
            e = curve_epsilon(domain, p.x, p.y, curve)
            a, b = curve_length_cigar(domain, p.x, p.y, curve)
        except (GeometryError, ValueError):
            continue
        if best is None or e > best[0]:
            best = (e, a, b, curve)
    if best is not None:
        p.eps_curve, p.a, p.b, p.curve = best
        p.k_xy = best[3].qh_value
        if p.k_xy is None:
            try:
                p.k_xy, _ = qh_length(domain, best[3], tol=2e-3)
            except GeometryError:
                p.k_xy = None
    else:
        p.flagged = True
    if want_cap:
        p.eps_cap = epsilon_upper_bound(domain, p.x, p.y)
    try:
        p.j_xy = j_distance(domain, p.x, p.y)
    except ValueError:
        p.j_xy = None
    return p


def _monotone_divergence(seq: list[tuple[int, float]],
                         floor: float = 0.1, factor: float = 4.0) -> bool:
    """True when per-scale minima decrease monotonically (10% slack) to a
    small final value over at least four scales."""
    vals = [v for _, v in sorted(seq)]
    if len(vals) < 4:
        return False
    mono = all(vals[i + 1] <= vals[i] * 1.10 for i in range(len(vals) - 1))
    return mono and vals[-1] <= floor and vals[-1] * factor <= vals[0]


def _evaluate_all(domain: Domain, graph: MetricGraph, pairs: list[PairSample],
                  curve_scales=(0, 1, 2), per_scale_curves: int = 12):
    """Uniform pairs get the full curve menu plus a certified cap;
    adversarial pairs always get caps, and geodesics only at the coarse
    grid-resolvable scales (enough for the envelope offsets)."""
    counts: dict[int, int] = {}
    for p in pairs:
        if p.kind == "uniform":
            evaluate_pair(domain, graph, p, want_cap=True)
            continue
        p.eps_cap = epsilon_upper_bound(domain, p.x, p.y)
        try:
            p.j_xy = j_distance(domain, p.x, p.y)
        except ValueError:
            p.j_xy = None
        k = p.scale_index
        if k in curve_scales and counts.get(k, 0) < per_scale_curves:
            counts[k] = counts.get(k, 0) + 1
            evaluate_pair(domain, graph, p, want_cap=False)
            p.flagged = False   # adversarial pairs never gate the verdict


def estimate_epsilon_delta(domain: Domain, delta: float, n_pairs: int,
                           resolution: float, seed: int,
                           window: Window | None = None,
                           graph: MetricGraph | None = None,
                           n_scales: int = 10, keep_worst: int = 10,
                           pair_margin: float | None = None) -> ClassificationReport:
    """Sampled lower estimate of the best cigar epsilon at reach delta,
    plus certified caps from the adversarial sweep."""
    if n_pairs < 1:
        raise ValueError("need at least one pair")
    window = window or domain.default_window
    if graph is None:
        graph = build_metric_graph(domain, window, resolution)
    rng = np.random.default_rng(seed)

    margin = pair_margin if pair_margin is not None else SQRT2 * window.size * resolution
    pairs = _uniform_pairs(domain, window, delta, n_pairs, rng, margin)
    pairs += mirror_pairs(domain, window, delta, n_scales=n_scales)
    _evaluate_all(domain, graph, pairs)

    found = [p.eps_curve for p in pairs if p.eps_curve is not None]
    eps_hat = min(found) if found else math.nan
    a_hat = max((p.a for p in pairs if p.a is not None), default=math.nan)
    b_hat = max((p.b for p in pairs if p.b is not None), default=math.nan)

    by_scale: dict[int, float] = {}
    for p in pairs:
        if p.kind == "adversarial" and p.eps_cap is not None:
            k = p.scale_index
            by_scale[k] = min(by_scale.get(k, math.inf), p.eps_cap)
    cap_minima = sorted(by_scale.items())
    flagged = sum(1 for p in pairs if p.flagged and p.kind == "uniform")

    if _monotone_divergence(cap_minima):
        verdict = "evidence-against"
    elif flagged == 0 and found:
        verdict = "consistent-with-(eps,delta)"
    else:
        verdict = "inconclusive"

    ranked = sorted((p for p in pairs if not math.isnan(p.eps)),
                    key=lambda p: p.eps)
    return ClassificationReport(
        domain.label, delta, eps_hat, (a_hat, b_hat), (math.nan, math.nan),
        len(pairs), ranked[:keep_worst], verdict,
        cap_scale_minima=cap_minima, flagged_pairs=flagged,
        resolution=resolution, seed=seed, pairs=pairs)


def _subpair_points(domain: Domain, pl: Polyline, max_samples: int = 8):
    """(j, k) observations for sub-pairs along a geodesic, where k is the
    quadrature length of the sub-curve (geodesic sub-curves are geodesics)."""
    pts = pl.points
    vals, _, ok = segment_qh_batch(domain, pts[:-1], pts[1:], rtol=1e-3)
    if not ok.all():
        return []
    prefix = np.concatenate([[0.0], np.cumsum(vals)])
    n = len(pts)
    idx = np.unique(np.linspace(0, n - 1, max_samples).astype(int))
    out = []
    for ai in range(len(idx)):
        for bi in range(ai + 1, len(idx)):
            z, w = pts[idx[ai]], pts[idx[bi]]
            if np.hypot(*(z - w)) < 1e-12:
                continue
            k_val = float(prefix[idx[bi]] - prefix[idx[ai]])
            try:
                out.append((j_distance(domain, z, w), k_val))
            except ValueError:
                continue
    return out


def envelope_fit(points: list[tuple[float, float]]):
    """Smallest-area line k <= c j + d dominating the observations, with c
    scanned over a fixed geometric grid."""
    if not points:
        return math.nan, math.nan
    js = np.array([p[0] for p in points])
    ks = np.array([p[1] for p in points])
    jmax = max(float(js.max()), 1e-9)
    best = None
    for c in C_GRID:
        d = max(0.0, float(np.max(ks - c * js)))
        area = c * jmax ** 2 / 2.0 + d * jmax
        cand = (area, c, d)
        if best is None or cand < best:
            best = cand
    return best[1], best[2]


def uniformity_fit(domain: Domain, delta: float, n_pairs: int,
                   resolution: float, seed: int,
                   window: Window | None = None,
                   graph: MetricGraph | None = None,
                   pairs: list[PairSample] | None = None):
    """Fit (c, d) dominating k <= c j + d over geodesic sub-pairs; also
    reports the per-scale envelope offsets of adversarial pairs, whose
    growth is the divergence signature of a pinched geometry."""
    window = window or domain.default_window
    if graph is None:
        graph = build_metric_graph(domain, window, resolution)
    if pairs is None:
        rng = np.random.default_rng(seed)
        margin = SQRT2 * window.size * resolution
        pairs = _uniform_pairs(domain, window, delta, n_pairs, rng, margin)
        pairs += mirror_pairs(domain, window, delta)
        _evaluate_all(domain, graph, pairs)

    points = []
    for p in pairs:
        if p.kind == "uniform" and p.curve is not None:
            points.extend(_subpair_points(domain, p.curve))
        if p.j_xy is not None and p.k_xy is not None:
            points.append((p.j_xy, p.k_xy))
    c_hat, d_hat = envelope_fit(points)

    offsets: dict[int, float] = {}
    for p in pairs:
        if (p.kind == "adversarial" and p.scale_index is not None
                and p.j_xy is not None and p.k_xy is not None):
            need = p.k_xy - c_hat * p.j_xy
            k = p.scale_index
            offsets[k] = max(offsets.get(k, -math.inf), need)
    fit_offsets = sorted(offsets.items())
    return c_hat, d_hat, {"points": points, "fit_offsets": fit_offsets}


def _offset_growth(fit_offsets: list[tuple[int, float]], min_scales: int = 3,
                   min_growth: float = 2.0) -> bool:
    vals = [v for _, v in sorted(fit_offsets) if math.isfinite(v)]
    if len(vals) < min_scales:
        return False
    mono = all(vals[i + 1] >= vals[i] - 0.2 for i in range(len(vals) - 1))
    return mono and vals[-1] - vals[0] >= min_growth


def _rel_change(u: float, v: float) -> float:
    if not (math.isfinite(u) and math.isfinite(v)):
        return math.inf
    return abs(u - v) / max(abs(u), abs(v), 1e-12)


def classify(domain: Domain, delta: float, budget: int, resolution: float,
             seed: int, window: Window | None = None) -> ClassificationReport:
    """Run the cigar estimators at two resolutions and return a verdict.

    evidence-against requires a monotone divergence sequence (certified
    caps shrinking scale by scale, or adversarial envelope offsets growing);
    consistent-with requires every estimator stable within 20% across the
    two resolutions with no flagged pairs; otherwise inconclusive.
    """
    window = window or domain.default_window
    runs = []
    for res in (resolution, resolution / 2.0):
        graph = build_metric_graph(domain, window, res)
        rep = estimate_epsilon_delta(domain, delta, budget, res, seed,
                                     window=window, graph=graph,
                                     pair_margin=SQRT2 * window.size * resolution)
        c_hat, d_hat, extra = uniformity_fit(domain, delta, budget, res, seed,
                                             window=window, graph=graph,
                                             pairs=rep.pairs)
        rep.cd_hat = (c_hat, d_hat)
        rep.fit_offsets = extra["fit_offsets"]
        rep.details["fit_points"] = len(extra["points"])
        runs.append(rep)

    fine = runs[1]
    divergent = (_monotone_divergence(fine.cap_scale_minima)
                 or _monotone_divergence(runs[0].cap_scale_minima)
                 or _offset_growth(fine.fit_offsets))
    jmed = np.median([p.j_xy for p in fine.pairs
                      if p.j_xy is not None]) if fine.pairs else 1.0
    stable = (
        _rel_change(runs[0].epsilon_hat, runs[1].epsilon_hat) <= 0.20
        and _rel_change(runs[0].ab_hat[0], runs[1].ab_hat[0]) <= 0.20
        and _rel_change(runs[0].ab_hat[1], runs[1].ab_hat[1]) <= 0.20
        and _rel_change(runs[0].cd_hat[0] * jmed + runs[0].cd_hat[1],
                        runs[1].cd_hat[0] * jmed + runs[1].cd_hat[1]) <= 0.20
    )
    flagged = runs[0].flagged_pairs + runs[1].flagged_pairs

    if divergent:
        verdict = "evidence-against"
    elif stable and flagged == 0:
        verdict = "consistent-with-(eps,delta)"
    else:
        verdict = "inconclusive"

    out = fine
    out.verdict = verdict
    out.details["coarse_run"] = {
        "epsilon_hat": runs[0].epsilon_hat, "ab_hat": runs[0].ab_hat,
        "cd_hat": runs[0].cd_hat, "resolution": runs[0].resolution,
    }
    out.details["stable"] = stable
    out.details["divergent"] = divergent
    return out
