import heapq
import math

import numpy as np
import pytest

from bmoext import Window, cusp, disk, half_plane, slit_disk
from bmoext.dyadic import DyadicCube, SQRT_N, box_gap
from bmoext.errors import WhitneyInvariantError
from bmoext.whitney import (ACCEPT_FACTOR, TAG_COMPLEMENT, TAG_DOMAIN,
                            build_whitney, find_big_cube_near,
                            find_interior_point, matching_cube,
                            matching_distance_constant, matching_size_bound,
                            whitney_chain)
from tests.conftest import DISK_WINDOW


# -- exhaustive level-sweep oracle -------------------------------------------

def exhaustive_whitney(domain, window, max_depth):
    """Independent reconstruction: test every dyadic cell of every level,
    accept when the clearance threshold holds and no ancestor was accepted."""
    accepted = {}
    blocked = set()     # cells inside an accepted ancestor
    frontier = []
    for level in range(max_depth + 1):
        n = 1 << level
        side = window.cell_size(level)
        for i in range(n):
            for j in range(n):
                if (level, i, j) in blocked:
                    blocked.update({(level + 1, 2 * i + a, 2 * j + b)
                                    for a in (0, 1) for b in (0, 1)} if level < max_depth else [])
                    continue
                c = (window.origin[0] + (i + 0.5) * side,
                     window.origin[1] + (j + 0.5) * side)
                sd = domain.sd(c)
                if sd >= ACCEPT_FACTOR * side:
                    accepted[(level, i, j)] = TAG_DOMAIN
                    mark = True
                elif -sd >= ACCEPT_FACTOR * side:
                    accepted[(level, i, j)] = TAG_COMPLEMENT
                    mark = True
                else:
                    mark = False
                    if level == max_depth:
                        frontier.append((level, i, j))
                if mark and level < max_depth:
                    blocked.update({(level + 1, 2 * i + a, 2 * j + b)
                                    for a in (0, 1) for b in (0, 1)})
    return accepted, frontier


@pytest.mark.parametrize("dom,window,depth", [
    (disk(1.0), DISK_WINDOW, 7),
    (disk(4.0), Window((-0.5, -0.5), 1.0), 4),   # constant-sign window
])
def test_build_matches_exhaustive_oracle(dom, window, depth):
    dec = build_whitney(dom, window, depth)
    oracle, oracle_frontier = exhaustive_whitney(dom, window, depth)
    built = {info.key(): info.tag for info in dec.cubes}
    assert built == oracle
    assert sorted(dec.frontier) == sorted(oracle_frontier)


def test_halfplane_wc2_exact():
    hp = half_plane()
    dec = build_whitney(hp, Window((0.0, 0.0), 1.0), 6)
    for info in dec.cubes:
        side = dec.window.cell_size(info.level)
        # distance to the line y = 0 is exact for axis-parallel boxes
        j_lo = info.coords[1] * side
        assert 1.0 <= j_lo / side <= 4.0 * SQRT_N + 1e-12


def test_invariants_fail_loudly_for_lying_oracle():
    bad = disk(1.0)
    lying = type(bad)(lambda p: 3.0 * bad.sd_func(p), bad.bounding_box,
                      "lying", default_window=bad.default_window)
    with pytest.raises(WhitneyInvariantError):
        build_whitney(lying, DISK_WINDOW, 5)


def test_neighbors_interior_cube(disk_dec):
    # a uniform-level region away from the boundary has the 8 grid neighbors
    hits = 0
    for idx, info in enumerate(disk_dec.cubes):
        nbs = disk_dec.adjacency[idx]
        if len(nbs) == 8 and all(disk_dec.cubes[k].level == info.level for k in nbs):
            hits += 1
    assert hits > 0


def test_neighbor_sidelength_ratio(disk_dec):
    for idx, info in enumerate(disk_dec.cubes):
        for k in disk_dec.adjacency[idx]:
            assert abs(disk_dec.cubes[k].level - info.level) <= 2


def test_neighbor_count_bounded(disk_dec):
    worst = max(len(nbs) for nbs in disk_dec.adjacency)
    assert worst <= 24  # measured envelope for the planar dimension constant


def test_neighbors_match_brute_force(disk_dec, rng):
    idxs = rng.choice(len(disk_dec.cubes), size=30, replace=False)
    cubes = [disk_dec.cube(k) for k in range(len(disk_dec.cubes))]
    for idx in idxs:
        info = disk_dec.cubes[idx]
        q = cubes[idx]
        brute = sorted(k for k, other in enumerate(cubes)
                       if k != idx and disk_dec.cubes[k].tag == info.tag
                       and box_gap(q, other) == 0.0)
        assert brute == disk_dec.adjacency[idx]


def test_matching_constant_value():
    assert matching_distance_constant(0.5) == pytest.approx(
        5.0 * math.sqrt(2.0) + 64.0, rel=1e-12)
    assert matching_distance_constant(0.5) == pytest.approx(71.0711, abs=5e-5)


def test_matching_halfplane_mirror():
    hp = half_plane()
    w = Window((-2.0, -2.0), 4.0)
    dec = build_whitney(hp, w, 8)
    eps, delta = 0.5, 1.0
    bound = matching_size_bound(eps, delta)
    c = matching_distance_constant(eps)
    checked = 0
    for idx in dec.indices(TAG_COMPLEMENT):
        info = dec.cubes[idx]
        side = w.cell_size(info.level)
        if side > bound:
            continue
        q = dec.cube(idx)
        q_star = matching_cube(dec, q, eps, delta)
        assert 1.0 <= q_star.side / side <= 4.0
        d = box_gap(q_star, q)
        assert d <= c * side + 1e-12 * w.size
        # the mirrored cube across y = 0 is itself a valid candidate
        n = 1 << info.level
        mirror = DyadicCube(info.level, (info.coords[0], n - 1 - info.coords[1]), w)
        assert dec.fate.get((mirror.level, mirror.coords[0], mirror.coords[1]),
                            (None, None))[0] == TAG_DOMAIN
        assert d <= box_gap(mirror, q) + 1e-12 * w.size
        checked += 1
    assert checked > 50


def test_matching_disk_exhaustive_scan(disk_dec):
    eps, delta = 0.7, 0.5
    bound = matching_size_bound(eps, delta)
    c = matching_distance_constant(eps)
    e_idx = disk_dec.indices(TAG_DOMAIN)
    qual = [k for k in disk_dec.indices(TAG_COMPLEMENT)
            if disk_dec.window.cell_size(disk_dec.cubes[k].level) <= bound]
    assert qual, "depth too shallow for the matching regime"
    for k in qual[::3]:
        q = disk_dec.cube(k)
        got = matching_cube(disk_dec, q, eps, delta)
        cands = []
        for e in e_idx:
            qe = disk_dec.cube(e)
            ratio = qe.side / q.side
            if 1.0 <= ratio <= 4.0:
                d = box_gap(qe, q)
                if d <= c * q.side + 1e-12 * disk_dec.window.size:
                    cands.append((d, qe.level, qe.coords[0], qe.coords[1]))
        assert cands, "oracle found no candidate but matching_cube succeeded"
        best = min(cands)
        assert (got.level, got.coords[0], got.coords[1]) == best[1:]


def test_find_interior_point_center(disk_dec):
    q = DyadicCube(4, (8, 8), DISK_WINDOW)  # central cube, deep inside
    dom = disk_dec.domain
    z = find_interior_point(dom, q, 0.5)
    assert z is not None and np.allclose(z, q.center)


def test_find_interior_point_straddling_cube(disk1):
    # cube straddling the circle; dense-grid oracle confirms the threshold
    q = DyadicCube(4, (14, 8), DISK_WINDOW)
    assert disk1.signed_distance(q.corners).min() < 0 < disk1.sd(q.lower)
    z = find_interior_point(disk1, q, 0.5)
    target = 0.5 * q.side / 32.0
    g = np.linspace(0, q.side, 100)
    dense = q.lower + np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    assert disk1.signed_distance(dense).max() >= target  # oracle: a point exists
    assert z is not None and disk1.sd(z) >= target


def test_find_interior_point_cusp_tip_fails():
    dom = cusp(4.0)
    w = dom.default_window
    # tiny cube hugging the cusp tip: every point has clearance below the bar
    q = DyadicCube(9, w.cell_of_point((0.004, 0.0), 9), w)
    target = 0.5 * q.side / 32.0
    g = np.linspace(0, q.side, 120)
    dense = q.lower + np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    assert dom.signed_distance(dense).max() < target  # oracle: nothing to find
    assert find_interior_point(dom, q, 0.5) is None


def test_find_big_cube_near_center(disk_dec):
    s = find_big_cube_near(disk_dec, (0.0, 0.0), 0.5, 0.5)
    assert s is not None
    assert s.side >= 0.5 * 0.5 / 640.0


def test_find_big_cube_near_halfplane_oracle():
    hp = half_plane()
    w = Window((-2.0, -2.0), 4.0)
    dec = build_whitney(hp, w, 9)
    eps, delta = 0.5, 0.5
    x = (0.0, 1e-3)
    s = find_big_cube_near(dec, x, eps, delta)
    assert s is not None and s.side >= eps * delta / 640.0
    # exhaustive scan oracle
    best = None
    for k in dec.indices(TAG_DOMAIN):
        q = dec.cube(k)
        if q.side < eps * delta / 640.0:
            continue
        d = math.hypot(max(0.0, q.lower[0] - x[0], x[0] - q.lower[0] - q.side),
                       max(0.0, q.lower[1] - x[1], x[1] - q.lower[1] - q.side))
        if d < delta * (1 / eps + math.sqrt(2)):
            cand = (d, q.level, q.coords[0], q.coords[1])
            best = cand if best is None or cand < best else best
    assert best is not None
    assert (s.level, s.coords[0], s.coords[1]) == best[1:]


def test_find_big_cube_near_cusp_fails():
    dom = cusp(4.0)
    dec = build_whitney(dom, dom.default_window, 10)
    assert find_big_cube_near(dec, (0.005, 0.0), 0.5, 0.02) is None


def test_whitney_chain_basics(disk_dec):
    idx = next(k for k in disk_dec.indices(TAG_DOMAIN)
               if disk_dec.cubes[k].level == 4)
    q = disk_dec.cube(idx)
    c = q.center
    assert len(whitney_chain(disk_dec, c, c + 1e-4)) == 1
    nb = disk_dec.neighbors(q)[0]
    chain = whitney_chain(disk_dec, c, nb.center)
    assert len(chain) == 2


def test_whitney_chain_vs_dijkstra(disk_dec):
    chain = whitney_chain(disk_dec, (-0.5, 0.0), (0.5, 0.0))
    # unit-weight Dijkstra oracle over the same adjacency
    src = disk_dec.index_of(chain[0])
    dst = disk_dec.index_of(chain[-1])
    dist = {src: 0}
    heap = [(0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if u == dst:
            break
        if d > dist.get(u, 1 << 30):
            continue
        for v in disk_dec.adjacency[u]:
            if disk_dec.cubes[v].tag != TAG_DOMAIN:
                continue
            if d + 1 < dist.get(v, 1 << 30):
                dist[v] = d + 1
                heapq.heappush(heap, (d + 1, v))
    assert len(chain) == dist[dst] + 1


def test_containment_relation_with_accepted_family(disk_dec):
    # every moderately fine window cell is comparable to a decomposition cube
    eps = 0.3
    bound = eps / (160.0 * SQRT_N)
    level = 6
    n = 1 << level
    for i in range(n):
        for j in range(n):
            cell = DyadicCube(level, (i, j), DISK_WINDOW)
            kind, _ = disk_dec.fate.get((level, i, j), (None, None))
            if kind in (TAG_DOMAIN, TAG_COMPLEMENT):
                continue  # the cell itself is a cube
            if kind is None:
                # inside an accepted ancestor, which is then the big partner
                lvl, a, b = level, i, j
                while lvl > 0 and (lvl, a, b) not in disk_dec.fate:
                    lvl, a, b = lvl - 1, a // 2, b // 2
                k2, _ = disk_dec.fate.get((lvl, a, b), (None, None))
                assert k2 in (TAG_DOMAIN, TAG_COMPLEMENT)
                continue
            # split cell: a descendant cube (or undecided frontier cell,
            # witnessing the truncation) of comparable size must exist
            found = []

            def collect(key):
                k2, idx = disk_dec.fate.get(key, (None, None))
                if k2 in (TAG_DOMAIN, TAG_COMPLEMENT, "frontier"):
                    found.append(key[0])
                elif k2 == "split":
                    l2, a2, b2 = key
                    for da in (0, 1):
                        for db in (0, 1):
                            collect((l2 + 1, 2 * a2 + da, 2 * b2 + db))

            collect((level, i, j))
            assert found
            best_side = DISK_WINDOW.cell_size(min(found))
            assert best_side >= bound * cell.side - 1e-15


def test_find_big_cube_near_slit_tip_truncation():
    # tiny reach near the slit tip: all cubes of admissible size live beyond
    # it once the build is truncated at max_depth
    dom = slit_disk(1.0, 0.5)
    dec = build_whitney(dom, Window((-1.25, -1.25), 2.5), 10)
    assert find_big_cube_near(dec, (0.5005, 1e-4), 0.5, 0.001) is None
