"""Open-path TSP ordering.

Nearest-neighbour construction, then local search alternating 2-opt
reversals and Or-opt moves (relocating a run of up to three stops, possibly
reversed) until neither finds an improvement. The start node never moves and
the path end is free. The search is repeated from nearest-neighbour tours
forced through each of the closest first stops and the shortest result kept.
Instances of up to ``EXACT_MAX`` stops are solved exactly by Held-Karp
dynamic programming instead.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

_EPS = 1e-12
EXACT_MAX = 10


def path_length(points, start=None):
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if start is not None:
        pts = np.vstack([np.asarray(start, dtype=float).reshape(1, 2), pts])
    if len(pts) < 2:
        return 0.0
    return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))


def nearest_neighbor_order(points, start, first=None):
    """Greedy nearest-neighbour order from ``start``; ``first`` forces the
    first stop."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    d = cdist(np.vstack([np.asarray(start, dtype=float).reshape(1, 2), pts]), pts)
    remaining = list(range(len(pts)))
    order = []
    row = 0
    if first is not None:
        order.append(first)
        remaining.remove(first)
        row = first + 1
    while remaining:
        nxt = min(remaining, key=lambda k: (d[row, k], k))
        order.append(nxt)
        remaining.remove(nxt)
        row = nxt + 1
    return order


def _two_opt_pass(path, d):
    m = len(path)
    improved = False
    for i in range(1, m - 1):
        for j in range(i + 1, m):
            a, b, c = path[i - 1], path[i], path[j]
            before = d[a, b]
            after = d[a, c]
            if j + 1 < m:
                e = path[j + 1]
                before += d[c, e]
                after += d[b, e]
            if after < before - _EPS:
                path[i : j + 1] = path[i : j + 1][::-1]
                improved = True
    return improved


def _or_opt_pass(path, d):
    m = len(path)
    for seg in (1, 2, 3):
        for i in range(1, m - seg + 1):
            j = i + seg  # segment is path[i:j]
            prev, first, last = path[i - 1], path[i], path[j - 1]
            nxt = path[j] if j < m else None
            removed = d[prev, first] + (d[last, nxt] - d[prev, nxt] if nxt is not None else 0.0)
            rest = path[:i] + path[j:]
            segment = path[i:j]
            for k in range(len(rest)):
                if k == i - 1:
                    continue
                u = rest[k]
                v = rest[k + 1] if k + 1 < len(rest) else None
                base = d[u, v] if v is not None else 0.0
                for piece in (segment, segment[::-1]):
                    added = d[u, piece[0]] + (d[piece[-1], v] if v is not None else 0.0) - base
                    if added < removed - _EPS:
                        path[:] = rest[: k + 1] + piece + rest[k + 1 :]
                        return True
    return False


def two_opt(order, points, start):
    """Improve ``order`` with 2-opt and Or-opt moves until locally optimal."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    nodes = np.vstack([np.asarray(start, dtype=float).reshape(1, 2), pts])
    d = cdist(nodes, nodes)
    path = [0] + [k + 1 for k in order]
    while _two_opt_pass(path, d) or _or_opt_pass(path, d):
        pass
    return [k - 1 for k in path[1:]]


def held_karp(points, start):
    """Exact shortest open path from ``start``; exponential in ``len(points)``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        return []
    d = cdist(pts, pts)
    d0 = np.hypot(*(pts - np.asarray(start, dtype=float)).T)
    full = 1 << n
    # cost[mask, j]: shortest path from start covering mask and ending at j
    cost = np.full((full, n), np.inf)
    parent = np.full((full, n), -1, dtype=int)
    for j in range(n):
        cost[1 << j, j] = d0[j]
    bits = 1 << np.arange(n)
    for mask in range(1, full):
        row = cost[mask]
        if not np.isfinite(row).any():
            continue
        outside = (mask & bits) == 0
        if not outside.any():
            continue
        # best predecessor for extending to each k outside mask
        cand = row[:, None] + d
        prev = np.argmin(cand, axis=0)
        val = cand[prev, np.arange(n)]
        for k in np.flatnonzero(outside):
            nm = mask | (1 << k)
            if val[k] < cost[nm, k] - _EPS:
                cost[nm, k] = val[k]
                parent[nm, k] = prev[k]
    mask = full - 1
    j = int(np.argmin(cost[mask]))
    order = []
    while j >= 0:
        order.append(j)
        j, mask = int(parent[mask, j]), mask & ~(1 << j)
    return order[::-1]


def plan_tsp_route(points, start, max_restarts=10):
    """Indices of ``points`` in visiting order for an open path from ``start``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return []
    if len(pts) <= EXACT_MAX:
        return held_karp(pts, start)
    best = two_opt(nearest_neighbor_order(pts, start), pts, start)
    best_len = path_length(pts[best], start)
    # restart from the nearest few alternative first stops
    first_stops = np.argsort(np.hypot(*(pts - np.asarray(start, dtype=float)).T), kind="stable")
    for f in first_stops[:max_restarts]:
        order = two_opt(nearest_neighbor_order(pts, start, int(f)), pts, start)
        length = path_length(pts[order], start)
        if length < best_len - _EPS:
            best, best_len = order, length
    return best
