"""Independent reference implementations used as test oracles.

Distances here use the textbook formulas (acosh of the Minkowski product,
evaluated in mpmath) rather than the library's asinh form, and all graph
questions are answered by exhaustive search.
"""

from __future__ import annotations

import itertools
from collections import deque

import mpmath
import numpy as np
from scipy import integrate

mpmath.mp.dps = 40


def h2_volume_quad(r: float) -> float:
    """Area of a hyperbolic disk: integrate the circumference 2*pi*sinh(t)."""
    val, _ = integrate.quad(lambda t: 2 * np.pi * np.sinh(t), 0.0, r, epsabs=0, epsrel=1e-13)
    return val


def dist_oracle(kind: str, p, q) -> float:
    p = [mpmath.mpf(float(x)) for x in p]
    q = [mpmath.mpf(float(x)) for x in q]
    if kind == "euclidean":
        return float(mpmath.sqrt(sum((a - b) ** 2 for a, b in zip(p, q))))
    # re-project onto the hyperboloid in high precision before using acosh
    def lift(v):
        return [v[0], v[1], mpmath.sqrt(1 + v[0] ** 2 + v[1] ** 2)]
    a, b = lift(p[:3]), lift(q[:3])
    mink = a[2] * b[2] - a[0] * b[0] - a[1] * b[1]
    dh = mpmath.acosh(max(mink, mpmath.mpf(1)))
    if kind == "h2":
        return float(dh)
    return float(mpmath.sqrt(dh ** 2 + (p[3] - q[3]) ** 2))


def dist_matrix(kind: str, pts) -> np.ndarray:
    n = len(pts)
    d = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        d[i, j] = d[j, i] = dist_oracle(kind, pts[i], pts[j])
    return d


def adjacency(kind: str, pts, ball_radius: float) -> np.ndarray:
    d = dist_matrix(kind, pts)
    adj = d <= 2 * ball_radius
    np.fill_diagonal(adj, False)
    return adj


def reachability(adj: np.ndarray) -> np.ndarray:
    """Transitive closure by Floyd-Warshall over booleans."""
    n = len(adj)
    r = adj.copy() | np.eye(n, dtype=bool)
    for k in range(n):
        r |= r[:, k:k + 1] & r[k:k + 1, :]
    return r


def partition_from_reachability(reach: np.ndarray) -> set:
    return {frozenset(np.flatnonzero(row).tolist()) for row in reach}


def bfs_path_length(adj: np.ndarray, sources, targets) -> int | None:
    """Fewest vertices on a path from any source to any target, or None."""
    targets = set(targets)
    seen = set(sources)
    queue = deque((s, 1) for s in sources)
    while queue:
        v, k = queue.popleft()
        if v in targets:
            return k
        for w in np.flatnonzero(adj[v]):
            if w not in seen:
                seen.add(w)
                queue.append((w, k + 1))
    return None


def boundary_pairs(kind: str, pts, ball_radius: float, members_a, members_b) -> set:
    """All (x1, x2) with d < 4r directly, or via a chain of balls outside both clusters."""
    d = dist_matrix(kind, pts)
    adj = d <= 2 * ball_radius
    np.fill_diagonal(adj, False)
    thr = 4 * ball_radius
    outside = [i for i in range(len(pts)) if i not in set(members_a) | set(members_b)]
    out_adj = np.zeros_like(adj)
    for i in outside:
        for j in outside:
            out_adj[i, j] = adj[i, j]
    pairs = set()
    for x1 in members_a:
        starts = [y for y in outside if d[x1, y] < thr]
        for x2 in members_b:
            if d[x1, x2] < thr:
                pairs.add((x1, x2))
                continue
            ends = [y for y in outside if d[x2, y] < thr]
            if starts and ends and bfs_path_length(out_adj, starts, ends) is not None:
                pairs.add((x1, x2))
    return pairs


def a3_scan(kind: str, locations, marks, z, r: float, n: int, lam: float, lam_star: float) -> bool:
    for loc, m in zip(locations, marks):
        if lam < m <= lam_star and dist_oracle(kind, z, loc) <= r + 2 * n:
            return False
    return True
