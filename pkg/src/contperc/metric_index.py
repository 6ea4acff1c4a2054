"""Vantage-point tree over an exact metric.

The tree only ever calls :func:`geometry.distance`, so it works unchanged in
hyperbolic spaces where coordinate grids are badly area-distorting.  Queries
are processed in batches: every internal node evaluates the distance from its
vantage point to all queries that reach it in one vectorised call.
"""

from __future__ import annotations

import numpy as np

from .geometry import Space, as_points, distance, pairwise_distances

# pruning bounds are widened by this much; hyperboloid rounding far from the
# origin can break the triangle inequality by ~1e-7 at radius 10
_SLACK = 1e-6


class MetricIndex:
    """Build-once, read-many radius-query index.

    Parameters
    ----------
    space : Space
    points : (n, d) array
    leaf_size : int
        Buckets at or below this size are scanned directly.
    """

    def __init__(self, space: Space, points, leaf_size: int = 32):
        self.space = space
        self.points = np.ascontiguousarray(as_points(space, np.asarray(points, dtype=float).reshape(-1, space.coord_dim)))
        self.leaf_size = max(1, int(leaf_size))
        # per node: vantage id (-1 for leaves), median radius, children, leaf slice
        self._vantage = []
        self._mu = []
        self._inner = []
        self._outer = []
        self._lo = []
        self._hi = []
        self._leaf_ids = []
        self._build()
        self._leaf_ids = np.asarray(self._leaf_ids, dtype=np.int64)

    def __len__(self):
        return len(self.points)

    def _new_node(self):
        for lst in (self._vantage, self._inner, self._outer, self._lo, self._hi):
            lst.append(-1)
        self._mu.append(0.0)
        return len(self._vantage) - 1

    def _build(self):
        if len(self.points) == 0:
            return
        root = self._new_node()
        stack = [(root, np.arange(len(self.points)))]
        while stack:
            node, ids = stack.pop()
            if len(ids) <= self.leaf_size:
                self._lo[node] = len(self._leaf_ids)
                self._leaf_ids.extend(ids.tolist())
                self._hi[node] = len(self._leaf_ids)
                continue
            v = ids[0]
            rest = ids[1:]
            d = np.asarray(distance(self.space, self.points[v], self.points[rest]))
            mu = float(np.median(d))
            self._vantage[node] = int(v)
            self._mu[node] = mu
            inside = d <= mu
            for mask, slot in ((inside, self._inner), (~inside, self._outer)):
                if mask.any():
                    child = self._new_node()
                    slot[node] = child
                    stack.append((child, rest[mask]))

    def query_many(self, centers, r: float):
        """All ``(query_index, point_id)`` pairs with ``distance <= r``.

        Returns two int arrays sorted by query index, then point id.
        """
        centers = np.asarray(centers, dtype=float).reshape(-1, self.space.coord_dim)
        out_q, out_p = [], []
        if len(self.points) and len(centers):
            stack = [(0, np.arange(len(centers)))]
            while stack:
                node, qidx = stack.pop()
                v = self._vantage[node]
                if v < 0:
                    leaf = self._leaf_ids[self._lo[node]:self._hi[node]]
                    hit = pairwise_distances(self.space, centers[qidx], self.points[leaf]) <= r
                    qi, pj = np.nonzero(hit)
                    out_q.append(qidx[qi])
                    out_p.append(leaf[pj])
                    continue
                d = np.asarray(distance(self.space, centers[qidx], self.points[v]))
                hit = d <= r
                if hit.any():
                    out_q.append(qidx[hit])
                    out_p.append(np.full(int(hit.sum()), v, dtype=np.int64))
                mu = self._mu[node]
                if self._inner[node] >= 0:
                    go = d <= mu + r + _SLACK
                    if go.any():
                        stack.append((self._inner[node], qidx[go]))
                if self._outer[node] >= 0:
                    go = d + r + _SLACK >= mu
                    if go.any():
                        stack.append((self._outer[node], qidx[go]))
        if not out_q:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
        q = np.concatenate(out_q).astype(np.int64)
        p = np.concatenate(out_p).astype(np.int64)
        order = np.lexsort((p, q))
        return q[order], p[order]

    def query(self, center, r: float) -> np.ndarray:
        """Sorted ids of indexed points within distance ``r`` of ``center``."""
        _, ids = self.query_many(np.asarray(center, dtype=float)[None, :], r)
        return ids

    def pairs(self, r: float):
        """Index pairs ``(i, j)``, ``i < j``, with ``distance(p_i, p_j) <= r``."""
        q, p = self.query_many(self.points, r)
        keep = q < p
        return q[keep], p[keep]


def metric_index_build(space: Space, points, leaf_size: int = 32) -> MetricIndex:
    return MetricIndex(space, points, leaf_size)


def metric_index_query(index: MetricIndex, center, r: float) -> np.ndarray:
    return index.query(center, r)
