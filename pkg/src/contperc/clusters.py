"""Ball-intersection graphs, cluster labelling and cluster exploration.

Two balls of radius ``ball_radius`` intersect iff their centres are at
distance ``<= 2 * ball_radius`` (closed balls, tangency counts).  A cluster is
a connected component of that graph.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache
from typing import Optional, Union

import numpy as np
from scipy import sparse

from . import geometry as geo
from .errors import InternalInvariantError, InvalidArgumentError, UnsupportedOperationError
from .geometry import Ball, Cylinder, Space, SpaceKind, Window
from .io import write_csv
from .kernels import bfs_hops, component_labels
from .metric_index import MetricIndex
from .pointprocess import ActiveSet, MarkedConfiguration, restrict


def pair_edges(space: Space, locations: np.ndarray, r: float) -> np.ndarray:
    """``(m, 2)`` local index pairs ``i < j`` within distance ``r``, lexsorted."""
    if len(locations) < 2:
        return np.empty((0, 2), dtype=np.int64)
    i, j = MetricIndex(space, locations).pairs(r)
    edges = np.column_stack([i, j])
    return edges[np.lexsort((edges[:, 1], edges[:, 0]))]


def csr_from_edges(n: int, edges: np.ndarray):
    """Symmetric CSR adjacency ``(indptr, indices)`` with sorted neighbour lists."""
    src = np.concatenate([edges[:, 0], edges[:, 1]]).astype(np.int64)
    dst = np.concatenate([edges[:, 1], edges[:, 0]]).astype(np.int64)
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst[order]


@dataclass(frozen=True, eq=False)
class IntersectionGraph:
    """Adjacency of the balls active at one intensity.

    Vertices are configuration point ids; ``edges`` holds each intersecting
    pair once as ``(i, j)`` with ``i < j``.
    """

    space: Space
    active: ActiveSet
    edges: np.ndarray

    @property
    def config(self) -> MarkedConfiguration:
        return self.active.config

    @cached_property
    def csr(self):
        return csr_from_edges(len(self.config), self.edges)

    def neighbors(self, i: int) -> np.ndarray:
        indptr, indices = self.csr
        return indices[indptr[i]:indptr[i + 1]]


def build_intersection_graph(space: Space, active: ActiveSet) -> IntersectionGraph:
    local = pair_edges(space, active.locations, 2.0 * space.ball_radius)
    return IntersectionGraph(space, active, active.active_ids[local].reshape(-1, 2))


def subgraph(graph: IntersectionGraph, lam: float) -> IntersectionGraph:
    """The graph at a lower intensity on the same configuration.

    Because the lower-intensity ball set is a subset, its edges are exactly the
    edges whose endpoints both have ``mark <= lam``.
    """
    if lam > graph.active.lam:
        raise InvalidArgumentError(f"subgraph needs lam <= {graph.active.lam}, got {lam}")
    active = restrict(graph.config, lam)
    marks = graph.config.marks
    keep = (marks[graph.edges[:, 0]] <= lam) & (marks[graph.edges[:, 1]] <= lam)
    return IntersectionGraph(graph.space, active, graph.edges[keep])


@dataclass(frozen=True)
class ClusterSummary:
    label: int
    size: int
    members: np.ndarray
    extent: float  # largest member-centre distance from the window centre


@dataclass(eq=False)
class ClusterLabeling:
    """``labels[i]`` is the smallest point id in ``i``'s cluster, or -1 if ``i`` is inactive."""

    graph: IntersectionGraph
    labels: np.ndarray

    @property
    def space(self) -> Space:
        return self.graph.space

    @property
    def active(self) -> ActiveSet:
        return self.graph.active

    @cached_property
    def cluster_ids(self) -> np.ndarray:
        return np.unique(self.labels[self.active.active_ids])

    @property
    def n_clusters(self) -> int:
        return len(self.cluster_ids)

    @cached_property
    def _grouped(self):
        ids = self.active.active_ids
        lab = self.labels[ids]
        order = np.argsort(lab, kind="stable")
        bounds = np.searchsorted(lab[order], self.cluster_ids)
        return ids[order], np.append(bounds, len(ids))

    def members(self, label: int) -> np.ndarray:
        ids, bounds = self._grouped
        k = int(np.searchsorted(self.cluster_ids, label))
        if k >= len(self.cluster_ids) or self.cluster_ids[k] != label:
            raise InvalidArgumentError(f"no cluster with label {label}")
        return ids[bounds[k]:bounds[k + 1]]

    @cached_property
    def clusters(self) -> dict:
        config = self.active.config
        center = geo.window_center(self.space, config.window)
        ids, bounds = self._grouped
        r = np.asarray(geo.distance(self.space, center, config.locations[ids])) if len(ids) else np.empty(0)
        out = {}
        for k, label in enumerate(self.cluster_ids):
            lo, hi = bounds[k], bounds[k + 1]
            out[int(label)] = ClusterSummary(int(label), int(hi - lo), ids[lo:hi], float(r[lo:hi].max()))
        return out


def label_clusters(graph: IntersectionGraph) -> ClusterLabeling:
    n = len(graph.config)
    labels = component_labels(n, graph.edges[:, 0].copy(), graph.edges[:, 1].copy()) if n else np.empty(0, np.int64)
    inactive = np.ones(n, dtype=bool)
    inactive[graph.active.active_ids] = False
    labels[inactive] = -1
    return ClusterLabeling(graph, labels)


def cluster_configuration(space: Space, config: MarkedConfiguration, lam: float) -> ClusterLabeling:
    return label_clusters(build_intersection_graph(space, restrict(config, lam)))


def dump_labels(labeling: ClusterLabeling, path):
    ids = labeling.active.active_ids
    return write_csv(path, ["point_id", "cluster_id"], zip(ids.tolist(), labeling.labels[ids].tolist()))


# -- regions -------------------------------------------------------------------


def touches(space: Space, region: Window, locations) -> np.ndarray:
    """Mask of balls (given by centres) that intersect the closed ``region``."""
    locations = np.asarray(locations, dtype=float).reshape(-1, space.coord_dim)
    return geo.distance_to_window(space, region, locations) <= space.ball_radius


def spanning_masks(space: Space, window: Window, locations, r_inner: float, r_outer: float):
    """Inner/outer contact masks for the finite-window stand-in of "unbounded".

    Ball windows: a ball is *inner* if it meets ``S(c, r_inner)`` and *outer* if
    it reaches distance ``r_outer`` from the window centre ``c``.

    Cylinder windows: ``r_inner`` is an H2 radius and ``r_outer`` a height;
    *inner* balls meet the slab ``{d_H2 <= r_inner, height <= -r_outer}`` and
    *outer* balls meet ``{d_H2 <= r_inner, height >= r_outer}``, so a spanning
    cluster runs between the two height extremes.
    """
    if not r_inner < r_outer and isinstance(window, Ball):
        raise InvalidArgumentError(f"need r_inner < r_outer, got {r_inner}, {r_outer}")
    locations = np.asarray(locations, dtype=float).reshape(-1, space.coord_dim)
    br = space.ball_radius
    if isinstance(window, Cylinder):
        dh = np.asarray(geo.distance(Space.hyperbolic2(), space.origin()[:3], locations[:, :3]))
        gh = np.maximum(dh - r_inner, 0.0)
        z = locations[:, 3]
        g_low = np.maximum(z + r_outer, 0.0)
        g_high = np.maximum(r_outer - z, 0.0)
        return np.hypot(gh, g_low) <= br, np.hypot(gh, g_high) <= br
    r = np.asarray(geo.distance(space, geo.window_center(space, window), locations))
    return r <= r_inner + br, r + br >= r_outer


def spanning_labels(labeling: ClusterLabeling, r_inner: float, r_outer: float) -> np.ndarray:
    """Sorted labels of clusters that meet both the inner and the outer region."""
    ids = labeling.active.active_ids
    inner, outer = spanning_masks(
        labeling.space, labeling.active.config.window, labeling.active.config.locations[ids], r_inner, r_outer
    )
    lab = labeling.labels[ids]
    return np.intersect1d(lab[inner], lab[outer])


def connects(space: Space, active: ActiveSet, region_a: Window, region_b: Window,
             labeling: Optional[ClusterLabeling] = None) -> bool:
    """Whether some cluster has a ball meeting ``region_a`` and a ball meeting ``region_b``."""
    if len(active) == 0:
        return False
    if labeling is None:
        labeling = label_clusters(build_intersection_graph(space, active))
    locs = active.locations
    lab = labeling.labels[active.active_ids]
    return bool(np.intersect1d(lab[touches(space, region_a, locs)], lab[touches(space, region_b, locs)]).size)


# -- coverage ------------------------------------------------------------------


@lru_cache(maxsize=64)
def _screen_probes(space: Space, R: float) -> np.ndarray:
    net = geo.covering_net(space, space.origin(), R, R / 8)
    net = net[np.asarray(geo.distance(space, space.origin(), net)) <= R]
    net.setflags(write=False)
    return net


def coverage_screen(space: Space, member_locations, centers, R: float) -> np.ndarray:
    """Cheap necessary condition for coverage of ``S(y, R)``, one flag per centre ``y``.

    Coarse probes inside each ball must be within ``ball_radius`` of a member;
    a False flag proves the ball is not covered.
    """
    members = np.asarray(member_locations, dtype=float).reshape(-1, space.coord_dim)
    centers = np.asarray(centers, dtype=float).reshape(-1, space.coord_dim)
    if len(members) == 0:
        return np.zeros(len(centers), dtype=bool)
    probes = _screen_probes(space, float(R))
    pts = np.concatenate([geo.move_from_origin(space, c, probes) for c in centers])
    ok = geo.pairwise_distances(space, pts, members).min(axis=1) <= space.ball_radius
    return ok.reshape(len(centers), len(probes)).all(axis=1)


def ball_covered_by_cluster(space: Space, member_locations, center, R: float, resolution: float) -> bool:
    """Conservative test that ``S(center, R)`` lies inside the union of member balls.

    Every point of a ``resolution``-net of the ball must sit within
    ``ball_radius - resolution`` of some member centre, so a True answer
    certifies coverage; False may be a near miss at mesh scale.
    """
    br = space.ball_radius
    if not R > 0:
        raise InvalidArgumentError(f"R must be positive, got {R}")
    if not 0 < resolution < br:
        raise InvalidArgumentError(f"resolution must lie in (0, ball_radius={br}), got {resolution}")
    members = np.asarray(member_locations, dtype=float).reshape(-1, space.coord_dim)
    center = geo.as_points(space, center)
    reach = br - resolution
    near = members[np.asarray(geo.distance(space, center, members)) <= R + resolution + reach]
    if len(near) == 0 or not coverage_screen(space, near, center, R)[0]:
        return False
    net = geo.covering_net(space, center, R, resolution)
    for lo in range(0, len(net), 256):
        d = geo.pairwise_distances(space, net[lo:lo + 256], near).min(axis=1)
        if np.any(d > reach):
            return False
    return True


# -- growth --------------------------------------------------------------------


class StopReason(str, Enum):
    EXHAUSTED = "exhausted"
    RADIUS_REACHED = "radius_reached"
    COVERED_BALL_FOUND = "covered_ball_found"


@dataclass(frozen=True)
class StopAtRadius:
    """Stop once a discovered centre is farther than ``radius`` from the seed."""

    radius: float


@dataclass(frozen=True)
class StopAtCoveredBall:
    """Stop once the discovered balls cover some ball of radius ``radius``.

    ``resolution`` is the coverage-test mesh; None means ``ball_radius / 32``.
    """

    radius: float
    resolution: Optional[float] = None


StopRule = Union[None, StopAtRadius, StopAtCoveredBall]


@dataclass(frozen=True, eq=False)
class GrowthTrace:
    seed_point: np.ndarray
    discovered: np.ndarray
    discovered_from: np.ndarray  # -1 for balls containing the seed point
    stop_reason: StopReason
    witness_center: Optional[np.ndarray] = None
    witness_radius: Optional[float] = None

    def __len__(self):
        return len(self.discovered)


def dump_trace(trace: GrowthTrace, path):
    rows = zip(range(len(trace)), trace.discovered.tolist(), trace.discovered_from.tolist())
    return write_csv(path, ["step", "point_id", "discovered_from"], rows)


def centroid(space: Space, locations: np.ndarray) -> np.ndarray:
    """Extrinsic mean projected back onto the model (hyperboloid barycentre)."""
    if space.kind is SpaceKind.EUCLIDEAN:
        return locations.mean(axis=0)
    s = locations[:, :3].sum(axis=0)
    h = s / math.sqrt(s[2] ** 2 - s[0] ** 2 - s[1] ** 2)
    if space.kind is SpaceKind.H2XR:
        h = np.append(h, locations[:, 3].mean())
    return geo.renormalize(space, h)


def _min_cover_count(space: Space, R: float) -> int:
    try:
        return max(1, math.ceil(geo.ball_volume(space, R) / geo.ball_volume(space, space.ball_radius) - 1e-12))
    except UnsupportedOperationError:
        return 1


class _CoverageSearch:
    """Looks for a covered ball near each newly discovered centre."""

    def __init__(self, space: Space, rule: StopAtCoveredBall, capacity: int):
        self.space = space
        self.R = rule.radius
        self.resolution = rule.resolution if rule.resolution is not None else space.ball_radius / 32
        if not 0 < self.resolution < space.ball_radius:
            raise InvalidArgumentError("coverage resolution must lie in (0, ball_radius)")
        self.reach = self.R + space.ball_radius
        self.min_count = _min_cover_count(space, self.R)
        self.buf = np.empty((max(capacity, 1), space.coord_dim))
        self.n = 0

    def add(self, loc: np.ndarray):
        """Register a new ball; returns a witness centre or None.

        Candidates: the new centre, every earlier centre within ``R + ball_radius``
        of it (the new ball may complete their neighbourhood) and the centroids
        of the found centres within ``R`` and ``R + ball_radius``.
        """
        self.buf[self.n] = loc
        self.n += 1
        if self.n < self.min_count:
            return None
        found = self.buf[:self.n]
        d = np.asarray(geo.distance(self.space, loc, found))
        near = found[d <= self.reach]
        if len(near) < self.min_count:
            return None
        candidates = [loc[None, :], near[:-1]]
        close = found[d <= self.R]
        if len(close) > 1:
            candidates.append(centroid(self.space, close)[None, :])
        candidates.append(centroid(self.space, near)[None, :])
        candidates = np.concatenate(candidates)
        # a candidate is within R + br of the new ball and uses members within R + br of itself
        pool = found[d <= 2 * self.reach]
        for y in candidates[coverage_screen(self.space, pool, candidates, self.R)]:
            if ball_covered_by_cluster(self.space, pool, y, self.R, self.resolution):
                return y
        return None


def grow_component(space: Space, config: MarkedConfiguration, lam: float, seed_point,
                   stop: StopRule = None, graph: Optional[IntersectionGraph] = None) -> GrowthTrace:
    """Breadth-first exploration of the cluster containing ``seed_point``.

    Starts from every active ball containing the seed point and evaluates the
    stop rule after each newly discovered ball.  ``EXHAUSTED`` means the whole
    (window-restricted) component was found.
    """
    seed_point = geo.as_points(space, seed_point)
    if not geo.in_window(space, config.window, seed_point):
        raise InvalidArgumentError("seed_point lies outside the configuration window")
    if graph is None:
        graph = build_intersection_graph(space, restrict(config, lam))
    elif graph.active.lam != lam:
        graph = subgraph(graph, lam)
    active = graph.active
    locs = config.locations
    br = space.ball_radius
    start = active.active_ids[np.asarray(geo.distance(space, seed_point, active.locations)) <= br] \
        if len(active) else np.empty(0, np.int64)

    indptr, indices = graph.csr
    seen = np.zeros(len(config), dtype=bool)
    order, parents = [], []
    queue = deque()
    search = _CoverageSearch(space, stop, len(active)) if isinstance(stop, StopAtCoveredBall) else None

    def finish(reason, witness=None):
        return GrowthTrace(seed_point, np.asarray(order, dtype=np.int64), np.asarray(parents, dtype=np.int64),
                           reason, witness, stop.radius if witness is not None else None)

    def discover(i, parent):
        seen[i] = True
        order.append(int(i))
        parents.append(int(parent))
        queue.append(i)
        if isinstance(stop, StopAtRadius):
            if geo.distance(space, seed_point, locs[i]) > stop.radius:
                return finish(StopReason.RADIUS_REACHED)
        elif search is not None:
            y = search.add(locs[i])
            if y is not None:
                return finish(StopReason.COVERED_BALL_FOUND, y)
        return None

    for s in start:
        done = discover(s, -1)
        if done is not None:
            return done
    while queue:
        i = queue.popleft()
        for j in indices[indptr[i]:indptr[i + 1]]:
            if not seen[j]:
                done = discover(j, i)
                if done is not None:
                    return done
    return finish(StopReason.EXHAUSTED)


# -- chemical distance ---------------------------------------------------------


def chemical_distance(graph: IntersectionGraph, p, q) -> Optional[int]:
    """Fewest balls in a chain of intersecting balls from ``p`` to ``q``.

    Returns None when either point is uncovered or they lie in different
    clusters.
    """
    space = graph.space
    active = graph.active
    if len(active) == 0:
        return None
    locs = active.locations
    br = space.ball_radius
    src = active.active_ids[np.asarray(geo.distance(space, p, locs)) <= br]
    dst = active.active_ids[np.asarray(geo.distance(space, q, locs)) <= br]
    if len(src) == 0 or len(dst) == 0:
        return None
    allowed = np.zeros(len(graph.config), dtype=np.bool_)
    allowed[active.active_ids] = True
    indptr, indices = graph.csr
    hops = bfs_hops(indptr, indices, src, allowed, -1)[dst]
    hops = hops[hops >= 0]
    return int(hops.min()) + 1 if len(hops) else None


# -- boundary connections ------------------------------------------------------


@dataclass(frozen=True)
class BoundaryConnection:
    """Point ids ``x1`` (first cluster) and ``x2`` (second cluster).

    ``via`` is None for a direct connection, otherwise the chain endpoints
    ``(y_first, y_last)`` near ``x1`` and ``x2``, taken from one other cluster.
    """

    x1: int
    x2: int
    via: Optional[tuple] = None


def boundary_threshold(space: Space) -> float:
    """Centre distance below which two balls are less than one diameter apart."""
    return 4.0 * space.ball_radius


def _boundary_matrices(space, labeling, cluster_a, cluster_b):
    if cluster_a == cluster_b:
        raise InvalidArgumentError("boundary connections need two distinct clusters")
    a = labeling.members(cluster_a)
    b = labeling.members(cluster_b)
    locs = labeling.active.config.locations
    thr = boundary_threshold(space)
    direct = geo.pairwise_distances(space, locs[a], locs[b]) < thr

    ids = labeling.active.active_ids
    lab = labeling.labels[ids]
    others = ids[(lab != cluster_a) & (lab != cluster_b)]
    if len(others) == 0:
        empty = sparse.csr_matrix((len(a), 0), dtype=np.int64)
        return a, b, direct, empty, sparse.csr_matrix((len(b), 0), dtype=np.int64), others
    other_labels, k_of = np.unique(labeling.labels[others], return_inverse=True)
    index = MetricIndex(space, locs[others])

    def incidence(points):
        qi, pj = index.query_many(locs[points], thr)
        strict = np.asarray(geo.distance(space, locs[points][qi], locs[others][pj])) < thr
        qi, pj = qi[strict], pj[strict]
        data = np.ones(len(qi), dtype=np.int64)
        return sparse.csr_matrix((data, (qi, k_of[pj])), shape=(len(points), len(other_labels)))

    return a, b, direct, incidence(a), incidence(b), others


def count_boundary_connections(space: Space, config: MarkedConfiguration, lam: float, cluster_a: int,
                               cluster_b: int, labeling: Optional[ClusterLabeling] = None) -> int:
    """Number of point pairs ``(x1, x2)`` forming a boundary connection between two clusters."""
    if labeling is None:
        labeling = cluster_configuration(space, config, lam)
    _, _, direct, ia, ib, _ = _boundary_matrices(space, labeling, cluster_a, cluster_b)
    chained = (ia @ ib.T).toarray() > 0 if ia.shape[1] else np.zeros_like(direct)
    return int(np.count_nonzero(direct | chained))


def boundary_connections(space: Space, config: MarkedConfiguration, lam: float, cluster_a: int,
                         cluster_b: int, labeling: Optional[ClusterLabeling] = None) -> list:
    """All boundary connections, direct ones without a chain witness."""
    if labeling is None:
        labeling = cluster_configuration(space, config, lam)
    a, b, direct, ia, ib, others = _boundary_matrices(space, labeling, cluster_a, cluster_b)
    locs = config.locations
    thr = boundary_threshold(space)
    shared = (ia @ ib.T).toarray() > 0 if ia.shape[1] else np.zeros_like(direct)
    other_labels = np.unique(labeling.labels[others]) if len(others) else np.empty(0, np.int64)
    out = []
    for u, v in zip(*np.nonzero(direct | shared)):
        x1, x2 = int(a[u]), int(b[v])
        if direct[u, v]:
            out.append(BoundaryConnection(x1, x2))
            continue
        k = np.intersect1d(ia[u].indices, ib[v].indices)[0]
        members = labeling.members(int(other_labels[k]))
        d1 = np.asarray(geo.distance(space, locs[x1], locs[members]))
        d2 = np.asarray(geo.distance(space, locs[x2], locs[members]))
        y1 = int(members[np.flatnonzero(d1 < thr)[np.argmin(d1[d1 < thr])]])
        yn = int(members[np.flatnonzero(d2 < thr)[np.argmin(d2[d2 < thr])]])
        out.append(BoundaryConnection(x1, x2, (y1, yn)))
    return out


@dataclass(frozen=True, eq=False)
class MergeResult:
    bridges: np.ndarray  # (k, d) extra ball centres, k <= 2
    locations: np.ndarray  # active locations followed by the bridges
    point_ids: np.ndarray  # config id per row of ``locations`` (-1 for bridges)
    labels: np.ndarray  # component label per row of ``locations``
    merged: bool


def merge_via_boundary_connection(space: Space, config: MarkedConfiguration, lam: float,
                                  pair: BoundaryConnection) -> MergeResult:
    """Insert at most two balls at geodesic midpoints and relabel.

    Raises InternalInvariantError if the two clusters do not end up merged.
    """
    locs = config.locations
    gaps = [(pair.x1, pair.x2)] if pair.via is None else [(pair.x1, pair.via[0]), (pair.via[1], pair.x2)]
    bridges = np.array([geo.geodesic_midpoint(space, locs[u], locs[v]) for u, v in gaps])
    two_r = 2.0 * space.ball_radius
    for (u, v), m in zip(gaps, bridges):
        if max(geo.distance(space, locs[u], m), geo.distance(space, locs[v], m)) > two_r:
            raise InternalInvariantError(f"bridge between {u} and {v} does not touch both balls")
    active = restrict(config, lam)
    all_locs = np.concatenate([active.locations, bridges])
    ids = np.concatenate([active.active_ids, np.full(len(bridges), -1)])
    edges = pair_edges(space, all_locs, two_r)
    labels = component_labels(len(all_locs), edges[:, 0].copy(), edges[:, 1].copy())
    row = {int(pid): k for k, pid in enumerate(active.active_ids)}
    merged = bool(labels[row[pair.x1]] == labels[row[pair.x2]])
    if not merged:
        raise InternalInvariantError(f"boundary connection {pair} did not merge its clusters")
    return MergeResult(bridges, all_locs, ids, labels, merged)
