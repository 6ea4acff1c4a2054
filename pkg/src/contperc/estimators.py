"""Monte Carlo estimators built on the coupled configurations.

With common random numbers a trial samples one configuration at the largest
grid intensity and adds its points in mark order (a Newman-Ziff style sweep),
so the event indicators at every grid intensity come from the same sample and
are monotone in lambda trial by trial.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import geometry as geo
from .clusters import (
    ClusterLabeling,
    IntersectionGraph,
    build_intersection_graph,
    label_clusters,
    spanning_labels,
    spanning_masks,
    subgraph,
    touches,
)
from .constants import WILSON_Z
from .errors import BracketingError, InternalInvariantError, InvalidArgumentError, UndefinedGiantError
from .geometry import Ball, Cylinder, Space, SpaceKind, Window
from .io import write_csv, write_keyvalue
from .kernels import bfs_hops, sweep_flag_counts
from .pointprocess import (
    MarkedConfiguration,
    experiment_id,
    restrict,
    sample_configuration,
    sidecar_path,
    space_metadata,
    window_metadata,
)

# -- statistics ----------------------------------------------------------------


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z):
    """Wilson score interval ``(low, high)`` for a binomial proportion."""
    if trials <= 0:
        raise InvalidArgumentError("trials must be >= 1")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return center - half, center + half


def wilson_half_width(successes: int, trials: int) -> float:
    lo, hi = wilson_interval(successes, trials)
    return 0.5 * (hi - lo)


@dataclass(frozen=True)
class Estimate:
    estimate: float
    half_width: float
    trials: int
    successes: int
    seed: int

    @classmethod
    def from_counts(cls, successes: int, trials: int, seed: int) -> "Estimate":
        return cls(successes / trials, wilson_half_width(successes, trials), trials, int(successes), seed)


# -- plans and reports ---------------------------------------------------------


@dataclass(frozen=True)
class SweepPlan:
    space: Space
    lambdas: tuple
    trials: int
    seed: int
    window: Optional[Window] = None
    common_random_numbers: bool = True
    threads: int = 1

    def __post_init__(self):
        lams = tuple(float(x) for x in self.lambdas)
        if not lams:
            raise InvalidArgumentError("lambda grid is empty")
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise InvalidArgumentError("lambda grid must be strictly ascending")
        if lams[0] < 0:
            raise InvalidArgumentError("lambda grid must be non-negative")
        if self.trials < 1:
            raise InvalidArgumentError("trials must be >= 1")
        object.__setattr__(self, "lambdas", lams)

    @property
    def lambda_max(self) -> float:
        return self.lambdas[-1]


REPORT_HEADER = ["experiment", "space", "lambda", "param1", "param2", "estimate", "half_width", "trials", "seed"]


@dataclass
class EstimatorReport:
    experiment: str
    space: Space
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, lam, param1, param2, est: Estimate):
        self.rows.append((self.experiment, self.space.name, float(lam), param1, param2,
                          est.estimate, est.half_width, est.trials, est.seed))

    def write(self, path):
        write_csv(path, REPORT_HEADER, self.rows)
        write_keyvalue(sidecar_path(path), {"experiment": self.experiment} | self.metadata)
        return path

    def estimates(self, param1=None, param2=None) -> np.ndarray:
        return np.array([r[5] for r in self.rows
                         if (param1 is None or r[3] == param1) and (param2 is None or r[4] == param2)])


def _map_trials(fn: Callable, items: Sequence, threads: int = 1) -> list:
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _base_metadata(space: Space, window: Window, plan_seed: int, trials: int) -> dict:
    return space_metadata(space) | window_metadata(window) | {"seed": plan_seed, "trials": trials}


# -- core sweep ----------------------------------------------------------------


@dataclass(frozen=True)
class _SweepResult:
    counts: np.ndarray  # clusters meeting both regions, per grid intensity
    first_lambda: float  # smallest intensity at which such a cluster exists


def _flags(mask_a: np.ndarray, mask_b: np.ndarray) -> np.ndarray:
    return mask_a.astype(np.uint8) | (mask_b.astype(np.uint8) << 1)


def event_sweep(space: Space, config: MarkedConfiguration, masks: Callable, grid: Sequence[float],
                graph: Optional[IntersectionGraph] = None) -> _SweepResult:
    """Count clusters meeting both regions at each intensity of ``grid``.

    ``masks(locations)`` returns the two contact masks.  The graph at
    ``lambda_max`` is built once; points are then added in mark order.
    """
    grid = np.asarray(grid, dtype=float)
    if len(config) == 0:
        return _SweepResult(np.zeros(len(grid), dtype=np.int64), math.inf)
    if graph is None:
        graph = build_intersection_graph(space, restrict(config, config.lambda_max))
    indptr, indices = graph.csr
    order = np.argsort(config.marks, kind="stable")
    sorted_marks = config.marks[order]
    cuts = np.searchsorted(sorted_marks, grid, side="right")
    flags = _flags(*masks(config.locations))
    counts, first = sweep_flag_counts(order, indptr, indices, flags, cuts)
    return _SweepResult(counts, float(sorted_marks[first]) if first >= 0 else math.inf)


def _run_sweep(space, window, plan: SweepPlan, masks, name: str) -> list:
    """Per-trial results as a list over trials of ``(counts per grid, first_lambda)``."""
    eid = experiment_id(name)
    lams = plan.lambdas

    if plan.common_random_numbers:
        def trial(t):
            config = sample_configuration(space, window, plan.lambda_max, plan.seed, (eid, t)) \
                if plan.lambda_max > 0 else None
            if config is None:
                return _SweepResult(np.zeros(len(lams), dtype=np.int64), math.inf)
            return event_sweep(space, config, masks, lams)
    else:
        def trial(t):
            counts = np.zeros(len(lams), dtype=np.int64)
            for g, lam in enumerate(lams):
                if lam == 0:
                    continue
                config = sample_configuration(space, window, lam, plan.seed, (eid, g, t))
                counts[g] = event_sweep(space, config, masks, [lam]).counts[0]
            return _SweepResult(counts, math.nan)

    return _map_trials(trial, range(plan.trials), plan.threads)


# -- crossing / lambda_c -------------------------------------------------------


def radial_masks(space: Space, r_inner: float, r_outer: float, center=None):
    """Masks for balls meeting ``S(c, r_inner)`` and reaching distance ``r_outer`` from ``c``."""
    if not r_inner < r_outer:
        raise InvalidArgumentError(f"need r_inner < r_outer, got {r_inner}, {r_outer}")
    c = space.origin() if center is None else np.asarray(center, dtype=float)
    br = space.ball_radius

    def masks(locations):
        r = np.asarray(geo.distance(space, c, locations))
        return r <= r_inner + br, r + br >= r_outer

    return masks


def crossing_window(space: Space, r_outer: float) -> Window:
    """Sampling window for one-arm events: the outer radius inflated by one diameter."""
    reach = r_outer + 2.0 * space.ball_radius
    if space.kind is SpaceKind.H2XR:
        return Cylinder(reach, reach)
    return Ball(reach)


@dataclass
class CrossingSweep:
    plan: SweepPlan
    r_inner: float
    r_outer: float
    successes: np.ndarray  # per grid intensity
    first_lambdas: np.ndarray  # per trial (CRN only)
    report: EstimatorReport

    @property
    def probabilities(self) -> np.ndarray:
        return self.successes / self.plan.trials

    def probability_at(self, lam: float) -> float:
        """Exact CRN frequency at any ``lam <= lambda_max`` from the per-trial thresholds."""
        if not self.plan.common_random_numbers:
            raise InvalidArgumentError("continuous evaluation needs common random numbers")
        return float(np.mean(self.first_lambdas <= lam))


def crossing_sweep(space: Space, plan: SweepPlan, r_inner: float, r_outer: float) -> CrossingSweep:
    window = plan.window or crossing_window(space, r_outer)
    results = _run_sweep(space, window, plan, radial_masks(space, r_inner, r_outer), "crossing")
    hits = np.array([r.counts > 0 for r in results]).reshape(plan.trials, len(plan.lambdas))
    successes = hits.sum(axis=0)
    report = EstimatorReport("crossing-sweep", space, metadata=_base_metadata(space, window, plan.seed, plan.trials)
                             | {"r_inner": r_inner, "r_outer": r_outer,
                                "common_random_numbers": plan.common_random_numbers})
    for lam, s in zip(plan.lambdas, successes):
        report.add(lam, r_inner, r_outer, Estimate.from_counts(int(s), plan.trials, plan.seed))
    return CrossingSweep(plan, r_inner, r_outer, successes, np.array([r.first_lambda for r in results]), report)


def crossing_probability(space: Space, lam: float, r_inner: float, r_outer: float, trials: int, seed: int,
                         threads: int = 1) -> Estimate:
    """Frequency of a cluster meeting ``S(0, r_inner)`` and reaching distance ``r_outer``."""
    if lam == 0:
        return Estimate.from_counts(0, trials, seed)
    sweep = crossing_sweep(space, SweepPlan(space, (lam,), trials, seed, threads=threads), r_inner, r_outer)
    return Estimate.from_counts(int(sweep.successes[0]), trials, seed)


@dataclass(frozen=True)
class LambdaInterval:
    lo: float
    hi: float
    p_lo: float
    p_hi: float
    report: EstimatorReport

    def __contains__(self, lam):
        return self.lo <= lam <= self.hi


def _bracket(lams, probs, threshold, report):
    above = np.flatnonzero(probs > threshold)
    if len(above) == 0:
        raise BracketingError(f"crossing frequency never exceeds {threshold} on the grid", report)
    k = above[0]
    below = np.flatnonzero(probs[:k] < threshold)
    if len(below) == 0:
        raise BracketingError(f"crossing frequency is not below {threshold} before lambda={lams[k]}", report)
    return below[-1], k


def lambda_c_estimate(space: Space, sweep: SweepPlan, r_inner: float, r_outer: float,
                      threshold: float = 0.5, tol: Optional[float] = None) -> LambdaInterval:
    """Bracket the intensity where the one-arm frequency crosses ``threshold``.

    The grid bracket is refined by bisection down to ``tol`` when common
    random numbers are on (the frequency is then known at every intensity).
    """
    result = crossing_sweep(space, sweep, r_inner, r_outer)
    lams = np.asarray(sweep.lambdas)
    probs = result.probabilities
    j, k = _bracket(lams, probs, threshold, result.report)
    lo, hi, p_lo, p_hi = float(lams[j]), float(lams[k]), float(probs[j]), float(probs[k])
    if tol is not None and sweep.common_random_numbers:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            p = result.probability_at(mid)
            # converge on the smallest intensity whose frequency reaches the threshold
            if p < threshold:
                lo, p_lo = mid, p
            else:
                hi, p_hi = mid, p
    result.report.metadata |= {"threshold": threshold, "lambda_lo": lo, "lambda_hi": hi}
    return LambdaInterval(lo, hi, p_lo, p_hi, result.report)


# -- big-ball connectivity / lambda_BB -----------------------------------------


def bb_geometry(space: Space, R: float, separation: float, pad: Optional[float] = None, axis: str = "height"):
    """Regions ``S(x, R)``, ``S(y, R)`` at distance ``separation``, centred on the origin, and a window."""
    if R <= 0 or separation < 0:
        raise InvalidArgumentError("need R > 0 and separation >= 0")
    pad = 2.0 * space.ball_radius if pad is None else pad
    x = geo.point_along_axis(space, -separation / 2, axis)
    y = geo.point_along_axis(space, separation / 2, axis)
    reach = separation / 2 + R + pad
    if space.kind is SpaceKind.H2XR:
        window = Cylinder(R + pad, reach) if axis == "height" else Cylinder(reach, R + pad)
    else:
        window = Ball(reach)
    return Ball(R, tuple(x)), Ball(R, tuple(y)), window


def _bb_masks(space, region_a, region_b):
    def masks(locations):
        return touches(space, region_a, locations), touches(space, region_b, locations)
    return masks


def bb_sweep(space: Space, plan: SweepPlan, R: float, separations: Sequence[float], pad=None,
             axis: str = "height") -> EstimatorReport:
    """Connection frequencies of two radius-``R`` balls, one row per (lambda, separation)."""
    report = EstimatorReport("bb-sweep", space, metadata=space_metadata(space)
                             | {"R": R, "separations": ",".join(str(s) for s in separations),
                                "seed": plan.seed, "trials": plan.trials, "axis": axis,
                                "common_random_numbers": plan.common_random_numbers})
    for sep in separations:
        a, b, window = bb_geometry(space, R, sep, pad, axis)
        results = _run_sweep(space, window, plan, _bb_masks(space, a, b), f"bb:{sep!r}")
        hits = np.array([r.counts > 0 for r in results]).reshape(plan.trials, len(plan.lambdas))
        for lam, s in zip(plan.lambdas, hits.sum(axis=0)):
            report.add(lam, R, sep, Estimate.from_counts(int(s), plan.trials, plan.seed))
    report.rows.sort(key=lambda r: (r[2], r[4]))
    return report


def bb_connection_probability(space: Space, lam: float, R: float, separation: float, trials: int, seed: int,
                              pad=None, axis: str = "height", threads: int = 1) -> Estimate:
    """Frequency of ``S(x, R) <-> S(y, R)`` with ``d(x, y) = separation``."""
    if lam == 0:
        return Estimate.from_counts(0, trials, seed)
    rep = bb_sweep(space, SweepPlan(space, (lam,), trials, seed, threads=threads), R, [separation], pad, axis)
    return Estimate.from_counts(round(rep.rows[0][5] * trials), trials, seed)


@dataclass(frozen=True)
class ThresholdResult:
    """Smallest grid intensity meeting a target, with the bracketing grid cell.

    ``lam`` is None when the target is never reached on the grid.
    """

    lam: Optional[float]
    lo: Optional[float]
    hi: Optional[float]
    values: np.ndarray  # the compared statistic per grid intensity
    report: EstimatorReport

    @property
    def reached(self) -> bool:
        return self.lam is not None


def _first_reaching(lams, values, target, report) -> ThresholdResult:
    ok = np.flatnonzero(np.asarray(values) >= target)
    if len(ok) == 0:
        return ThresholdResult(None, float(lams[-1]), None, np.asarray(values), report)
    k = ok[0]
    return ThresholdResult(float(lams[k]), float(lams[k - 1]) if k > 0 else None, float(lams[k]),
                           np.asarray(values), report)


def lambda_bb_estimate(space: Space, sweep: SweepPlan, R: float, separations: Sequence[float],
                       target: float = 0.99, pad=None, axis: str = "height") -> ThresholdResult:
    """Smallest grid intensity where the minimum connection frequency over separations reaches ``target``."""
    report = bb_sweep(space, sweep, R, separations, pad, axis)
    per_sep = np.array([report.estimates(param2=sep) for sep in separations])
    result = _first_reaching(np.asarray(sweep.lambdas), per_sep.min(axis=0), target, report)
    report.metadata |= {"target": target, "lambda_bb": result.lam}
    return result


# -- spanning clusters / uniqueness --------------------------------------------


def spanning_cluster_count(space: Space, config: MarkedConfiguration, lam: float, r_inner: float, r_outer: float,
                           labeling: Optional[ClusterLabeling] = None) -> int:
    """Number of clusters at ``lam`` meeting both the inner and the outer region of the window."""
    if lam == 0:
        return 0
    if labeling is None:
        labeling = label_clusters(build_intersection_graph(space, restrict(config, lam)))
    return len(spanning_labels(labeling, r_inner, r_outer))


def spanning_window(space: Space, r_inner: float, r_outer: float) -> Window:
    """Sampling window for spanning counts; for H2xR a cylinder of H2 radius
    ``r_inner`` and half-height ``r_outer``, inflated by one diameter."""
    margin = 2.0 * space.ball_radius
    if space.kind is SpaceKind.H2XR:
        return Cylinder(r_inner + margin, r_outer + margin)
    return Ball(r_outer + margin)


@dataclass
class SpanningSweep:
    plan: SweepPlan
    counts: np.ndarray  # (trials, grid)
    report: EstimatorReport

    def frequency(self, k: int) -> np.ndarray:
        return (self.counts == k).mean(axis=0)

    def histogram(self) -> dict:
        """``{lambda: {multiplicity: occurrences}}``."""
        out = {}
        for g, lam in enumerate(self.plan.lambdas):
            vals, n = np.unique(self.counts[:, g], return_counts=True)
            out[lam] = {int(v): int(c) for v, c in zip(vals, n)}
        return out


def spanning_sweep(space: Space, plan: SweepPlan, r_inner: float, r_outer: float,
                   experiment: str = "spanning-sweep") -> SpanningSweep:
    """Spanning-cluster multiplicities per trial and grid intensity.

    Report rows: ``param1`` is the multiplicity ``k``, ``estimate`` the frequency
    of exactly ``k`` spanning clusters; every ``k`` observed anywhere in the
    sweep gets a row at every intensity.
    """
    window = plan.window or spanning_window(space, r_inner, r_outer)

    def masks(locations):
        return spanning_masks(space, window, locations, r_inner, r_outer)

    results = _run_sweep(space, window, plan, masks, "spanning")
    counts = np.array([r.counts for r in results]).reshape(plan.trials, len(plan.lambdas))
    report = EstimatorReport(experiment, space, metadata=_base_metadata(space, window, plan.seed, plan.trials)
                             | {"r_inner": r_inner, "r_outer": r_outer,
                                "common_random_numbers": plan.common_random_numbers})
    ks = np.unique(counts)
    for g, lam in enumerate(plan.lambdas):
        for k in ks:
            report.add(lam, int(k), r_outer, Estimate.from_counts(int(np.sum(counts[:, g] == k)), plan.trials,
                                                                   plan.seed))
    return SpanningSweep(plan, counts, report)


def uniqueness_threshold(space: Space, sweep: SweepPlan, r_inner: float, r_outer: float,
                         target: float = 0.99) -> ThresholdResult:
    """Smallest grid intensity where exactly one spanning cluster occurs with frequency ``>= target``."""
    result = spanning_sweep(space, sweep, r_inner, r_outer)
    out = _first_reaching(np.asarray(sweep.lambdas), result.frequency(1), target, result.report)
    result.report.metadata |= {"target": target, "lambda_u_proxy": out.lam}
    return out


def htimesr_multiplicity(lambdas: Sequence[float], trials: int, seed: int, h2_radius: float = 6.0,
                         height_half: float = 6.0, ball_radius: float = 1.0, threads: int = 1) -> SpanningSweep:
    """Histogram of top-to-bottom spanning clusters in an H2xR cylinder, per intensity."""
    space = Space.h2xr(ball_radius)
    plan = SweepPlan(space, tuple(lambdas), trials, seed, threads=threads)
    return spanning_sweep(space, plan, h2_radius, height_half, experiment="htimesr-multiplicity")


# -- stability -----------------------------------------------------------------


@dataclass(frozen=True)
class StabilityReport:
    n_spanning2: int
    n_stable: int

    @property
    def fraction(self) -> float:
        return self.n_stable / self.n_spanning2 if self.n_spanning2 else math.nan


def check_refinement(lower: ClusterLabeling, upper: ClusterLabeling) -> None:
    """Every lower-intensity cluster lies inside exactly one upper-intensity cluster."""
    ids = lower.active.active_ids
    lab_lo = lower.labels[ids]
    lab_hi = upper.labels[ids]
    if np.any(lab_hi < 0):
        raise InternalInvariantError("a lower-intensity point is inactive at the higher intensity")
    order = np.lexsort((lab_hi, lab_lo))
    lo_sorted, hi_sorted = lab_lo[order], lab_hi[order]
    same = lo_sorted[1:] == lo_sorted[:-1]
    if np.any(same & (hi_sorted[1:] != hi_sorted[:-1])):
        raise InternalInvariantError("a lower-intensity cluster is split at the higher intensity")


def stability_check(space: Space, config: MarkedConfiguration, lam1: float, lam2: float, r_inner: float,
                    r_outer: float, graph: Optional[IntersectionGraph] = None) -> StabilityReport:
    """Count spanning ``lam2`` clusters and those containing a spanning ``lam1`` cluster."""
    if not 0 <= lam1 <= lam2 <= config.lambda_max:
        raise InvalidArgumentError("need 0 <= lam1 <= lam2 <= lambda_max")
    if graph is None or graph.active.lam != lam2:
        graph = build_intersection_graph(space, restrict(config, lam2))
    upper = label_clusters(graph)
    lower = label_clusters(subgraph(graph, lam1))
    check_refinement(lower, upper)
    span2 = spanning_labels(upper, r_inner, r_outer)
    span1 = spanning_labels(lower, r_inner, r_outer)
    # a lower cluster's label is one of its members, which carries the upper label
    stable = np.intersect1d(span2, upper.labels[span1]) if len(span1) else np.empty(0)
    return StabilityReport(len(span2), len(stable))


@dataclass
class StabilityExperiment:
    reports: list
    report: EstimatorReport

    @property
    def n_spanning2(self) -> int:
        return sum(r.n_spanning2 for r in self.reports)

    @property
    def n_stable(self) -> int:
        return sum(r.n_stable for r in self.reports)

    @property
    def pooled_fraction(self) -> float:
        return self.n_stable / self.n_spanning2 if self.n_spanning2 else math.nan


def stability_experiment(space: Space, lam1: float, lam2: float, r_inner: float, r_outer: float, trials: int,
                         seed: int, threads: int = 1) -> StabilityExperiment:
    """Pooled stability fraction over ``trials`` shared-seed configurations at ``lam2``."""
    window = spanning_window(space, r_inner, r_outer)
    eid = experiment_id("stability")

    def trial(t):
        config = sample_configuration(space, window, lam2, seed, (eid, t))
        return stability_check(space, config, lam1, lam2, r_inner, r_outer)

    reports = _map_trials(trial, range(trials), threads)
    report = EstimatorReport("stability", space, metadata=_base_metadata(space, window, seed, trials)
                             | {"lambda1": lam1, "lambda2": lam2, "r_inner": r_inner, "r_outer": r_outer})
    n2 = sum(r.n_spanning2 for r in reports)
    ns = sum(r.n_stable for r in reports)
    est = Estimate(ns / n2 if n2 else math.nan, wilson_half_width(ns, n2) if n2 else math.nan, n2, ns, seed)
    report.add(lam2, lam1, r_outer, est)
    report.metadata |= {"n_spanning2": n2, "n_stable": ns}
    return StabilityExperiment(reports, report)


# -- A-sets --------------------------------------------------------------------


@dataclass(frozen=True)
class ASetMembership:
    in_a1: bool
    in_a2: bool
    in_a3: bool


def default_spanning_radii(space: Space, window: Window):
    """Inner/outer radii used when none are given: a quarter of the window and its rim."""
    margin = 2.0 * space.ball_radius
    if isinstance(window, Cylinder):
        return max(window.h2_radius - margin, space.ball_radius), max(window.height_half - margin, space.ball_radius)
    return window.radius / 4, max(window.radius - margin, window.radius / 2)


def giant_cluster(labeling: ClusterLabeling, r_inner: float, r_outer: float) -> int:
    """Largest spanning cluster; ties go to the smallest label."""
    span = spanning_labels(labeling, r_inner, r_outer)
    if len(span) == 0:
        raise UndefinedGiantError("no spanning cluster at lambda_star; raise lambda_star or enlarge the window")
    sizes = np.array([labeling.clusters[int(s)].size for s in span])
    return int(span[np.flatnonzero(sizes == sizes.max())[0]])


def a_set_membership(space: Space, config: MarkedConfiguration, z, r: float, n: int, lam: float, lam_star: float,
                     r_inner: Optional[float] = None, r_outer: Optional[float] = None,
                     graph: Optional[IntersectionGraph] = None) -> ASetMembership:
    """Membership of ``z`` in the three random sets used for the product-space argument.

    * A1: ``S(z, r)`` meets the giant cluster at ``lam_star``.
    * A2: every two points of ``S(z, r + 1/2)`` covered by the giant are joined by
      fewer than ``n`` balls (probe mesh ``ball_radius / 4``; vacuous if none).
    * A3: no point with mark in ``(lam, lam_star]`` lies within ``r + 2n`` of ``z``.
    """
    if not 0 <= lam <= lam_star <= config.lambda_max:
        raise InvalidArgumentError("need 0 <= lam <= lam_star <= lambda_max")
    z = geo.as_points(space, z)
    br = space.ball_radius
    if r_inner is None or r_outer is None:
        r_inner, r_outer = default_spanning_radii(space, config.window)
    if graph is None or graph.active.lam != lam_star:
        graph = build_intersection_graph(space, restrict(config, lam_star))
    labeling = label_clusters(graph)
    giant = labeling.members(giant_cluster(labeling, r_inner, r_outer))
    locs = config.locations

    in_a1 = bool(np.any(np.asarray(geo.distance(space, z, locs[giant])) <= r + br))

    probes = geo.covering_net(space, z, r + 0.5, br / 4)
    probes = probes[np.asarray(geo.distance(space, z, probes)) <= r + 0.5]
    dmat = geo.pairwise_distances(space, probes, locs[giant]) <= br
    covered = dmat.any(axis=1)
    in_a2 = True
    if covered.any():
        allowed = np.zeros(len(config), dtype=np.bool_)
        allowed[giant] = True
        indptr, indices = graph.csr
        cover_sets = [giant[row] for row in dmat[covered]]
        for src in cover_sets:
            # chemical distance < n  <=>  hop distance <= n - 2 between covering balls
            hops = bfs_hops(indptr, indices, src, allowed, n - 2) if n >= 2 else None
            if hops is None or any(not np.any(hops[dst] >= 0) for dst in cover_sets):
                in_a2 = False
                break

    window_marks = (config.marks > lam) & (config.marks <= lam_star)
    near = np.asarray(geo.distance(space, z, locs[window_marks])) <= r + 2 * n if window_marks.any() else []
    in_a3 = not np.any(near)
    return ASetMembership(in_a1, in_a2, in_a3)


def a_set_experiment(space: Space, window: Window, lam_star: float, lam: float, r: float, n: int, trials: int,
                     seed: int, z=None, threads: int = 1) -> EstimatorReport:
    """Membership frequencies of ``z`` (default: window centre) in A1, A2, A3 and their intersection.

    Trials without a spanning cluster at ``lam_star`` are skipped and counted in
    the metadata; if every trial lacks one, UndefinedGiantError is raised.
    """
    eid = experiment_id("a-sets")
    z = geo.window_center(space, window) if z is None else z

    def trial(t):
        config = sample_configuration(space, window, lam_star, seed, (eid, t))
        try:
            return a_set_membership(space, config, z, r, n, lam, lam_star)
        except UndefinedGiantError:
            return None

    results = _map_trials(trial, range(trials), threads)
    valid = [m for m in results if m is not None]
    if not valid:
        raise UndefinedGiantError("no trial produced a spanning cluster at lambda_star")
    report = EstimatorReport("a-sets", space, metadata=_base_metadata(space, window, seed, trials)
                             | {"lambda_star": lam_star, "r": r, "n": n, "skipped_no_giant": trials - len(valid)})
    counts = {
        "A1": sum(m.in_a1 for m in valid),
        "A2": sum(m.in_a2 for m in valid),
        "A3": sum(m.in_a3 for m in valid),
        "A": sum(m.in_a1 and m.in_a2 and m.in_a3 for m in valid),
    }
    for name, c in counts.items():
        report.add(lam, name, lam_star, Estimate.from_counts(c, len(valid), seed))
    return report
