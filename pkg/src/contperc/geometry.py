"""Metric, volume and sampling primitives for the supported homogeneous spaces.

Points are plain numpy arrays whose last axis holds model coordinates:

* ``EUCLIDEAN``: Cartesian coordinates, length ``dim``.
* ``HYPERBOLIC2``: hyperboloid coordinates ``(x, y, t)`` with
  ``x**2 + y**2 - t**2 = -1`` and ``t >= 1``.
* ``H2XR``: hyperboloid triple followed by a real height.

All functions broadcast over leading axes, so a ``(n, d)`` array is a batch of
``n`` points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .constants import MODEL_TOL
from .errors import InvalidArgumentError, UnsupportedOperationError


class SpaceKind(str, Enum):
    EUCLIDEAN = "euclidean"
    HYPERBOLIC2 = "h2"
    H2XR = "h2xr"


@dataclass(frozen=True)
class Space:
    """A homogeneous space together with the grain (ball) radius.

    ``dim`` is the intrinsic dimension; it is only free for Euclidean spaces
    and is forced to 2 for ``HYPERBOLIC2`` and 3 for ``H2XR``.
    """

    kind: SpaceKind
    dim: int = 2
    ball_radius: float = 1.0

    def __post_init__(self):
        kind = SpaceKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is SpaceKind.HYPERBOLIC2:
            object.__setattr__(self, "dim", 2)
        elif kind is SpaceKind.H2XR:
            object.__setattr__(self, "dim", 3)
        if int(self.dim) != self.dim or self.dim < 2:
            raise InvalidArgumentError(f"Euclidean dimension must be an integer >= 2, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        if not (self.ball_radius > 0 and math.isfinite(self.ball_radius)):
            raise InvalidArgumentError(f"ball_radius must be positive, got {self.ball_radius}")
        object.__setattr__(self, "ball_radius", float(self.ball_radius))

    @classmethod
    def euclidean(cls, dim: int = 2, ball_radius: float = 1.0) -> "Space":
        return cls(SpaceKind.EUCLIDEAN, dim, ball_radius)

    @classmethod
    def hyperbolic2(cls, ball_radius: float = 1.0) -> "Space":
        return cls(SpaceKind.HYPERBOLIC2, 2, ball_radius)

    @classmethod
    def h2xr(cls, ball_radius: float = 1.0) -> "Space":
        return cls(SpaceKind.H2XR, 3, ball_radius)

    @property
    def coord_dim(self) -> int:
        """Length of the coordinate vector of one point."""
        if self.kind is SpaceKind.EUCLIDEAN:
            return self.dim
        return 3 if self.kind is SpaceKind.HYPERBOLIC2 else 4

    @property
    def name(self) -> str:
        if self.kind is SpaceKind.EUCLIDEAN:
            return f"R{self.dim}"
        return "H2" if self.kind is SpaceKind.HYPERBOLIC2 else "H2xR"

    def origin(self) -> np.ndarray:
        o = np.zeros(self.coord_dim)
        if self.kind is not SpaceKind.EUCLIDEAN:
            o[2] = 1.0
        return o


@dataclass(frozen=True)
class Ball:
    """Closed geodesic ball. ``center=None`` means the origin of the space."""

    radius: float
    center: Optional[tuple] = None

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InvalidArgumentError(f"Ball radius must be positive, got {self.radius}")
        if self.center is not None:
            object.__setattr__(self, "center", tuple(float(c) for c in self.center))


@dataclass(frozen=True)
class Cylinder:
    """``S_H2(o, h2_radius) x [-height_half, height_half]``; only valid in H2xR."""

    h2_radius: float
    height_half: float

    def __post_init__(self):
        if not (self.h2_radius > 0 and self.height_half > 0):
            raise InvalidArgumentError(
                f"Cylinder needs h2_radius > 0 and height_half > 0, got {self.h2_radius}, {self.height_half}"
            )


Window = Union[Ball, Cylinder]


# -- validation ----------------------------------------------------------------


def as_points(space: Space, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != (space.coord_dim,):
        raise InvalidArgumentError(
            f"{space.name} points need {space.coord_dim} coordinates, got shape {p.shape}"
        )
    return p


def hyperboloid_residual(space: Space, p) -> np.ndarray:
    """``x**2 + y**2 - t**2 + 1`` for the hyperbolic part (zero on the model)."""
    p = as_points(space, p)
    return p[..., 0] ** 2 + p[..., 1] ** 2 - p[..., 2] ** 2 + 1.0


def validate_points(space: Space, p, tol: float = MODEL_TOL) -> np.ndarray:
    p = as_points(space, p)
    if not np.all(np.isfinite(p)):
        raise InvalidArgumentError("non-finite coordinates")
    if space.kind is not SpaceKind.EUCLIDEAN:
        # rounding in t**2 grows with t**2; the absolute tolerance applies up to t ~ 1
        scale = np.maximum(1.0, p[..., 2] ** 2)
        if np.any(np.abs(hyperboloid_residual(space, p)) > tol * scale) or np.any(p[..., 2] < 1.0 - tol):
            raise InvalidArgumentError("point is not on the upper hyperboloid sheet")
    return p


def renormalize(space: Space, p: np.ndarray) -> np.ndarray:
    """Project the hyperbolic part back onto the hyperboloid by recomputing ``t``."""
    if space.kind is SpaceKind.EUCLIDEAN:
        return p
    p = np.array(p, dtype=float, copy=True)
    p[..., 2] = np.sqrt(1.0 + p[..., 0] ** 2 + p[..., 1] ** 2)
    return p


def _check_window(space: Space, w: Window) -> None:
    if isinstance(w, Cylinder):
        if space.kind is not SpaceKind.H2XR:
            raise InvalidArgumentError("Cylinder windows are only valid in H2xR")
    elif isinstance(w, Ball):
        if w.center is not None:
            validate_points(space, np.asarray(w.center))
    else:
        raise InvalidArgumentError(f"unknown window {w!r}")


def window_center(space: Space, w: Window) -> np.ndarray:
    if isinstance(w, Ball) and w.center is not None:
        return np.asarray(w.center, dtype=float)
    return space.origin()


def inflate(w: Window, margin: float) -> Window:
    if isinstance(w, Ball):
        return Ball(w.radius + margin, w.center)
    return Cylinder(w.h2_radius + margin, w.height_half + margin)


# -- metric --------------------------------------------------------------------


def _h2_distance(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # |p - q|^2 in the Minkowski form equals 4 sinh^2(d/2); this avoids acosh near 1
    dx = p[..., 0] - q[..., 0]
    dy = p[..., 1] - q[..., 1]
    dt = p[..., 2] - q[..., 2]
    s = dx * dx + dy * dy - dt * dt
    return 2.0 * np.arcsinh(0.5 * np.sqrt(np.maximum(s, 0.0)))


def distance(space: Space, p, q):
    """Geodesic distance, broadcasting over leading axes.

    Each coordinate is combined in a fixed order, so the result for a pair
    does not depend on the batch shape it was computed in.
    """
    p = as_points(space, p)
    q = as_points(space, q)
    if space.kind is SpaceKind.EUCLIDEAN:
        s = (p[..., 0] - q[..., 0]) ** 2
        for k in range(1, space.dim):
            s = s + (p[..., k] - q[..., k]) ** 2
        d = np.sqrt(s)
    elif space.kind is SpaceKind.HYPERBOLIC2:
        d = _h2_distance(p, q)
    else:
        dh = _h2_distance(p[..., :3], q[..., :3])
        dz = p[..., 3] - q[..., 3]
        d = np.sqrt(dh * dh + dz * dz)
    return d if np.ndim(d) else float(d)


def pairwise_distances(space: Space, a, b) -> np.ndarray:
    """``(len(a), len(b))`` matrix of distances."""
    a = as_points(space, a)
    b = as_points(space, b)
    return np.asarray(distance(space, a[:, None, :], b[None, :, :]))


def distance_to_window(space: Space, w: Window, p) -> np.ndarray:
    """Distance from each point to the closed set ``w``; zero inside it."""
    p = as_points(space, p)
    if isinstance(w, Ball):
        return np.maximum(np.asarray(distance(space, window_center(space, w), p)) - w.radius, 0.0)
    dh = _h2_distance(space.origin()[:3], p[..., :3])
    gh = np.maximum(dh - w.h2_radius, 0.0)
    gz = np.maximum(np.abs(p[..., 3]) - w.height_half, 0.0)
    return np.sqrt(gh * gh + gz * gz)


def in_window(space: Space, w: Window, p, tol: float = MODEL_TOL) -> np.ndarray:
    return distance_to_window(space, w, p) <= tol


# -- volumes -------------------------------------------------------------------


def ball_volume(space: Space, r: float) -> float:
    if r < 0:
        raise InvalidArgumentError(f"radius must be >= 0, got {r}")
    if space.kind is SpaceKind.EUCLIDEAN:
        n = space.dim
        return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r**n
    if space.kind is SpaceKind.HYPERBOLIC2:
        # 2*pi*(cosh r - 1), written to stay accurate for small r
        return 4.0 * math.pi * math.sinh(r / 2) ** 2
    raise UnsupportedOperationError(
        "geodesic ball volume in H2xR is not provided; use window_volume with a Cylinder"
    )


def window_volume(space: Space, w: Window) -> float:
    _check_window(space, w)
    if isinstance(w, Cylinder):
        return 4.0 * math.pi * math.sinh(w.h2_radius / 2) ** 2 * 2.0 * w.height_half
    if space.kind is SpaceKind.H2XR:
        raise UnsupportedOperationError("Ball windows are not supported in H2xR; use a Cylinder window")
    return ball_volume(space, w.radius)


# -- isometries and constructions ---------------------------------------------


def _boost_matrix(c: np.ndarray) -> np.ndarray:
    """Lorentz boost taking (0, 0, 1) to the hyperboloid point ``c``."""
    cs = np.asarray(c[:2], dtype=float)
    ct = float(c[2])
    s2 = float(cs @ cs)
    L = np.eye(3)
    if s2 > 0.0:
        L[:2, :2] += (ct - 1.0) / s2 * np.outer(cs, cs)
    L[:2, 2] = cs
    L[2, :2] = cs
    L[2, 2] = ct
    return L


def move_from_origin(space: Space, center, pts: np.ndarray) -> np.ndarray:
    """Apply the isometry that takes the origin to ``center`` (a translation/boost)."""
    center = as_points(space, center)
    if space.kind is SpaceKind.EUCLIDEAN:
        return pts + center
    out = np.array(pts, dtype=float, copy=True)
    if np.any(center[:2] != 0.0):
        out[..., :3] = pts[..., :3] @ _boost_matrix(center[:3]).T
    if space.kind is SpaceKind.H2XR:
        out[..., 3] = pts[..., 3] + center[3]
    return renormalize(space, out)


def h2_polar(r, theta) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    sh = np.sinh(r)
    return np.stack([sh * np.cos(theta), sh * np.sin(theta), np.cosh(r)], axis=-1)


def point_along_axis(space: Space, s: float, axis: str = "h2") -> np.ndarray:
    """Point at signed distance ``s`` from the origin along a coordinate geodesic.

    In H2xR ``axis="height"`` moves along the real factor instead.
    """
    p = space.origin()
    if space.kind is SpaceKind.EUCLIDEAN:
        p[0] = s
    elif space.kind is SpaceKind.H2XR and axis == "height":
        p[3] = s
    else:
        p[0] = math.sinh(s)
        p[2] = math.cosh(s)
    return p


def geodesic_midpoint(space: Space, p, q) -> np.ndarray:
    p = as_points(space, p)
    q = as_points(space, q)
    if space.kind is SpaceKind.EUCLIDEAN:
        return 0.5 * (p + q)
    s = p[..., :3] + q[..., :3]
    norm = np.sqrt(s[..., 2] ** 2 - s[..., 0] ** 2 - s[..., 1] ** 2)
    m = s / norm[..., None]
    if space.kind is SpaceKind.H2XR:
        m = np.concatenate([m, (0.5 * (p[..., 3] + q[..., 3]))[..., None]], axis=-1)
    return renormalize(space, m)


# -- sampling ------------------------------------------------------------------


def _sample_h2_disk(rng: np.random.Generator, radius: float, n: int) -> np.ndarray:
    # cosh r - 1 = U (cosh R - 1)  <=>  sinh(r/2) = sqrt(U) sinh(R/2)
    u = rng.random(n)
    r = 2.0 * np.arcsinh(np.sqrt(u) * math.sinh(radius / 2))
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    return h2_polar(r, theta)


def sample_uniform_in_window(space: Space, w: Window, rng: np.random.Generator, size: Optional[int] = None):
    """Uniform sample(s) from ``w`` with respect to the volume measure.

    Returns one point when ``size`` is None, otherwise a ``(size, d)`` array.
    The order of random draws is fixed: radial variates, then angles or
    directions, then heights.
    """
    _check_window(space, w)
    n = 1 if size is None else int(size)
    if isinstance(w, Cylinder):
        pts = np.empty((n, 4))
        pts[:, :3] = _sample_h2_disk(rng, w.h2_radius, n)
        pts[:, 3] = rng.uniform(-w.height_half, w.height_half, n)
    elif space.kind is SpaceKind.EUCLIDEAN:
        d = space.dim
        r = w.radius * rng.random(n) ** (1.0 / d)
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1)[:, None]
        pts = r[:, None] * g
        if w.center is not None:
            pts = pts + np.asarray(w.center)
    elif space.kind is SpaceKind.HYPERBOLIC2:
        pts = _sample_h2_disk(rng, w.radius, n)
        if w.center is not None:
            pts = move_from_origin(space, np.asarray(w.center), pts)
        pts = renormalize(space, pts)
    else:
        raise UnsupportedOperationError("Ball windows are not supported in H2xR; use a Cylinder window")
    return pts[0] if size is None else pts


# -- covering nets -------------------------------------------------------------


@lru_cache(maxsize=64)
def _origin_net(space: Space, radius: float, mesh: float) -> np.ndarray:
    net = _origin_net_unsorted(space, radius, mesh)
    # outermost points first: coverage checks fail fastest at the rim
    order = np.argsort(-np.asarray(distance(space, space.origin(), net)), kind="stable")
    net = np.ascontiguousarray(net[order])
    net.setflags(write=False)
    return net


def _origin_net_unsorted(space: Space, radius: float, mesh: float) -> np.ndarray:
    if space.kind is SpaceKind.EUCLIDEAN:
        d = space.dim
        step = 2.0 * mesh / math.sqrt(d)  # cubic lattice covering radius = mesh
        k = math.ceil((radius + mesh) / step)
        axis = np.arange(-k, k + 1) * step
        grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
        keep = np.sqrt(np.sum(grid**2, axis=1)) <= radius + mesh
        return grid[keep]

    h_mesh = mesh if space.kind is SpaceKind.HYPERBOLIC2 else mesh / math.sqrt(2.0)
    rings = [np.array([[0.0, 0.0, 1.0]])]
    n_rings = math.ceil(radius / h_mesh)
    for k in range(1, n_rings + 1):
        rk = k * h_mesh
        m = max(3, math.ceil(2.0 * math.pi * math.sinh(rk) / h_mesh))
        theta = np.arange(m) * (2.0 * math.pi / m)
        rings.append(h2_polar(np.full(m, rk), theta))
    disk = np.concatenate(rings)
    if space.kind is SpaceKind.HYPERBOLIC2:
        return disk
    k = math.ceil(radius / (2.0 * h_mesh))
    heights = np.arange(-k, k + 1) * (2.0 * h_mesh)
    net = np.concatenate([np.column_stack([disk, np.full(len(disk), h)]) for h in heights])
    keep = np.asarray(distance(space, space.origin(), net)) <= radius + mesh
    return net[keep]


def covering_net(space: Space, center, radius: float, mesh: float) -> np.ndarray:
    """Deterministic finite set whose ``mesh``-neighbourhood contains ``S(center, radius)``.

    Every point of the ball lies within ``mesh`` of some net point and every
    net point lies within ``radius + mesh`` of ``center``.
    """
    if radius <= 0 or mesh <= 0:
        raise InvalidArgumentError("covering_net needs radius > 0 and mesh > 0")
    net = _origin_net(space, float(radius), float(mesh))
    return move_from_origin(space, center, net)
