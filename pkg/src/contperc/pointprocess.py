"""Poisson configurations with uniform level marks.

Every point carries a mark uniform on ``[0, lambda_max]``; the points with
``mark <= lam`` form a Poisson process of intensity ``lam``.  One sampled
configuration therefore realises the model at every intensity up to
``lambda_max`` at once, and lower intensities are always subsets of higher
ones.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import geometry as geo
from .constants import MAX_EXPECTED_POINTS
from .errors import InvalidArgumentError, ResourceLimitError
from .geometry import Ball, Cylinder, Space, SpaceKind, Window
from .io import format_float, read_keyvalue, write_keyvalue


def experiment_id(name: str) -> int:
    """Stable 32-bit id for an experiment name, used to separate random streams."""
    return zlib.crc32(name.encode("utf-8"))


def make_rng(seed: int, stream: Sequence[int] = ()) -> np.random.Generator:
    """Philox counter-based generator keyed by ``seed`` and a stream path.

    Distinct ``stream`` tuples (e.g. ``(experiment_id, grid_index, trial)``)
    give statistically independent generators, so parallel trials never share
    a stream and results do not depend on scheduling.
    """
    if not 0 <= int(seed) < 2**64:
        raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class MarkedConfiguration:
    space: Space
    window: Window
    lambda_max: float
    locations: np.ndarray
    marks: np.ndarray
    seed: int
    stream: tuple = ()

    def __post_init__(self):
        self.locations.setflags(write=False)
        self.marks.setflags(write=False)

    def __len__(self):
        return len(self.marks)


@dataclass(frozen=True, eq=False)
class ActiveSet:
    config: MarkedConfiguration
    lam: float
    active_ids: np.ndarray = field(repr=False)

    @property
    def locations(self) -> np.ndarray:
        return self.config.locations[self.active_ids]

    def __len__(self):
        return len(self.active_ids)


def sample_configuration(
    space: Space, window: Window, lambda_max: float, seed: int, stream: Sequence[int] = ()
) -> MarkedConfiguration:
    """Sample a Poisson process of intensity ``lambda_max`` in ``window`` with level marks.

    Draw order: point count, then locations, then marks.
    """
    if not (lambda_max > 0 and math.isfinite(lambda_max)):
        raise InvalidArgumentError(f"lambda_max must be positive, got {lambda_max}")
    vol = geo.window_volume(space, window)
    mean = lambda_max * vol
    if mean > MAX_EXPECTED_POINTS:
        raise ResourceLimitError(f"expected {mean:.3g} points exceeds the limit {MAX_EXPECTED_POINTS:.0g}")
    rng = make_rng(seed, stream)
    n = int(rng.poisson(mean))
    locations = geo.sample_uniform_in_window(space, window, rng, size=n)
    marks = rng.uniform(0.0, lambda_max, n)
    return MarkedConfiguration(space, window, float(lambda_max), locations, marks, int(seed), tuple(stream))


def restrict(config: MarkedConfiguration, lam: float) -> ActiveSet:
    """Points present at intensity ``lam`` (``mark <= lam``)."""
    if lam < 0:
        raise InvalidArgumentError(f"lambda must be >= 0, got {lam}")
    if lam > config.lambda_max:
        raise InvalidArgumentError(
            f"lambda={lam} exceeds lambda_max={config.lambda_max}; the coupling only extends downward"
        )
    return ActiveSet(config, float(lam), np.flatnonzero(config.marks <= lam))


# -- persistence ---------------------------------------------------------------


def window_metadata(window: Window) -> dict:
    if isinstance(window, Cylinder):
        return {"window": "cylinder", "window.h2_radius": window.h2_radius, "window.height_half": window.height_half}
    meta = {"window": "ball", "window.radius": window.radius}
    if window.center is not None:
        meta["window.center"] = ",".join(format_float(c) for c in window.center)
    return meta


def space_metadata(space: Space) -> dict:
    return {"space": space.kind.value, "space.dim": space.dim, "space.ball_radius": space.ball_radius}


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".meta")


def dump_configuration(config: MarkedConfiguration, path) -> Path:
    """Write ``id,coord0,...,mark`` rows plus a ``.meta`` key=value sidecar."""
    path = Path(path)
    d = config.space.coord_dim
    lines = [",".join(["id"] + [f"coord{k}" for k in range(d)] + ["mark"])]
    for i, (loc, mark) in enumerate(zip(config.locations, config.marks)):
        lines.append(",".join([str(i)] + [format_float(x) for x in loc] + [format_float(mark)]))
    path.write_text("\n".join(lines) + "\n")
    meta = space_metadata(config.space) | window_metadata(config.window)
    meta |= {
        "lambda_max": config.lambda_max,
        "seed": config.seed,
        "stream": ",".join(str(s) for s in config.stream),
        "points": len(config),
    }
    write_keyvalue(sidecar_path(path), meta)
    return path


def _window_from_meta(meta: dict) -> Window:
    if meta["window"] == "cylinder":
        return Cylinder(float(meta["window.h2_radius"]), float(meta["window.height_half"]))
    center = meta.get("window.center")
    center = tuple(float(c) for c in center.split(",")) if center else None
    return Ball(float(meta["window.radius"]), center)


def load_configuration(path) -> MarkedConfiguration:
    path = Path(path)
    meta = read_keyvalue(sidecar_path(path))
    space = Space(SpaceKind(meta["space"]), int(meta["space.dim"]), float(meta["space.ball_radius"]))
    d = space.coord_dim
    rows = path.read_text().splitlines()[1:]
    data = np.loadtxt(rows, delimiter=",", ndmin=2) if rows else np.empty((0, d + 2))
    stream = tuple(int(s) for s in meta.get("stream", "").split(",") if s)
    return MarkedConfiguration(
        space,
        _window_from_meta(meta),
        float(meta["lambda_max"]),
        np.ascontiguousarray(data[:, 1:1 + d]),
        np.ascontiguousarray(data[:, 1 + d]),
        int(meta["seed"]),
        stream,
    )
