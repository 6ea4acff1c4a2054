"""Continuum percolation of the Poisson Boolean model on R^n, H2 and H2xR."""

from importlib.metadata import PackageNotFoundError, version as _version

from .errors import (
    BracketingError,
    InternalInvariantError,
    InvalidArgumentError,
    PercolationError,
    ResourceLimitError,
    UndefinedGiantError,
    UnsupportedOperationError,
)
from .geometry import Ball, Cylinder, Space, SpaceKind, ball_volume, distance, window_volume
from .pointprocess import MarkedConfiguration, load_configuration, restrict, sample_configuration
from .clusters import (
    build_intersection_graph,
    chemical_distance,
    cluster_configuration,
    connects,
    grow_component,
    label_clusters,
)
from .estimators import SweepPlan, crossing_probability, lambda_bb_estimate, lambda_c_estimate

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = [
    "Ball", "BracketingError", "Cylinder", "InternalInvariantError", "InvalidArgumentError",
    "MarkedConfiguration", "PercolationError", "ResourceLimitError", "Space", "SpaceKind", "SweepPlan",
    "UndefinedGiantError", "UnsupportedOperationError", "ball_volume", "build_intersection_graph",
    "chemical_distance", "cluster_configuration", "connects", "crossing_probability", "distance",
    "grow_component", "label_clusters", "lambda_bb_estimate", "lambda_c_estimate", "load_configuration",
    "restrict", "sample_configuration", "window_volume",
]
