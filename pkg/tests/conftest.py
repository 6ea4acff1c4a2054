import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from contperc.geometry import Ball, Cylinder, Space, h2_polar
from contperc.pointprocess import MarkedConfiguration, sample_configuration

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.differing_executors],
)
settings.load_profile("repo")

SPACES = {
    "euclidean": Space.euclidean(2),
    "h2": Space.hyperbolic2(),
    "h2xr": Space.h2xr(),
}


@pytest.fixture(params=list(SPACES), ids=list(SPACES))
def space(request):
    return SPACES[request.param]


coord = st.floats(-6.0, 6.0, allow_nan=False)
radius = st.floats(0.0, 6.0, allow_nan=False)
angle = st.floats(0.0, 2 * math.pi, allow_nan=False)


@st.composite
def points(draw, space: Space):
    if space.kind.value == "euclidean":
        return np.array([draw(coord) for _ in range(space.dim)])
    p = h2_polar(draw(radius), draw(angle))
    if space.kind.value == "h2xr":
        p = np.append(p, draw(coord))
    return p


def random_points(space: Space, n: int, rng: np.random.Generator, spread: float = 4.0) -> np.ndarray:
    """Roughly uniform points in a region of size ``spread`` (not a model sampler)."""
    if space.kind.value == "euclidean":
        return rng.uniform(-spread, spread, size=(n, space.dim))
    p = h2_polar(rng.uniform(0, spread, n), rng.uniform(0, 2 * math.pi, n))
    if space.kind.value == "h2xr":
        p = np.column_stack([p, rng.uniform(-spread, spread, n)])
    return p


SMALL_WINDOWS = {"euclidean": Ball(5.0), "h2": Ball(2.5), "h2xr": Cylinder(1.5, 2.0)}
# intensities that leave several clusters in the small windows
SPARSE = {"euclidean": 0.8, "h2": 0.3, "h2xr": 0.3}


def small_config(space: Space, seed: int, lam_max: float = 1.0, cap: int = 50) -> MarkedConfiguration:
    """At most ``cap`` points from a model sample (the oracles are quadratic or worse)."""
    window = SMALL_WINDOWS[space.kind.value]
    intensity = lam_max * (0.6 if space.kind.value == "euclidean" else 1.0)
    c = sample_configuration(space, window, intensity, seed, (77,))
    k = min(len(c), cap)
    return MarkedConfiguration(space, window, c.lambda_max, c.locations[:k].copy(), c.marks[:k].copy(), seed)


# -- acceptance summary --------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _CRITERIA[number] = (title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}" + (f"  [{detail}]" if detail else ""))
