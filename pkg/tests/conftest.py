import math
from pathlib import Path

import numpy as np
import pytest

from morseindex.geodesics import integrate_geodesic
from morseindex.geometry import Submanifold, euclidean, minkowski, sphere

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def great_circle(length, dim=2):
    """Unit-speed equator geodesic of the unit sphere, starting at phi = 0."""
    p0 = [math.pi / 2] * (dim - 1) + [0.0]
    v0 = [0.0] * (dim - 1) + [1.0]
    return integrate_geodesic(sphere(dim), p0, v0, [0.0, length])


def unit_circle_P():
    return Submanifold.circle(euclidean(2), (0.0, 0.0), 1.0)


def inward_from_circle(length):
    return integrate_geodesic(euclidean(2), [1.0, 0.0], [-1.0, 0.0], [0.0, length])


@pytest.fixture(scope="session")
def line():
    return integrate_geodesic(euclidean(2), [0.0, 0.0], [1.0, 0.0], [0.0, 1.0])


@pytest.fixture(scope="session")
def s2_15():
    return great_circle(1.5 * math.pi)


@pytest.fixture(scope="session")
def s2_25():
    return great_circle(2.5 * math.pi)


@pytest.fixture(scope="session")
def s2_09():
    return great_circle(0.9 * math.pi)


@pytest.fixture(scope="session")
def s3_15():
    return great_circle(1.5 * math.pi, dim=3)


@pytest.fixture(scope="session")
def null_line():
    return integrate_geodesic(minkowski(2), [0.0, 0.0], [1.0, 1.0], [0.0, 1.0])


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
