import math

import numpy as np
import pytest

from critset import dynamics, geometry

A, B = 6.0, 0.3


def henon_fixed_x(a, b, sign):
    s = 1.0 + b
    return 0.5 * (s + sign * math.sqrt(s * s + 4.0 * a))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def henon():
    return dynamics.MapDef.henon(A, B)


@pytest.fixture
def saddle_plus(henon):
    x = henon_fixed_x(A, B, +1)
    return dynamics.periodic_point_from_cycle(henon, [[x, x]])


@pytest.fixture
def saddle_minus(henon):
    x = henon_fixed_x(A, B, -1)
    return dynamics.periodic_point_from_cycle(henon, [[x, x]])


@pytest.fixture
def linear_saddle():
    return dynamics.MapDef.linear(geometry.diag(2.0, 0.5))


@pytest.fixture(scope="session")
def horseshoe_samples():
    """Every point of every horseshoe cycle of period <= 6 for Henon(6, 0.3)."""
    return dynamics.periodic_samples(dynamics.MapDef.henon(A, B), 6)


def random_matrices(rng, count, min_det=0.1):
    out = []
    while len(out) < count:
        M = rng.normal(size=(2, 2))
        if abs(np.linalg.det(M)) > min_det:
            out.append(M)
    return out
