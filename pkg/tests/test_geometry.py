import math

import numpy as np
import pytest

from critset import geometry
from critset.errors import ConformalMatrix, SingularMatrix
from conftest import random_matrices


def test_g_step_is_fiber_derivative_of_transport(rng):
    h = 1e-6
    for M in random_matrices(rng, 300):
        v = rng.uniform(0.0, math.pi)
        forward = geometry.g_transport(M, v + h)
        back = geometry.g_transport(M, v - h)
        diff = (forward - back + math.pi / 2) % math.pi - math.pi / 2
        assert abs(diff) / (2 * h) == pytest.approx(geometry.g_step(M, v), rel=1e-5)


def test_g_step_of_diagonal_matrix():
    M = geometry.diag(2.0, 0.5)
    assert geometry.g_step(M, 0.0) == pytest.approx(0.25)
    assert geometry.g_step(M, math.pi / 2) == pytest.approx(4.0)
    assert geometry.g_transport(M, math.pi / 4) == pytest.approx(math.atan(0.25))


def test_singular_pair_identities(rng):
    for M in random_matrices(rng, 200):
        try:
            pair = geometry.singular_pair(M)
        except ConformalMatrix:
            continue
        assert pair.g_e * pair.g_f == pytest.approx(1.0, abs=1e-10)
        assert geometry.rp1_distance(pair.e, pair.f) == pytest.approx(math.pi / 2, abs=1e-12)
        image_e = M @ geometry.unit(pair.e)
        image_f = M @ geometry.unit(pair.f)
        cos = image_e @ image_f / (np.linalg.norm(image_e) * np.linalg.norm(image_f))
        assert abs(cos) < 1e-9
        assert geometry.g_step(M, pair.e) == pytest.approx(pair.g_e, rel=1e-9)
        for w in rng.uniform(0.0, math.pi, 50):
            g = geometry.g_step(M, w)
            assert 1.0 / pair.g_e * (1 - 1e-12) <= g <= pair.g_e * (1 + 1e-12)


def test_singular_pair_of_saddle():
    pair = geometry.singular_pair(geometry.diag(2.0, 0.5))
    assert pair.f == pytest.approx(0.0)
    assert pair.e == pytest.approx(math.pi / 2)
    assert pair.g_e == pytest.approx(4.0)


def test_conformal_matrices_have_no_singular_pair():
    with pytest.raises(ConformalMatrix):
        geometry.singular_pair(geometry.rotation(0.7))
    with pytest.raises(ConformalMatrix):
        geometry.singular_pair(3.0 * np.eye(2))


def test_singular_matrix_rejected():
    with pytest.raises(SingularMatrix):
        geometry.g_step(np.array([[1.0, 2.0], [2.0, 4.0]]), 0.3)
    with pytest.raises(SingularMatrix):
        geometry.checked_det(np.diag([1e-200, 1e-200]))


@pytest.mark.parametrize(
    ("matrix", "expected"),
    [
        (geometry.diag(2.0, 0.5), geometry.LinearClass.HYPERBOLIC_SADDLE),
        ([[1.0, 1.0], [0.0, 1.0]], geometry.LinearClass.PARABOLIC),
        (2.0 * np.eye(2), geometry.LinearClass.HOMOTHETY),
        (geometry.rotation(0.4), geometry.LinearClass.ELLIPTIC),
        (geometry.diag(2.0, 3.0), geometry.LinearClass.NODE_TWO_REAL_EIGEN),
        (geometry.diag(0.2, 0.5), geometry.LinearClass.NODE_TWO_REAL_EIGEN),
    ],
)
def test_classify_linear(matrix, expected):
    assert geometry.classify_linear(np.asarray(matrix, dtype=float)) is expected


def test_angles_live_on_the_projective_line():
    assert geometry.normalize_angle(-0.1) == pytest.approx(math.pi - 0.1)
    assert geometry.normalize_angle(math.pi) == 0.0
    assert geometry.rp1_distance(0.1, math.pi - 0.1) == pytest.approx(0.2)
    assert geometry.angle_of([-1.0, 0.0]) == 0.0
    assert geometry.slope(0.0, math.pi / 4) == pytest.approx(1.0)
    assert geometry.slope(0.0, math.pi / 2) == math.inf


def test_eigen_directions():
    pairs = geometry.eigen_directions(geometry.diag(0.5, 2.0))
    assert pairs[0][0] == pytest.approx(2.0)
    assert pairs[0][1] == pytest.approx(math.pi / 2)
    assert pairs[1][0] == pytest.approx(0.5)
    assert pairs[1][1] == pytest.approx(0.0)
    assert geometry.eigen_directions(geometry.rotation(0.5)) == []


@pytest.mark.parametrize(
    "matrix",
    [geometry.diag(2.0, 0.5), [[1.0, 1.0], [0.0, 1.0]], 2.0 * np.eye(2), geometry.rotation(0.4), geometry.diag(2.0, 3.0)],
)
def test_classify_linear_is_invariant_under_rotation_conjugacy(matrix, rng):
    M = np.asarray(matrix, dtype=float)
    expected = geometry.classify_linear(M)
    for theta in rng.uniform(0.0, 2 * math.pi, 50):
        R = geometry.rotation(theta)
        assert geometry.classify_linear(R @ M @ R.T) is expected


def test_classify_linear_of_random_matrices_survives_conjugacy(rng):
    for M in random_matrices(rng, 200):
        expected = geometry.classify_linear(M)
        R = geometry.rotation(rng.uniform(0.0, 2 * math.pi))
        assert geometry.classify_linear(R @ M @ R.T) is expected
