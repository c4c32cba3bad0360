import math

import numpy as np
import pytest

from critset import criticality, dynamics, geometry
from critset.criticality import HomothetyVerdict, MisiurewiczKind
from critset.errors import Escaped
from conftest import random_matrices

SHEAR = [[1.0, 1.0], [0.0, 1.0]]


@pytest.mark.parametrize("N", [1, 3, 6])
def test_score_of_diagonal_saddle_has_closed_form(linear_saddle, N):
    report = criticality.criticality_score(linear_saddle, [0.3, -0.4], N)
    assert report.score == pytest.approx(-math.log(math.cosh(2 * N * math.log(2.0))), rel=1e-9)
    assert report.best_direction == pytest.approx(math.pi / 4, abs=1e-6)
    assert report.forward_score == pytest.approx(0.0, abs=1e-12)
    assert report.backward_score == pytest.approx(0.0, abs=1e-12)
    assert len(report.profile) == 2 * N + 1
    assert report.profile[N] == 0.0


@pytest.mark.parametrize(
    "matrix",
    [geometry.rotation(0.9), 2.0 * np.eye(2), SHEAR],
    ids=["rotation", "homothety", "shear"],
)
def test_conformal_and_parabolic_maps_score_zero(matrix):
    map_def = dynamics.MapDef.linear(matrix)
    report = criticality.criticality_score(map_def, [0.1, 0.1], 8)
    assert report.score == pytest.approx(0.0, abs=1e-9)


def test_shear_critical_direction_is_its_eigendirection():
    report = criticality.criticality_score(dynamics.MapDef.linear(SHEAR), [0.1, 0.1], 8)
    assert geometry.rp1_distance(report.best_direction, 0.0) < 1e-6


def test_henon_saddle_is_not_critical(henon, saddle_plus):
    report = criticality.criticality_score(henon, saddle_plus, 10)
    assert report.score < -1.0
    longer = criticality.criticality_score(henon, saddle_plus, 20)
    assert longer.score < report.score


def test_score_raises_when_window_escapes(henon):
    with pytest.raises(Escaped):
        criticality.criticality_score(henon, [10.0, 0.0], 5)


def test_rotation_has_homothety_like_witness():
    map_def = dynamics.MapDef.linear(geometry.rotation(0.4))
    report = criticality.far_from_homotheties(map_def, [1.0, 0.0], 0.1, 10)
    assert report.verdict is HomothetyVerdict.HOMOTHETY_LIKE_WITNESS_FOUND
    assert report.witness_direction is not None
    assert report.margin == pytest.approx(math.log(1.1), rel=1e-6)


def test_saddle_is_far_from_homotheties(linear_saddle):
    report = criticality.far_from_homotheties(linear_saddle, [1.0, 0.0], 0.1, 10)
    assert report.verdict is HomothetyVerdict.FAR_AT_THIS_HORIZON
    assert report.witness_direction is None
    assert report.margin < 0.0


def test_far_from_homotheties_rejects_bad_delta(linear_saddle):
    with pytest.raises(ValueError):
        criticality.far_from_homotheties(linear_saddle, [1.0, 0.0], 1.5, 10)


def test_horseshoe_has_no_critical_candidates(henon):
    samples = dynamics.periodic_samples(henon, 4)
    result = criticality.scan(henon, samples, 10, threshold=-0.5)
    assert result.candidates == []
    assert result.skipped == 0
    assert all(r.score < -0.5 for r in result.reports)


def test_scan_skips_escaping_samples(henon, saddle_plus):
    result = criticality.scan(henon, [saddle_plus, np.array([10.0, 0.0])], 5)
    assert result.skipped == 1
    assert result.reports[1] is None


def test_scan_keeps_shear_points_sorted():
    map_def = dynamics.MapDef.linear(SHEAR)
    samples = [np.array([0.5, 0.2]), np.array([-0.3, 0.1])]
    candidates = criticality.critical_scan(map_def, samples, 5, threads=2)
    assert [c.point.tolist() for c in candidates] == [[-0.3, 0.1], [0.5, 0.2]]
    for c in candidates:
        assert c.window == 5
        assert geometry.rp1_distance(c.direction, 0.0) < 1e-6
        assert [n for n, _ in c.alignment_slopes] == [1, 2, 3, 4, 5]


def test_recurrence_of_periodic_point_is_exact(henon):
    cycle = dynamics.horseshoe_cycles(henon, 3)[0]
    estimate = criticality.recurrence_rate(henon, cycle, 7)
    assert estimate.exact_return
    assert estimate.exact_return_at == 3
    assert estimate.argmin not in (3, 6)


def test_recurrence_rate_of_rotation():
    alpha = math.sqrt(2.0)
    map_def = dynamics.MapDef.linear(geometry.rotation(alpha))
    estimate = criticality.recurrence_rate(map_def, [1.0, 0.0], 20)
    expected = min(math.log(2 * abs(math.sin(k * alpha / 2))) / k for k in range(1, 21))
    assert estimate.rate == pytest.approx(expected, rel=1e-9)
    assert not estimate.exact_return


def test_recurrence_raises_on_escape(henon, saddle_plus):
    with pytest.raises(Escaped):
        criticality.recurrence_rate(henon, saddle_plus.location + 1e-3, 30)


def test_misiurewicz_check_verdicts(linear_saddle, henon):
    [verdict] = criticality.misiurewicz_check(linear_saddle, [np.array([1.0, 1.0])], 0.1, 5)
    assert verdict.kind is MisiurewiczKind.MISIUREWICZ_AT_HORIZON
    assert verdict.exit_forward == 1 and verdict.exit_backward == 1

    rotation = dynamics.MapDef.linear(geometry.rotation(2 * math.pi / 5))
    [verdict] = criticality.misiurewicz_check(rotation, [np.array([1.0, 0.0])], 0.1, 10)
    assert verdict.kind is MisiurewiczKind.RECURRENCE_WITNESS
    assert verdict.k == 5 and verdict.sign == 1

    [verdict] = criticality.misiurewicz_check(henon, [np.array([10.0, 0.0])], 0.1, 5)
    assert verdict.kind is MisiurewiczKind.ESCAPED_ORBIT
    assert verdict.k == 3


def test_score_never_increases_with_the_window(henon, horseshoe_samples, rng):
    for i in rng.choice(len(horseshoe_samples), size=8, replace=False):
        sample = horseshoe_samples[i]
        scores = [criticality.criticality_score(henon, sample, N).score for N in range(1, 7)]
        assert all(later <= earlier + 1e-6 for earlier, later in zip(scores, scores[1:]))


def test_score_never_increases_with_the_window_for_random_saddles(rng):
    saddles = [M for M in random_matrices(rng, 40) if geometry.classify_linear(M) is geometry.LinearClass.HYPERBOLIC_SADDLE]
    assert saddles
    for M in saddles[:10]:
        map_def = dynamics.MapDef.linear(M)
        scores = [criticality.criticality_score(map_def, [0.0, 0.0], N).score for N in range(1, 6)]
        assert all(later <= earlier + 1e-6 for earlier, later in zip(scores, scores[1:]))


def test_shear_contracted_directions_align_at_rate_one_over_n():
    orb = dynamics.orbit(dynamics.MapDef.linear(SHEAR), [0.1, 0.1], 0, 50)
    slopes = dict(criticality.alignment_slopes(orb, 0.0, 50))
    for n in range(5, 51):
        assert slopes[n] <= 2.0 / n


@pytest.mark.parametrize(
    "matrix",
    [geometry.rotation(0.9), 1.2 * np.eye(2), 1.2 * geometry.rotation(0.7)],
    ids=["rotation", "homothety", "spiral"],
)
def test_conformal_maps_are_critical_and_homothety_like_everywhere(matrix, rng):
    map_def = dynamics.MapDef.linear(matrix)
    for p in rng.uniform(-1.0, 1.0, size=(3, 2)):
        for N in (1, 10, 50):
            assert criticality.criticality_score(map_def, p, N).score == pytest.approx(0.0, abs=1e-9)
        for delta in (0.05, 0.1, 0.3):
            report = criticality.far_from_homotheties(map_def, p, delta, 20)
            assert report.verdict is HomothetyVerdict.HOMOTHETY_LIKE_WITNESS_FOUND


def test_near_return_is_flagged_as_exponential_recurrence():
    rotation = dynamics.MapDef.linear(geometry.rotation(2 * math.pi / 5 + 1e-6))
    estimate = criticality.recurrence_rate(rotation, [1.0, 0.0], 7)
    assert estimate.argmin == 5
    assert estimate.rate == pytest.approx(math.log(2 * math.sin(2.5e-6)) / 5, rel=1e-6)
    assert estimate.rate < 0.0
    assert not estimate.exact_return


def test_shear_candidates_are_misiurewicz_at_horizon():
    map_def = dynamics.MapDef.linear(SHEAR)
    samples = [np.array([0.5, 0.2]), np.array([-0.3, 0.1])]
    candidates = criticality.critical_scan(map_def, samples, 5)
    verdicts = criticality.misiurewicz_check(map_def, candidates, 0.05, 10)
    assert [v.kind for v in verdicts] == [MisiurewiczKind.MISIUREWICZ_AT_HORIZON] * 2
    assert all(v.exit_forward == 1 and v.exit_backward == 1 for v in verdicts)
