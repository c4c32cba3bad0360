import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from critset import dynamics, manifolds
from critset.errors import BracketInvalid, NonInvertible, NotASaddle, Undetermined
from critset.manifolds import BranchKind, CrossingKind, ManifoldBranch, Side
from conftest import A, B


@pytest.fixture
def origin_saddle(linear_saddle):
    return dynamics.periodic_point_from_cycle(linear_saddle, [[0.0, 0.0]])


def test_linear_unstable_branch_is_the_x_axis(linear_saddle, origin_saddle):
    branch = manifolds.grow_branch(linear_saddle, origin_saddle, BranchKind.UNSTABLE, Side.PLUS, 10.0)
    P = branch.polyline
    assert branch.arclength == pytest.approx(10.0)
    assert np.all(P[:, 1] == 0.0)
    assert P[0, 0] == pytest.approx(1e-5)
    assert np.all(np.diff(P[:, 0]) > 0.0)
    assert np.max(np.diff(P[:, 0])) <= branch.max_gap * (1 + 1e-9)
    assert len(branch.breaks) == 0
    assert not branch.reaches_boundary


def test_linear_stable_branch_grows_down(linear_saddle, origin_saddle):
    branch = manifolds.grow_branch(linear_saddle, origin_saddle, "Stable", "Minus", 5.0)
    P = branch.polyline
    assert branch.kind is BranchKind.STABLE and branch.side is Side.MINUS
    assert np.all(np.abs(P[:, 0]) < 1e-15)
    assert np.all(np.diff(P[:, 1]) < 0.0)
    assert branch.arclength == pytest.approx(5.0)


def test_branch_evaluate_reproduces_vertices(linear_saddle, origin_saddle):
    branch = manifolds.grow_branch(linear_saddle, origin_saddle, BranchKind.UNSTABLE, Side.MINUS, 3.0)
    for k in range(0, len(branch.polyline) - 1, 37):
        point, tangent = branch.evaluate(branch.params[k])
        assert point == pytest.approx(branch.polyline[k], abs=1e-12)
        assert tangent[0] < 0.0 and tangent[1] == 0.0


def test_growth_needs_a_saddle():
    rotation = dynamics.MapDef.linear([[0.0, -1.0], [1.0, 0.0]])
    center = dynamics.periodic_point_from_cycle(rotation, [[0.0, 0.0]])
    with pytest.raises(NotASaddle):
        manifolds.grow_branch(rotation, center, BranchKind.UNSTABLE, Side.PLUS, 1.0)


def test_unbounded_budget_needs_max_gap(linear_saddle, origin_saddle):
    with pytest.raises(ValueError):
        manifolds.grow_branch(linear_saddle, origin_saddle, BranchKind.UNSTABLE, Side.PLUS, math.inf, max_levels=5)
    branch = manifolds.grow_branch(
        linear_saddle, origin_saddle, BranchKind.UNSTABLE, Side.PLUS, math.inf, max_gap=0.1, max_levels=5
    )
    assert branch.levels == 5
    assert branch.polyline[-1, 0] == pytest.approx(1e-5 * 2**5)


@pytest.mark.parametrize("side", [Side.PLUS, Side.MINUS])
def test_henon_stable_branches_converge_to_the_saddle(henon, saddle_plus, side):
    branch = manifolds.grow_branch(henon, saddle_plus, BranchKind.STABLE, side, 5.0)
    P = branch.polyline[branch.params < 4.0]
    assert len(P) > 0
    for _ in range(6):
        P = henon.forward(P)
    assert np.max(np.linalg.norm(P - saddle_plus.location, axis=1)) < 1e-5


def _distance_to_curve(branch, points, guesses):
    feet = [manifolds._project(branch, x, u)[1] for x, u in zip(points, guesses)]
    return np.max(np.linalg.norm(points - np.array(feet), axis=1))


@pytest.mark.parametrize("kind", [BranchKind.UNSTABLE, BranchKind.STABLE])
@pytest.mark.parametrize("side", [Side.PLUS, Side.MINUS])
def test_henon_branches_are_invariant(henon, saddle_plus, kind, side):
    branch = manifolds.grow_branch(henon, saddle_plus, kind, side, 5.0)
    inner = branch.params < branch.levels - 1
    images = branch.generator.forward(branch.polyline[inner])
    assert _distance_to_curve(branch, images, branch.params[inner] + 1.0) < 1e-9


@pytest.mark.parametrize("kind", [BranchKind.UNSTABLE, BranchKind.STABLE])
def test_henon_branches_do_not_depend_on_the_seed(henon, saddle_plus, kind):
    coarse = manifolds.grow_branch(henon, saddle_plus, kind, Side.MINUS, 5.0)
    fine = manifolds.grow_branch(henon, saddle_plus, kind, Side.MINUS, 5.0, seed_length=1e-7)
    points = coarse.polyline[coarse.params < coarse.levels - 1]
    nearest = cKDTree(fine.polyline).query(points)[1]
    assert _distance_to_curve(fine, points, fine.params[nearest]) < 1e-7


def test_henon_branches_stay_in_the_trapping_box(henon, saddle_plus):
    box = dynamics.trapping_box(henon)
    for kind in BranchKind:
        for side in Side:
            branch = manifolds.grow_branch(henon, saddle_plus, kind, side, 10.0)
            assert np.all(box.contains(branch.polyline))
            assert branch.arclength <= 10.0 * (1 + 1e-9)


def _xaxis(lo=-1.0, hi=1.0, n=11):
    return ManifoldBranch.from_polyline(np.column_stack([np.linspace(lo, hi, n), np.zeros(n)]), BranchKind.STABLE)


def _graph(fn, n=200):
    x = np.linspace(-1.0, 1.0, n)
    return ManifoldBranch.from_polyline(np.column_stack([x, fn(x)]))


def test_transversal_intersections_of_polylines():
    parabola = _graph(lambda x: x * x - 0.25)
    events = manifolds.find_intersections(parabola, _xaxis())
    assert len(events) == 2
    assert events[0].point == pytest.approx([-0.5, 0.0], abs=1e-4)
    assert events[1].point == pytest.approx([0.5, 0.0], abs=1e-4)
    for e in events:
        assert e.angle == pytest.approx(math.pi / 4, abs=0.02)
        assert e.residual < 1e-9


def test_low_angle_crossing_is_found():
    cubic = _graph(lambda x: x**3)
    [event] = manifolds.find_intersections(cubic, _xaxis())
    assert event.point == pytest.approx([0.0, 0.0], abs=1e-9)
    assert event.angle < 1e-3


def test_disjoint_branches_do_not_intersect():
    lifted = _graph(lambda x: x * x + 0.5)
    assert manifolds.find_intersections(lifted, _xaxis()) == []


def test_classify_crossing():
    axis = _xaxis()
    cubic = _graph(lambda x: x**3)
    [event] = manifolds.find_intersections(cubic, axis)
    assert manifolds.classify_crossing(axis, cubic, event, 0.1) is CrossingKind.CROSSING

    touching = _graph(lambda x: x * x, n=201)
    assert manifolds.classify_crossing(axis, touching, [0.0, 0.0], 0.1) is CrossingKind.ONE_SIDED

    along = _xaxis(-0.5, 0.5, 21)
    assert manifolds.classify_crossing(axis, along, [0.0, 0.0], 0.1) is CrossingKind.TANGENTIAL


def test_classify_crossing_needs_enough_stable_branch():
    short = _xaxis(-0.1, 0.1, 5)
    with pytest.raises(Undetermined):
        manifolds.classify_crossing(short, _graph(lambda x: x**3), [0.0, 0.0], 0.1)


def test_find_intersections_is_symmetric():
    parabola = _graph(lambda x: x * x - 0.25)
    axis = _xaxis()
    forward = manifolds.find_intersections(parabola, axis)
    reverse = manifolds.find_intersections(axis, parabola)
    assert len(forward) == len(reverse) == 2
    for e, r in zip(forward, reverse):
        assert e.point == pytest.approx(r.point, abs=1e-12)
        assert e.angle == pytest.approx(r.angle, abs=1e-12)
        assert (e.param_a, e.param_b) == pytest.approx((r.param_b, r.param_a), abs=1e-9)


def test_exact_branch_matches_grown_branch(henon, saddle_plus):
    grown = manifolds.grow_branch(henon, saddle_plus, BranchKind.UNSTABLE, Side.MINUS, 10.0)
    exact = manifolds.exact_branch(henon, saddle_plus, BranchKind.UNSTABLE, Side.MINUS, grown.levels)
    assert exact.levels == grown.levels
    for k in range(0, len(grown.polyline) - 1, 53):
        assert exact.evaluate(grown.params[k])[0] == pytest.approx(grown.polyline[k], abs=1e-12)


def _lobe(first, second):
    return manifolds._Lobe(0, 1, (first, second), -1.0)


def test_lobe_height_of_a_parabola_dipping_below_an_axis():
    parabola = _graph(lambda x: x * x - 0.25, n=201)
    axis = _xaxis()
    lobe = _lobe((50.0, 2.5), (150.0, 7.5))
    gap = manifolds._lobe_gap(parabola, axis, lobe)
    assert gap[0] == pytest.approx(0.25, abs=1e-4)
    assert parabola.evaluate(gap[1])[0] == pytest.approx([0.0, -0.25], abs=1e-3)
    (s1, u1), (s2, u2) = manifolds._gap_roots(parabola, axis, lobe, gap)
    assert parabola.evaluate(s1)[0] == pytest.approx([-0.5, 0.0], abs=1e-4)
    assert parabola.evaluate(s2)[0] == pytest.approx([0.5, 0.0], abs=1e-4)
    assert (u1, u2) == pytest.approx((2.5, 7.5), abs=1e-3)


def test_lobe_height_is_negative_once_the_lobe_has_closed():
    lifted = _graph(lambda x: x * x + 0.1, n=201)
    gap = manifolds._lobe_gap(lifted, _xaxis(), _lobe((50.0, 2.5), (150.0, 7.5)))
    assert gap[0] == pytest.approx(-0.1, abs=1e-4)


@pytest.fixture(scope="module")
def horseshoe_lobes():
    henon = dynamics.MapDef.henon(A, B)
    saddle = manifolds.outer_saddle(henon)
    branches = manifolds._grow_all(henon, saddle, (20.0, 20.0), manifolds.CURVATURE_TOL, 2)
    lobes, events = manifolds._lobes(saddle, branches, manifolds.REFINE_TOL, manifolds.SADDLE_EXCLUSION)
    return branches, lobes, events


def test_horseshoe_has_transversal_homoclinic_points(horseshoe_lobes):
    branches, lobes, events = horseshoe_lobes
    assert events and lobes
    for event in events:
        assert event.residual < 1e-8
        assert event.angle > 0.05
    contacts = {(e.param_a, e.param_b) for e in events}
    for lobe in lobes:
        assert branches[lobe.unstable].kind is BranchKind.UNSTABLE
        assert branches[lobe.stable].kind is BranchKind.STABLE
        (s1, u1), (s2, u2) = lobe.roots
        assert s1 < s2 and math.floor(u1) == math.floor(u2)
        assert {(s1, u1), (s2, u2)} <= contacts
        assert lobe.sigma in (-1.0, 1.0)


def test_lobes_stay_open_under_a_small_parameter_change(horseshoe_lobes):
    branches, lobes, _ = horseshoe_lobes
    family = manifolds._Family(B, [br.levels for br in branches])
    opened, closed = manifolds._step(family, lobes, A, A - 0.01, manifolds.REFINE_TOL, 2)
    assert closed == []
    assert len(opened) > len(lobes) // 2
    for lobe in opened:
        U, S = family.pair(A - 0.01, lobe)
        for s, u in lobe.roots:
            assert np.linalg.norm(U.evaluate(s)[0] - S.evaluate(u)[0]) < 1e-8


def test_outer_saddle(henon, saddle_plus):
    saddle = manifolds.outer_saddle(henon)
    assert saddle.location == pytest.approx(saddle_plus.location)


def test_first_tangency_rejects_bad_input():
    with pytest.raises(NonInvertible):
        manifolds.first_tangency(0.0, (1.0, 6.0))
    with pytest.raises(BracketInvalid):
        manifolds.first_tangency(0.3, (6.0, 1.0))


def test_first_tangency_needs_a_closing_lobe():
    with pytest.raises(BracketInvalid, match="stays open"):
        manifolds.first_tangency(0.3, (5.9, 6.0), budgets=(20.0, 20.0), sweep_steps=2, threads=2)


@pytest.fixture(scope="module")
def tangency():
    return manifolds.first_tangency(0.3, (1.0, 6.0), tol=1e-6, threads=4)


@pytest.mark.slow
def test_first_tangency_for_b_03(tangency):
    lo, hi = tangency.bracket
    assert hi - lo <= 1e-6
    assert lo <= tangency.a_star <= hi
    assert 1.0 < tangency.a_star < 6.0
    assert tangency.counts["closing"] >= 1
    assert tangency.contact_gap < 1e-8
    assert tangency.tangency_angle < 1e-3
    assert tangency.pair_angle < manifolds.MAX_PAIR_ANGLE


@pytest.mark.slow
def test_tangency_orbit_has_a_critical_iterate(tangency):
    assert tangency.iterate_scores
    best = max(score for _, score in tangency.iterate_scores)
    assert dict(tangency.iterate_scores)[tangency.critical_iterate] == pytest.approx(best)
    assert tangency.critical_score >= -0.2
    assert tangency.direction_mismatch <= 0.05


@pytest.mark.slow
def test_first_tangency_is_stable_under_budget_doubling(tangency):
    doubled = manifolds.first_tangency(0.3, (1.0, 6.0), budgets=(100.0, 100.0), tol=1e-6, threads=4)
    assert doubled.a_star == pytest.approx(tangency.a_star, abs=1e-6)
