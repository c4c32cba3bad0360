import math

import numpy as np
import pytest

from critset import cocycle, dynamics, geometry
from critset.errors import EmptyHypothesis, HypothesisFailed
from conftest import B


def test_trace_of_diagonal_saddle(linear_saddle):
    tr = cocycle.trace(linear_saddle, [0.1, 0.2], 0.0, 5, 5)
    assert tr.lo == -5 and tr.hi == 5
    for n in range(-5, 6):
        assert tr.at(n) == pytest.approx(n * math.log(0.25))
        assert tr.direction(n) == pytest.approx(0.0)
    assert tr.escaped is None


def test_trace_is_additive_along_the_orbit(henon, horseshoe_samples):
    p = horseshoe_samples[-1].location
    v = 0.7
    tr = cocycle.trace(henon, p, v, 0, 8)
    q = henon.forward(henon.forward(henon.forward(p)))
    tail = cocycle.trace(henon, q, tr.direction(3), 0, 5)
    for m in range(6):
        assert tr.at(3 + m) == pytest.approx(tr.at(3) + tail.at(m), abs=1e-9)


def test_trace_matches_matrix_product(henon, horseshoe_samples, rng):
    p = horseshoe_samples[-3].location
    orb = dynamics.orbit(henon, p, 0, 4)
    D = dynamics.ordered_product(orb.jacobians[:4])
    for v in rng.uniform(0.0, math.pi, 10):
        tr = cocycle.trace(henon, p, v, 0, 4)
        assert tr.at(4) == pytest.approx(math.log(geometry.g_step(D, v)), rel=1e-7, abs=1e-6)


def test_lyapunov_of_linear_saddle(linear_saddle):
    est = cocycle.lyapunov(linear_saddle, [0.0, 0.0], 40)
    assert est.lambda_plus == pytest.approx(math.log(2.0))
    assert est.lambda_minus == pytest.approx(-math.log(2.0))


def test_lyapunov_of_henon_saddle(henon, saddle_plus):
    unstable = max(abs(z) for z in saddle_plus.eigenvalues)
    est = cocycle.lyapunov(henon, saddle_plus, 200)
    assert est.lambda_plus == pytest.approx(math.log(unstable), abs=1e-6)
    assert est.lambda_plus + est.lambda_minus == pytest.approx(math.log(B))


def test_lyapunov_transient_must_leave_steps_to_average(linear_saddle):
    with pytest.raises(ValueError, match="transient"):
        cocycle.lyapunov(linear_saddle, [0.0, 0.0], 10, transient=10)
    est = cocycle.lyapunov(linear_saddle, [0.0, 0.0], 10, transient=0)
    assert est.lambda_plus == pytest.approx(math.log(2.0))


def _brute_force_pliss(seq, gamma1):
    times = []
    for t in range(len(seq)):
        product = 1.0
        ok = True
        for k in range(t + 1, len(seq)):
            product *= seq[k]
            if not product < gamma1 ** (k - t):
                ok = False
                break
        if ok:
            times.append(t)
    return times


def test_pliss_times_match_brute_force(rng):
    gamma0, gamma1 = 0.8, 0.95
    for _ in range(20):
        seq = np.exp(rng.uniform(-1.0, 0.6, size=60))
        if not np.prod(seq) < gamma0 ** len(seq):
            continue
        result = cocycle.pliss_times(seq, gamma0, gamma1)
        assert result.times == _brute_force_pliss(seq, gamma1)


def test_pliss_density_meets_guaranteed_bound(rng):
    gamma0, gamma1, bound_a = 0.7, 0.9, 3.0
    theta = cocycle.pliss_density_bound(gamma0, gamma1, bound_a)
    assert 0.0 < theta < 1.0
    checked = 0
    for _ in range(50):
        n = 200
        seq = np.exp(rng.uniform(-math.log(bound_a) * 0.99, math.log(bound_a) * 0.2, size=n))
        if not np.prod(seq) < gamma0**n:
            continue
        result = cocycle.pliss_times(seq, gamma0, gamma1, bound_a)
        assert result.density * n >= theta * n - 1
        checked += 1
    assert checked > 0


def test_pliss_rejects_bad_input():
    with pytest.raises(EmptyHypothesis):
        cocycle.pliss_times([1.0, 1.0, 1.0], 0.5, 0.9)
    with pytest.raises(ValueError):
        cocycle.pliss_times([0.5, -0.1], 0.5, 0.9)
    with pytest.raises(ValueError):
        cocycle.pliss_times([0.1, 0.1], 0.9, 0.5)
    with pytest.raises(ValueError):
        cocycle.pliss_times([0.1, 0.1], 0.5, 0.9, bound_a=2.0)


def test_pliss_last_index_is_always_a_time():
    result = cocycle.pliss_times([0.5, 0.5, 0.5, 0.5], 0.8, 0.9)
    assert result.times[-1] == 3
    assert result.times == [0, 1, 2, 3]
    assert result.density == 1.0


@pytest.mark.parametrize(
    ("seq", "K"),
    [
        ([2.0, 3.0, 0.5], 0),
        ([0.5, 0.5, 8.0], 2),
        ([0.5, 4.0, 0.125, 16.0], 3),
        ([1.0, 1.0, 1.0], 1),
    ],
)
def test_cumulative_min_split(seq, K):
    assert cocycle.cumulative_min_split(seq) == K
    assert cocycle.split_holds(np.log(seq), K)


def test_cumulative_min_split_random(rng):
    for _ in range(50):
        logs = rng.normal(size=30)
        logs[-1] += max(0.0, -logs.sum()) + 0.01
        K = cocycle.cumulative_min_split(np.exp(logs))
        C = np.concatenate([[0.0], np.cumsum(logs)])
        assert np.all(C[K + 1 :] - C[K] >= -1e-9)
        assert np.all(C[:K] - C[K] >= -1e-9)


def test_cumulative_min_split_needs_product_at_least_one():
    with pytest.raises(HypothesisFailed):
        cocycle.cumulative_min_split([0.5, 1.5])
