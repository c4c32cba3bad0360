"""
Criticality

Finite-window detection of critical points and directions: a point is
critical when some direction v keeps log g^n(v) >= 0 for every integer n.
At window N the max-min score

    score(x) = max_v min_{|n| <= N} log g^n_x(v)

is the computable relaxation; score >= 0 at every window is criticality.
This module also tests far-from-homothety, scans sample clouds and computes
recurrence and non-recurrence diagnostics for the candidates it finds.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from critset import cocycle, dynamics, geometry
from critset.errors import ConformalMatrix, Escaped, SingularMatrix
from critset.parallel import map_ordered

logger = logging.getLogger(__name__)

DIRECTION_GRID = 720
REFINE_TOL = 1e-6
REFINE_MIN_GAIN = 1e-12
TIE_TOL = 1e-12
DEFAULT_THRESHOLD = -0.1
EXACT_RETURN_DISTANCE = 1e-14


@dataclass
class CriticalityReport:
    base: np.ndarray
    window: tuple
    score: float
    best_direction: float
    forward_score: float
    backward_score: float
    profile: np.ndarray

    def to_dict(self):
        return {
            "base": self.base.tolist(),
            "window": list(self.window),
            "score": self.score,
            "best_direction": self.best_direction,
            "forward_score": self.forward_score,
            "backward_score": self.backward_score,
            "profile": self.profile.tolist(),
        }


@dataclass
class CriticalCandidate:
    point: np.ndarray
    direction: float
    window: int
    score: float
    alignment_slopes: list
    report: CriticalityReport = field(repr=False)
    sample: object = field(default=None, repr=False)

    def to_dict(self):
        return {
            "point": self.point.tolist(),
            "direction": self.direction,
            "window": self.window,
            "score": self.score,
            "alignment_slopes": [[n, s] for n, s in self.alignment_slopes],
            "forward_score": self.report.forward_score,
            "backward_score": self.report.backward_score,
        }


class HomothetyVerdict(Enum):
    FAR_AT_THIS_HORIZON = "FarAtThisHorizon"
    HOMOTHETY_LIKE_WITNESS_FOUND = "HomothetyLikeWitnessFound"


@dataclass
class FarFromHomothetyReport:
    base: np.ndarray
    delta: float
    horizon: int
    witness_direction: float | None
    verdict: HomothetyVerdict
    margin: float

    def to_dict(self):
        return {
            "base": self.base.tolist(),
            "delta": self.delta,
            "horizon": self.horizon,
            "witness_direction": self.witness_direction,
            "verdict": self.verdict.value,
            "margin": self.margin,
        }


@dataclass
class ScanResult:
    """Every per-sample report of a scan (None where the orbit escaped) and the candidates."""

    candidates: list
    reports: list
    skipped: int

    def to_dict(self):
        return {
            "candidates": [c.to_dict() for c in self.candidates],
            "scored": sum(r is not None for r in self.reports),
            "skipped": self.skipped,
        }


@dataclass
class RecurrenceEstimate:
    rate: float
    argmin: int | None
    exact_return: bool
    exact_return_at: int | None
    horizon: int

    def to_dict(self):
        return {
            "rate": None if math.isinf(self.rate) else self.rate,
            "argmin": self.argmin,
            "exact_return": self.exact_return,
            "exact_return_at": self.exact_return_at,
            "horizon": self.horizon,
        }


class MisiurewiczKind(Enum):
    MISIUREWICZ_AT_HORIZON = "MisiurewiczAtHorizon"
    RECURRENCE_WITNESS = "RecurrenceWitness"
    ESCAPED_ORBIT = "EscapedOrbit"


@dataclass
class MisiurewiczVerdict:
    point: np.ndarray
    kind: MisiurewiczKind
    k: int | None = None
    sign: int | None = None
    exit_forward: int | None = None
    exit_backward: int | None = None

    def to_dict(self):
        return {
            "point": self.point.tolist(),
            "kind": self.kind.value,
            "k": self.k,
            "sign": self.sign,
            "exit_forward": self.exit_forward,
            "exit_backward": self.exit_backward,
        }


def direction_grid(grid):
    return np.arange(grid) * (math.pi / grid)


def _first_best(values):
    """Index of the first value within TIE_TOL of the maximum."""
    return int(np.argmax(values >= np.max(values) - TIE_TOL))


def _refine(objective, center, half_width, refine_tol, incumbent):
    """Bounded scalar maximisation around a grid optimum; returns (theta, value)."""
    result = minimize_scalar(
        lambda t: -objective(t),
        bounds=(center - half_width, center + half_width),
        method="bounded",
        options={"xatol": refine_tol},
    )
    value = -float(result.fun)
    if value > incumbent + REFINE_MIN_GAIN:
        return geometry.normalize_angle(float(result.x)), value
    return center, incumbent


def _product_directions(orb, N):
    """
    Most contracted directions of the forward and backward window products,
    and their bisector.

    A critical direction sits within a sliver of width ~ (s_min / s_max)^(1/2)
    around both, far below the grid spacing once N is large.
    """
    if N < 1:
        return []
    forward = dynamics.ordered_product([orb.jacobian(n) for n in range(N)])
    backward = dynamics.ordered_product([orb.inverse_jacobian(-n) for n in range(N)])
    found = []
    for M in (forward, backward):
        scale = np.max(np.abs(M))
        if not (np.isfinite(scale) and scale > 0.0):
            continue
        try:
            found.append(geometry.singular_pair(M / scale).e)
        except (ConformalMatrix, SingularMatrix):
            continue
    if len(found) == 2:
        e_f, e_b = found
        gap = (e_b - e_f + math.pi / 2) % math.pi - math.pi / 2
        found.append(geometry.normalize_angle(e_f + 0.5 * gap))
    return found


def criticality_score(map_def, p, N, grid=DIRECTION_GRID, refine_tol=REFINE_TOL):
    """
    Window-N criticality score of a point.

    Every grid direction is traced over [-N, N] at once; the best grid
    direction is then refined with bounded Brent search inside its grid cell.
    The most contracted directions of the forward and backward window
    products (and their bisector) are tried last and replace the refined
    direction only when strictly better. Ties keep the first grid direction.

    Args:
        map_def: MapDef
        p: Point, PeriodicPoint or Orbit
        N: Window half-length
        grid: Number of directions in [0, pi)
        refine_tol: Refinement tolerance in radians (None disables refinement)

    Returns:
        CriticalityReport

    Raises:
        Escaped: if the window leaves the escape radius
    """
    orb = dynamics.resolve_orbit(map_def, p, N, N).require(N, N)
    thetas = direction_grid(grid)
    _, log_g, _ = cocycle.log_profiles(orb, thetas, N, N)
    # rows are directions, columns n = -N..N

    i = _first_best(log_g.min(axis=1))
    best, score = float(thetas[i]), float(log_g[i].min())
    if refine_tol is not None:
        def objective(t):
            return float(cocycle.log_profiles(orb, [t], N, N)[1].min())

        best, score = _refine(objective, best, math.pi / grid, refine_tol, score)

    candidates = _product_directions(orb, N)
    if candidates:
        extra = cocycle.log_profiles(orb, candidates, N, N)[1]
        values = extra.min(axis=1)
        j = int(np.argmax(values))
        if values[j] > score + REFINE_MIN_GAIN:
            best, score = float(candidates[j]), float(values[j])
        log_g = np.vstack([log_g, extra])

    profile = cocycle.log_profiles(orb, [best], N, N)[1][0]
    # one-sided scores: column N is n = 0
    forward_score = max(float(log_g[:, N:].min(axis=1).max()), float(profile[N:].min()))
    backward_score = max(float(log_g[:, : N + 1].min(axis=1).max()), float(profile[: N + 1].min()))
    return CriticalityReport(
        base=dynamics.base_point(p),
        window=(N, N),
        score=score,
        best_direction=best,
        forward_score=forward_score,
        backward_score=backward_score,
        profile=profile,
    )


def far_from_homotheties(map_def, p, delta, horizon, grid=DIRECTION_GRID, refine_tol=REFINE_TOL):
    """
    Search for a direction whose cocycle stays homothety-like up to `horizon`.

    The margin of a direction is the smallest gap, over 0 < n <= horizon,
    between log g^n and the band (n log(1 - delta), n log(1 + delta)); a
    positive margin is a witness.

    Raises:
        Escaped: if the forward window leaves the escape radius
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if horizon < 1:
        raise ValueError("horizon must be positive")
    orb = dynamics.resolve_orbit(map_def, p, 0, horizon).require(0, horizon)
    n = np.arange(1, horizon + 1)
    upper = n * math.log1p(delta)
    lower = n * math.log1p(-delta)

    def margins(thetas):
        log_g = cocycle.log_profiles(orb, thetas, 0, horizon)[1][:, 1:]
        # signed distance to the band, negative outside it
        return np.minimum(upper - log_g, log_g - lower).min(axis=1)

    thetas = direction_grid(grid)
    values = margins(thetas)
    i = _first_best(values)
    best, margin = float(thetas[i]), float(values[i])
    if refine_tol is not None:
        best, margin = _refine(lambda t: float(margins([t])[0]), best, math.pi / grid, refine_tol, margin)

    found = margin > 0.0
    return FarFromHomothetyReport(
        base=dynamics.base_point(p),
        delta=delta,
        horizon=horizon,
        witness_direction=best if found else None,
        verdict=HomothetyVerdict.HOMOTHETY_LIKE_WITNESS_FOUND if found else HomothetyVerdict.FAR_AT_THIS_HORIZON,
        margin=margin,
    )


def alignment_slopes(orb, direction, N):
    """slope(e_n, direction) for n = 1..N, e_n the most contracted direction of Df^n."""
    slopes = []
    P = np.eye(2)
    for n in range(1, N + 1):
        P = orb.jacobian(n - 1) @ P
        P /= np.max(np.abs(P))
        # directions only, so the scale is free
        try:
            e = geometry.singular_pair(P).e
        except ConformalMatrix:
            continue
        slopes.append((n, geometry.slope(e, direction)))
    return slopes


def _score_or_none(map_def, sample, N, grid, refine_tol):
    try:
        return criticality_score(map_def, sample, N, grid=grid, refine_tol=refine_tol)
    except Escaped:
        return None


def scan(map_def, samples, N, threshold=DEFAULT_THRESHOLD, grid=DIRECTION_GRID, refine_tol=REFINE_TOL, threads=1):
    """
    Score every sample and keep those at or above `threshold`.

    Returns:
        ScanResult with candidates sorted by score descending, then point
    """
    samples = list(samples)
    reports = map_ordered(lambda s: _score_or_none(map_def, s, N, grid, refine_tol), samples, threads)
    skipped = sum(r is None for r in reports)
    if skipped:
        logger.warning("%d of %d samples escaped within window %d", skipped, len(samples), N)

    candidates = []
    for sample, report in zip(samples, reports):
        if report is None or report.score < threshold:
            continue
        orb = dynamics.resolve_orbit(map_def, sample, 0, N)
        candidates.append(
            CriticalCandidate(
                point=report.base,
                direction=report.best_direction,
                window=N,
                score=report.score,
                alignment_slopes=alignment_slopes(orb, report.best_direction, N),
                report=report,
                sample=sample,
            )
        )
    candidates.sort(key=lambda c: (-c.score, c.point[0], c.point[1]))
    logger.info("scan at window %d: %d candidates from %d samples", N, len(candidates), len(samples))
    return ScanResult(candidates=candidates, reports=reports, skipped=skipped)


def critical_scan(map_def, samples, N, threshold=DEFAULT_THRESHOLD, grid=DIRECTION_GRID, refine_tol=REFINE_TOL, threads=1):
    """Critical candidates among `samples` (see `scan`)."""
    return scan(map_def, samples, N, threshold, grid=grid, refine_tol=refine_tol, threads=threads).candidates


def recurrence_rate(map_def, c, K):
    """
    Finite-horizon exponential recurrence rate min_{1<=k<=K} (1/k) log d(f^k c, c).

    Exact returns (distance below 1e-14) are flagged instead of entering the
    minimum.

    Raises:
        Escaped: if the forward orbit leaves within K steps
    """
    if K < 1:
        raise ValueError("K must be positive")
    orb = dynamics.resolve_orbit(map_def, c, 0, K).require(0, K)
    base = orb.point(0)
    distances = np.linalg.norm(orb.points[1 : K + 1] - base, axis=1)
    # distances[k - 1] = d(f^k c, c)
    exact = distances < EXACT_RETURN_DISTANCE
    exact_at = int(np.argmax(exact)) + 1 if exact.any() else None

    rate, argmin = math.inf, None
    for k, d in enumerate(distances, start=1):
        if exact[k - 1]:
            continue
        r = math.log(d) / k
        if r < rate:
            rate, argmin = r, k
    return RecurrenceEstimate(rate=rate, argmin=argmin, exact_return=exact_at is not None, exact_return_at=exact_at, horizon=K)


def _orbit_source(candidate):
    if not isinstance(candidate, CriticalCandidate):
        return candidate
    return candidate.point if candidate.sample is None else candidate.sample


def _first_exit(distances, radius):
    outside = np.nonzero(distances > radius)[0]
    return int(outside[0]) + 1 if len(outside) else None


def misiurewicz_check(map_def, candidates, radius, horizon, burn_in=1):
    """
    Non-recurrence of critical candidates up to `horizon`.

    V is the union of radius-balls around the candidate points. Each
    candidate's orbit is followed both ways; checking starts at the later of
    `burn_in` and the step at which the orbit leaves the candidate's own ball,
    and any visit to V from then on is a recurrence witness.

    Args:
        map_def: MapDef
        candidates: CriticalCandidate list (or points)
        radius: Ball radius
        horizon: Last step checked in each time direction

    Returns:
        One MisiurewiczVerdict per candidate, in input order
    """
    if not candidates:
        return []
    sources = [_orbit_source(c) for c in candidates]
    centers = np.array([dynamics.base_point(s) for s in sources])
    tree = cKDTree(centers)

    verdicts = []
    for source, center in zip(sources, centers):
        orb = dynamics.resolve_orbit(map_def, source, horizon, horizon)
        if not orb.covers(horizon, horizon):
            k = orb.hi + 1 if orb.hi < horizon else orb.lo - 1
            logger.warning("candidate %s escaped at step %d", center.tolist(), k)
            verdicts.append(MisiurewiczVerdict(point=center, kind=MisiurewiczKind.ESCAPED_ORBIT, k=k))
            continue

        forward = orb.points[horizon + 1 :]
        backward = orb.points[:horizon][::-1]
        # both legs start at k = 1
        exits = {}
        witness = None
        for sign, leg in ((1, forward), (-1, backward)):
            exit_k = _first_exit(np.linalg.norm(leg - center, axis=1), radius)
            exits[sign] = exit_k
            if witness is not None:
                continue
            if exit_k is None:
                witness = (horizon, sign)
                continue
            start = max(burn_in, exit_k)
            dist, _ = tree.query(leg[start - 1 :])
            hits = np.nonzero(dist <= radius)[0]
            if len(hits):
                witness = (start + int(hits[0]), sign)

        if witness is None:
            verdicts.append(
                MisiurewiczVerdict(
                    point=center,
                    kind=MisiurewiczKind.MISIUREWICZ_AT_HORIZON,
                    exit_forward=exits[1],
                    exit_backward=exits[-1],
                )
            )
        else:
            verdicts.append(
                MisiurewiczVerdict(
                    point=center,
                    kind=MisiurewiczKind.RECURRENCE_WITNESS,
                    k=witness[0],
                    sign=witness[1],
                    exit_forward=exits[1],
                    exit_backward=exits[-1],
                )
            )
    return verdicts
