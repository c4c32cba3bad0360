"""
Manifolds

Stable and unstable branches of saddles, their intersections, the crossing
classification of a contact, and the first-tangency bisection in the Hénon
family with the location of the critical iterate on the tangency orbit.

A branch is grown from a fundamental domain: with F = f^period (f^-period
for stable branches, squared when the eigenvalue is negative)

    q0 = saddle + seed_length * side * u,    D(t) = q0 + t (F(q0) - q0),

and level k of the branch is F^k(D(t)), t in [0, 1]. Polyline vertices carry
the global parameter s = k + t, so every point can be recomputed on the
exact curve; intersections are refined there and not on the chords.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.spatial import cKDTree

from critset import cocycle, criticality, dynamics, geometry
from critset.errors import BracketInvalid, EigenDegenerate, NotASaddle, Undetermined
from critset.parallel import map_ordered

logger = logging.getLogger(__name__)

SEED_LENGTH = 1e-5
CURVATURE_TOL = 0.2
EIGEN_SEPARATION = 1e-6
MAX_LEVELS = 100
MAX_POINTS = 200_000
MAX_PASSES = 64
MIN_DT = 1e-15
INITIAL_POINTS = 9
GAPS_PER_BUDGET = 500

REFINE_TOL = 1e-10
PARAM_XTOL = 1e-13
PROXIMITY = 0.1
DEDUP_DISTANCE = 1e-8

TANGENCY_WINDOW = 15
SADDLE_EXCLUSION = 1e-3
MIN_BRACKET_ANGLE = 0.02
MAX_PADDING = 10_000

SWEEP_STEPS = 200
MAX_SUBSTEPS = 8
GAP_SAMPLES = 33
GAP_WIDENINGS = 4
FOLLOW_SHIFT = 0.25
MAX_PAIR_ANGLE = 0.2
MAX_TANGENCY_ANGLE = 1e-3
CONTACT_TOL = 1e-8


class BranchKind(Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"


class Side(Enum):
    PLUS = "Plus"
    MINUS = "Minus"

    @property
    def sign(self):
        return 1.0 if self is Side.PLUS else -1.0


class CrossingKind(Enum):
    CROSSING = "Crossing"
    TANGENTIAL = "Tangential"
    ONE_SIDED = "OneSided"


@dataclass
class ManifoldBranch:
    """
    Polyline approximation of one branch of W^s or W^u.

    params[i] is the global curve parameter of polyline[i]; segment i joins
    vertices i and i+1 unless i is listed in breaks (the curve left the
    domain in between).
    """

    saddle: dynamics.PeriodicPoint | None
    kind: BranchKind
    side: Side
    polyline: np.ndarray
    params: np.ndarray
    breaks: np.ndarray
    arclength: float
    max_gap: float
    reaches_boundary: bool = False
    generator: dynamics.MapDef | None = field(default=None, repr=False)
    seed: tuple | None = field(default=None, repr=False)
    steps_per_level: int = 1
    levels: int = 1

    @classmethod
    def from_polyline(cls, points, kind=BranchKind.UNSTABLE, side=Side.PLUS):
        """A branch given directly by its vertices; the curve is the polyline itself."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2 or len(points) < 2:
            raise ValueError("a polyline needs at least two points")
        lengths = np.linalg.norm(np.diff(points, axis=0), axis=1)
        return cls(
            saddle=None,
            kind=BranchKind(kind),
            side=Side(side),
            polyline=points,
            params=np.arange(len(points), dtype=float),
            breaks=np.array([], dtype=int),
            arclength=float(lengths.sum()),
            max_gap=float(lengths.max()),
        )

    def segment_indices(self):
        valid = np.ones(len(self.polyline) - 1, dtype=bool)
        valid[self.breaks] = False
        return np.nonzero(valid)[0]

    def split_param(self, s):
        """(level, t) of a global parameter."""
        level = int(min(max(math.floor(s), 0), self.levels - 1))
        return level, s - level

    def seed_point(self, t):
        q0, q1 = self.seed
        return q0 + t * (q1 - q0)

    def point_at(self, level, t):
        return self.evaluate(level + t)[0]

    def evaluate(self, s):
        """Point and d/ds tangent vector of the exact curve at parameter s."""
        if self.generator is None:
            i = int(min(max(math.floor(s), 0), len(self.polyline) - 2))
            tangent = self.polyline[i + 1] - self.polyline[i]
            return self.polyline[i] + (s - i) * tangent, tangent
        level, t = self.split_param(s)
        q0, q1 = self.seed
        x = q0 + t * (q1 - q0)
        v = q1 - q0
        for _ in range(level):
            v = self.generator.jacobian(x) @ v
            x = self.generator.forward(x)
        return x, v

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "side": self.side.value,
            "saddle": None if self.saddle is None else self.saddle.location.tolist(),
            "arclength": self.arclength,
            "max_gap": self.max_gap,
            "reaches_boundary": self.reaches_boundary,
            "levels": self.levels,
            "points": len(self.polyline),
            "breaks": self.breaks.tolist(),
        }


@dataclass
class IntersectionEvent:
    point: np.ndarray
    angle: float
    segment_a: int
    segment_b: int
    param_a: float
    param_b: float
    direction_a: float
    direction_b: float
    residual: float

    def to_dict(self):
        return {
            "point": self.point.tolist(),
            "angle": self.angle,
            "segment_a": self.segment_a,
            "segment_b": self.segment_b,
            "param_a": self.param_a,
            "param_b": self.param_b,
            "direction_a": self.direction_a,
            "direction_b": self.direction_b,
            "residual": self.residual,
        }


@dataclass
class TangencyReport:
    family_b: float
    a_star: float
    bracket: tuple
    tangency_point: np.ndarray
    tangency_angle: float
    tangency_direction: float
    contact_gap: float
    pair_angle: float
    critical_iterate: int
    critical_point_estimate: np.ndarray
    critical_direction: float
    split_index: int
    iterate_scores: list
    critical_score: float
    critical_best_direction: float
    direction_mismatch: float
    counts: dict
    bisection_steps: int
    leg_mismatch: float

    def to_dict(self):
        return {
            "family_b": self.family_b,
            "a_star": self.a_star,
            "bracket": list(self.bracket),
            "tangency_point": self.tangency_point.tolist(),
            "tangency_angle": self.tangency_angle,
            "tangency_direction": self.tangency_direction,
            "contact_gap": self.contact_gap,
            "pair_angle": self.pair_angle,
            "critical_iterate": self.critical_iterate,
            "critical_point_estimate": self.critical_point_estimate.tolist(),
            "critical_direction": self.critical_direction,
            "split_index": self.split_index,
            "iterate_scores": [[n, s] for n, s in self.iterate_scores],
            "critical_score": self.critical_score,
            "critical_best_direction": self.critical_best_direction,
            "direction_mismatch": self.direction_mismatch,
            "counts": dict(self.counts),
            "bisection_steps": self.bisection_steps,
            "leg_mismatch": self.leg_mismatch,
        }


# --- branch growth ------------------------------------------------------------


def _chords_hit_box(P0, P1, box):
    """Segments P0 -> P1 that meet the box (slab test); NaN endpoints never hit."""
    t0 = np.zeros(len(P0))
    t1 = np.ones(len(P0))
    d = P1 - P0
    with np.errstate(divide="ignore", invalid="ignore"):
        for axis, (lo, hi) in enumerate(((box.xmin, box.xmax), (box.ymin, box.ymax))):
            a = (lo - P0[:, axis]) / d[:, axis]
            b = (hi - P0[:, axis]) / d[:, axis]
            flat = d[:, axis] == 0.0
            inside_slab = (P0[:, axis] >= lo) & (P0[:, axis] <= hi)
            a = np.where(flat, np.where(inside_slab, -np.inf, np.inf), a)
            b = np.where(flat, np.where(inside_slab, np.inf, -np.inf), b)
            t0 = np.maximum(t0, np.minimum(a, b))
            t1 = np.minimum(t1, np.maximum(a, b))
    return t0 <= t1


class _Grower:
    """Adaptive sampling of the levels F^k(D(t))."""

    def __init__(self, generator, q0, q1, domain, max_gap, curvature_tol, max_points):
        self.generator = generator
        self.q0, self.q1 = q0, q1
        self.domain = domain
        self.max_gap = max_gap
        self.curvature_tol = curvature_tol
        self.max_points = max_points
        self.saturated = False

    def images(self, P, times=1):
        for _ in range(times):
            with np.errstate(over="ignore", invalid="ignore"):
                P = self.generator.forward(P)
            P[self.generator.escaped(P)] = np.nan
        return P

    def level_points(self, level, t):
        P = self.q0 + t[:, None] * (self.q1 - self.q0)
        return self.images(P, level)

    def refine(self, level, t, P, budget_points):
        for _ in range(MAX_PASSES):
            inside = self.domain.contains(P)
            d = np.diff(P, axis=0)
            seg = np.hypot(d[:, 0], d[:, 1])
            heading = np.arctan2(d[:, 1], d[:, 0])
            turn = np.zeros(len(P))
            turn[1:-1] = np.abs((np.diff(heading) + math.pi) % (2 * math.pi) - math.pi)
            # a segment is as bent as its sharper end
            bend = np.maximum(turn[:-1], turn[1:])
            with np.errstate(invalid="ignore"):
                coarse = ~np.isfinite(seg) | (seg > self.max_gap) | (bend > self.curvature_tol)
            relevant = inside[:-1] | inside[1:] | _chords_hit_box(P[:-1], P[1:], self.domain)
            need = coarse & relevant & (np.diff(t) > MIN_DT)
            if not need.any():
                break
            if len(t) + need.sum() > budget_points:
                self.saturated = True
                break
            # bisect in the seed parameter, then image the midpoints
            tm = 0.5 * (t[:-1][need] + t[1:][need])
            order = np.argsort(np.concatenate([t, tm]), kind="stable")
            t = np.concatenate([t, tm])[order]
            P = np.concatenate([P, self.level_points(level, tm)])[order]
        return self.prune(t, P)

    @staticmethod
    def prune(t, P):
        """Drop escaped vertices whose neighbours escaped too."""
        finite = np.isfinite(P).all(axis=1)
        keep = finite.copy()
        keep[1:] |= finite[:-1]
        keep[:-1] |= finite[1:]
        return t[keep], P[keep]


def _assemble(levels_t, levels_P):
    s = [levels_t[0]]
    P = [levels_P[0]]
    # level k starts where level k - 1 ends
    for k in range(1, len(levels_t)):
        s.append(levels_t[k][1:] + k)
        P.append(levels_P[k][1:])
    return np.concatenate(s), np.concatenate(P)


def _inbox_lengths(P, domain):
    inside = domain.contains(P)
    valid = inside[:-1] & inside[1:]
    lengths = np.where(valid, np.linalg.norm(np.diff(P, axis=0), axis=1), 0.0)
    return inside, valid, lengths


def _fundamental_domain(map_def, saddle, kind, side, seed_length):
    """Generator F, seed chord q0 -> F(q0) and map steps per level of one branch."""
    if saddle.linear_class is not geometry.LinearClass.HYPERBOLIC_SADDLE:
        raise NotASaddle(f"point of class {saddle.linear_class.value} is not a hyperbolic saddle")
    (lam_u, theta_u), (lam_s, theta_s) = geometry.eigen_directions(saddle.derivative_at_period)
    if geometry.rp1_distance(theta_u, theta_s) <= EIGEN_SEPARATION:
        raise EigenDegenerate("stable and unstable eigendirections are parallel")
    unstable = kind is BranchKind.UNSTABLE
    lam, theta = (lam_u, theta_u) if unstable else (lam_s, theta_s)
    # a negative eigenvalue flips sides, so one level is two periods
    steps = saddle.period * (2 if lam < 0 else 1)
    generator = map_def.power(steps if unstable else -steps)
    q0 = saddle.location + seed_length * side.sign * geometry.unit(theta)
    return generator, q0, generator.forward(q0), steps


def exact_branch(map_def, saddle, kind, side, levels, seed_length=SEED_LENGTH):
    """
    A branch over a fixed number of levels, carried by its exact curve.

    The polyline holds only the level endpoints F^k(q0); evaluate() gives
    every other point. Used to follow contacts through a parameter family
    without regrowing.
    """
    kind, side = BranchKind(kind), Side(side)
    generator, q0, q1, steps = _fundamental_domain(map_def, saddle, kind, side, seed_length)
    ends = [q0]
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(levels):
            ends.append(generator.forward(ends[-1]))
    P = np.array(ends)
    lengths = np.linalg.norm(np.diff(P, axis=0), axis=1)
    return ManifoldBranch(
        saddle=saddle,
        kind=kind,
        side=side,
        polyline=P,
        params=np.arange(levels + 1, dtype=float),
        breaks=np.array([], dtype=int),
        arclength=float(lengths.sum()),
        max_gap=float(lengths.max()),
        generator=generator,
        seed=(q0, q1),
        steps_per_level=steps,
        levels=levels,
    )


def grow_branch(
    map_def,
    saddle,
    kind,
    side,
    arclength_budget,
    curvature_tol=CURVATURE_TOL,
    max_gap=None,
    seed_length=SEED_LENGTH,
    domain=None,
    max_levels=MAX_LEVELS,
    max_points=MAX_POINTS,
):
    """
    Grow one branch of the stable or unstable manifold of a saddle.

    Levels are added until the in-domain arclength reaches the budget, a level
    lies entirely outside the domain, or max_levels is reached. Each level is
    refined by midpoint insertion in t wherever a vertex is in the domain (or
    a chord crosses it) and the spacing exceeds max_gap or the turning angle
    exceeds curvature_tol.

    Args:
        map_def: MapDef
        saddle: PeriodicPoint of class HyperbolicSaddle
        kind: BranchKind (or "Stable"/"Unstable")
        side: Side (or "Plus"/"Minus"); Plus follows the eigenvector at its angle in [0, pi)
        arclength_budget: In-domain arclength to grow (math.inf with max_levels for level-limited growth)
        curvature_tol: Largest turning angle between consecutive segments
        max_gap: Largest vertex spacing (default arclength_budget / 500)
        seed_length: Offset of the fundamental domain from the saddle
        domain: Box (default trapping_box(map_def))

    Returns:
        ManifoldBranch

    Raises:
        NotASaddle: if the saddle is not hyperbolic
        EigenDegenerate: if the eigendirections are within 1e-6 rad
    """
    kind, side = BranchKind(kind), Side(side)
    generator, q0, q1, steps = _fundamental_domain(map_def, saddle, kind, side, seed_length)
    if max_gap is None:
        if not math.isfinite(arclength_budget):
            raise ValueError("max_gap is required when the arclength budget is unbounded")
        max_gap = arclength_budget / GAPS_PER_BUDGET

    domain = domain or dynamics.trapping_box(map_def)

    grower = _Grower(generator, q0, q1, domain, max_gap, curvature_tol, max_points)
    t = np.linspace(0.0, 1.0, INITIAL_POINTS)
    levels_t, levels_P = [t], [grower.level_points(0, t)]
    while len(levels_t) < max_levels:
        s, P = _assemble(levels_t, levels_P)
        _, _, lengths = _inbox_lengths(P, domain)
        if lengths.sum() >= arclength_budget:
            break
        if len(levels_t) > 1 and not domain.contains(levels_P[-1]).any():
            break
        level = len(levels_t)
        t, P = grower.refine(level, levels_t[-1], grower.images(levels_P[-1].copy()), max_points - len(s))
        levels_t.append(t)
        levels_P.append(P)
        logger.debug("%s/%s level %d: %d points", kind.value, side.value, level, len(t))
        if grower.saturated:
            logger.warning("branch growth stopped at %d points", max_points)
            break

    s, P = _assemble(levels_t, levels_P)
    inside, valid, lengths = _inbox_lengths(P, domain)
    cumulative = np.cumsum(lengths)
    if cumulative.size and cumulative[-1] > arclength_budget:
        cut = int(np.searchsorted(cumulative, arclength_budget))
        excess = cumulative[cut] - arclength_budget
        fraction = 1.0 - excess / lengths[cut]
        s = np.append(s[: cut + 1], s[cut] + fraction * (s[cut + 1] - s[cut]))
        P = np.vstack([P[: cut + 1], P[cut] + fraction * (P[cut + 1] - P[cut])])
        inside, valid, lengths = _inbox_lengths(P, domain)

    kept = np.nonzero(inside)[0]
    breaks = np.nonzero(np.diff(kept) != 1)[0] if len(kept) > 1 else np.array([], dtype=int)
    branch = ManifoldBranch(
        saddle=saddle,
        kind=kind,
        side=side,
        polyline=P[kept],
        params=s[kept],
        breaks=breaks,
        arclength=float(lengths.sum()),
        max_gap=max_gap,
        reaches_boundary=bool(np.any(inside[:-1] != inside[1:])),
        generator=generator,
        seed=(q0, q1),
        steps_per_level=steps,
        levels=len(levels_t),
    )
    logger.info(
        "%s/%s branch: %d levels, %d points, arclength %.4g",
        kind.value,
        side.value,
        branch.levels,
        len(branch.polyline),
        branch.arclength,
    )
    return branch


# --- intersections ------------------------------------------------------------


def _cross(u, v):
    return u[0] * v[1] - u[1] * v[0]


def _segment_hit(p, r, q, s):
    """Parameters (tt, uu) in [0, 1) x [0, 1) where p + tt r = q + uu s, or None."""
    denom = _cross(r, s)
    if denom == 0.0:
        return None
    qp = q - p
    tt = _cross(qp, s) / denom
    uu = _cross(qp, r) / denom
    if 0.0 <= tt < 1.0 and 0.0 <= uu < 1.0:
        return tt, uu
    return None


def _point_segment_distance(x, p, r):
    rr = float(r @ r)
    tau = 0.0 if rr == 0.0 else min(max(float((x - p) @ r) / rr, 0.0), 1.0)
    return float(np.linalg.norm(x - (p + tau * r))), tau


def _segment_distance(p, r, q, s):
    return min(
        _point_segment_distance(p, q, s)[0],
        _point_segment_distance(p + r, q, s)[0],
        _point_segment_distance(q, p, r)[0],
        _point_segment_distance(q + s, p, r)[0],
    )


def _project(branch, x, u):
    """Foot of x on the exact curve of `branch` near parameter u (Gauss-Newton)."""
    for _ in range(12):
        point, tangent = branch.evaluate(u)
        tt = float(tangent @ tangent)
        if tt == 0.0:
            break
        du = float((x - point) @ tangent) / tt
        u += du
        if abs(du) <= 1e-15 * max(1.0, abs(u)):
            break
    point, tangent = branch.evaluate(u)
    return u, point, tangent


def _event(A, B, i, j, sa, sb):
    pa, ta = A.evaluate(sa)
    pb, tb = B.evaluate(sb)
    da, db = geometry.angle_of(ta), geometry.angle_of(tb)
    return IntersectionEvent(
        point=0.5 * (pa + pb),
        angle=geometry.rp1_distance(da, db),
        segment_a=int(i),
        segment_b=int(j),
        param_a=float(sa),
        param_b=float(sb),
        direction_a=da,
        direction_b=db,
        residual=float(np.linalg.norm(pa - pb)),
    )


def _local_range(branch, i, reach=1):
    lo = branch.params[max(i - reach, 0)]
    hi = branch.params[min(i + 1 + reach, len(branch.params) - 1)]
    return lo, hi


def _newton(A, B, i, j, sa, sb, refine_tol):
    """2x2 Newton solve of A(sa) = B(sb) started from a chord crossing."""
    lo_a, hi_a = _local_range(A, i)
    lo_b, hi_b = _local_range(B, j)
    for _ in range(30):
        pa, ta = A.evaluate(sa)
        pb, tb = B.evaluate(sb)
        residual = pa - pb
        M = np.column_stack([ta, -tb])
        if abs(np.linalg.det(M)) <= 1e-300:
            return None
        step = np.linalg.solve(M, -residual)
        sa, sb = sa + step[0], sb + step[1]
        if not (lo_a <= sa <= hi_a and lo_b <= sb <= hi_b):
            return None
        if np.linalg.norm(residual) <= refine_tol * (1.0 + np.linalg.norm(pa)) and np.max(np.abs(step)) <= PARAM_XTOL * (
            1.0 + abs(sa) + abs(sb)
        ):
            return _event(A, B, i, j, sa, sb)
    pa, _ = A.evaluate(sa)
    pb, _ = B.evaluate(sb)
    if np.linalg.norm(pa - pb) <= refine_tol * (1.0 + np.linalg.norm(pa)):
        return _event(A, B, i, j, sa, sb)
    return None


def _fold_search(A, B, i, j, refine_tol):
    """
    Roots of the signed distance from A to B over segment i of A.

    The extrema of the signed distance split the interval into monotone
    pieces, so two contacts inside one chord (a fold grazing B) are both
    found.
    """
    s0, s1 = float(A.params[i]), float(A.params[i + 1])
    lo_b, hi_b = _local_range(B, j)
    guess = [0.5 * (B.params[j] + B.params[j + 1])]
    # warm start for successive projections

    def signed(s):
        x, _ = A.evaluate(s)
        u, point, tangent = _project(B, x, guess[0])
        guess[0] = u
        return _cross(tangent / np.linalg.norm(tangent), x - point)

    options = {"xatol": PARAM_XTOL * (1.0 + abs(s1))}
    knots = {s0, s1}
    for sign in (1.0, -1.0):
        result = minimize_scalar(lambda s: sign * signed(s), bounds=(s0, s1), method="bounded", options=options)
        knots.add(float(result.x))
    knots = sorted(knots)
    values = [signed(k) for k in knots]

    events = []
    for (a, va), (b, vb) in zip(zip(knots, values), zip(knots[1:], values[1:])):
        if va == 0.0:
            root = a
        elif va * vb < 0.0:
            root = brentq(signed, a, b, xtol=PARAM_XTOL * (1.0 + abs(b)), rtol=8.9e-16)
        else:
            continue
        x, _ = A.evaluate(root)
        u, point, _ = _project(B, x, guess[0])
        if not lo_b <= u <= hi_b:
            continue
        if np.linalg.norm(x - point) > 1e3 * refine_tol * (1.0 + np.linalg.norm(x)):
            continue
        events.append(_event(A, B, i, j, root, u))
    return events


def _pair_events(A, B, i, j, proximity, fold_angle, refine_tol):
    p, r = A.polyline[i], A.polyline[i + 1] - A.polyline[i]
    q, s = B.polyline[j], B.polyline[j + 1] - B.polyline[j]
    if not (r @ r > 0.0 and s @ s > 0.0):
        return []
    chord_angle = geometry.rp1_distance(geometry.angle_of(r), geometry.angle_of(s))
    # transversal chord crossings go to Newton, near-parallel chords to the fold search
    hit = _segment_hit(p, r, q, s)
    if hit is not None and chord_angle >= fold_angle:
        sa = A.params[i] + hit[0] * (A.params[i + 1] - A.params[i])
        sb = B.params[j] + hit[1] * (B.params[j + 1] - B.params[j])
        event = _newton(A, B, i, j, float(sa), float(sb), refine_tol)
        if event is not None:
            return [event]
    elif hit is None and (chord_angle >= fold_angle or _segment_distance(p, r, q, s) > proximity):
        return []
    return _fold_search(A, B, i, j, refine_tol)


def _dedup(events):
    events = sorted(events, key=lambda e: (e.point[0], e.point[1]))
    kept = []
    for e in events:
        # sorted by x, so duplicates sit close together
        if any(np.linalg.norm(e.point - k.point) <= DEDUP_DISTANCE * (1.0 + np.linalg.norm(e.point)) for k in kept[-8:]):
            continue
        kept.append(e)
    return kept


def find_intersections(A, B, refine_tol=REFINE_TOL, fold_angle=2 * CURVATURE_TOL):
    """
    All contacts between two branches.

    Candidate segment pairs come from a KD-tree over segment midpoints.
    Chords that cross at an angle of at least fold_angle are refined by a
    Newton solve in the two curve parameters; nearly parallel or nearly
    touching chords are searched for one or two roots of the signed distance
    between the exact curves.

    Returns:
        IntersectionEvent list sorted by point (x, then y)
    """
    seg_a, seg_b = A.segment_indices(), B.segment_indices()
    if not len(seg_a) or not len(seg_b):
        return []
    a0, a1 = A.polyline[seg_a], A.polyline[seg_a + 1]
    b0, b1 = B.polyline[seg_b], B.polyline[seg_b + 1]
    half_a = 0.5 * np.linalg.norm(a1 - a0, axis=1)
    half_b = 0.5 * np.linalg.norm(b1 - b0, axis=1)
    proximity = PROXIMITY * 2.0 * max(half_a.max(), half_b.max())
    tree = cKDTree(0.5 * (b0 + b1))
    neighbours = tree.query_ball_point(0.5 * (a0 + a1), r=half_a + half_b.max() + proximity)

    events = []
    for ia, js in enumerate(neighbours):
        for jb in sorted(js):
            events.extend(_pair_events(A, B, seg_a[ia], seg_b[jb], proximity, fold_angle, refine_tol))
    events = _dedup(events)
    logger.debug("%d intersections between %s and %s branches", len(events), A.kind.value, B.kind.value)
    return events


# --- crossing classification --------------------------------------------------


def _nearest_segment(branch, x):
    best = (math.inf, None, 0.0)
    for i in branch.segment_indices():
        p = branch.polyline[i]
        d, tau = _point_segment_distance(x, p, branch.polyline[i + 1] - p)
        if d < best[0]:
            best = (d, i, tau)
    return best[1], best[2]


def _run_around(branch, i):
    """First and last vertex of the unbroken run containing segment i."""
    breaks = branch.breaks
    before = breaks[breaks < i]
    after = breaks[breaks >= i]
    start = int(before[-1]) + 1 if len(before) else 0
    stop = int(after[0]) if len(after) else len(branch.polyline) - 1
    return start, stop


def _local_piece(branch, x, reach, strict):
    """Vertices within arclength `reach` of the point of the branch nearest x."""
    i, tau = _nearest_segment(branch, x)
    if i is None:
        raise Undetermined("branch has no segments")
    start, stop = _run_around(branch, i)
    P = branch.polyline[start : stop + 1]
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(P, axis=0), axis=1))])
    k = i - start
    at = cum[k] + tau * (cum[k + 1] - cum[k])
    if strict and (at - reach < 0.0 or at + reach > cum[-1]):
        raise Undetermined("stable branch ends inside the band")
    lo, hi = max(at - reach, 0.0), min(at + reach, cum[-1])
    ends = np.column_stack([np.interp([lo, hi], cum, P[:, 0]), np.interp([lo, hi], cum, P[:, 1])])
    inner = (cum > lo) & (cum < hi)
    return np.vstack([ends[0], P[inner], ends[1]])


def classify_crossing(stable, unstable, event, band, flat_tol=1e-9):
    """
    Classify a contact by the sides of the stable branch the unstable one visits.

    The stable branch is taken over arclength 2*band on each side of the
    contact and must exist there without a break; the unstable branch is
    taken over arclength band on each side. Signed distances within flat_tol
    count as on the curve.

    Returns:
        CrossingKind

    Raises:
        Undetermined: if the stable piece does not separate the unstable one
    """
    x = np.asarray(event.point if isinstance(event, IntersectionEvent) else event, dtype=float)
    S = _local_piece(stable, x, 2.0 * band, strict=True)
    U = _local_piece(unstable, x, band, strict=False)

    p0, p1 = S[:-1], S[1:]
    r = p1 - p0
    rr = np.einsum("ij,ij->i", r, r)
    signs = []
    for q in U:
        tau = np.clip(np.einsum("ij,ij->i", q - p0, r) / rr, 0.0, 1.0)
        feet = p0 + tau[:, None] * r
        dist = np.linalg.norm(q - feet, axis=1)
        k = int(np.argmin(dist))
        if (k == 0 and tau[k] == 0.0) or (k == len(r) - 1 and tau[k] == 1.0):
            if dist[k] > flat_tol:
                raise Undetermined("unstable piece reaches past the stable piece")
        signed = _cross(r[k] / math.sqrt(rr[k]), q - feet[k])
        signs.append(signed)
    signs = np.array(signs)
    above, below = bool(np.any(signs > flat_tol)), bool(np.any(signs < -flat_tol))
    if above and below:
        return CrossingKind.CROSSING
    if not above and not below:
        return CrossingKind.TANGENTIAL
    return CrossingKind.ONE_SIDED


# --- first tangency -----------------------------------------------------------


def outer_saddle(map_def):
    """The Hénon fixed point with the larger x coordinate."""
    family = map_def.family
    s = 1.0 + family.b
    x = 0.5 * (s + math.sqrt(s * s + 4.0 * family.a))
    return dynamics.periodic_point_from_cycle(map_def, [[x, x]])


BRANCH_JOBS = (
    (BranchKind.UNSTABLE, Side.PLUS),
    (BranchKind.UNSTABLE, Side.MINUS),
    (BranchKind.STABLE, Side.PLUS),
    (BranchKind.STABLE, Side.MINUS),
)


def _grow_all(map_def, saddle, budgets, curvature_tol, threads):
    """Both unstable then both stable branches, grown in parallel."""

    def grow(job):
        kind, side = job
        budget = budgets[0] if kind is BranchKind.UNSTABLE else budgets[1]
        return grow_branch(map_def, saddle, kind, side, budget, curvature_tol=curvature_tol)

    return map_ordered(grow, BRANCH_JOBS, threads)


def _signed_distance(U, S, s, u):
    """Signed distance from U(s) to the exact stable curve near parameter u, and the foot parameter."""
    x, _ = U.evaluate(s)
    u, point, tangent = _project(S, x, u)
    return _cross(tangent / np.linalg.norm(tangent), x - point), u


def _bulge_side(U, S, roots):
    """Side of the stable curve the unstable arc between two contacts lies on."""
    (s1, u1), (s2, u2) = roots
    d, _ = _signed_distance(U, S, 0.5 * (s1 + s2), 0.5 * (u1 + u2))
    return math.copysign(1.0, d)


class _LobeState(Enum):
    OPEN = "open"
    CLOSED = "closed"
    LOST = "lost"


@dataclass(frozen=True)
class _Lobe:
    """
    Two consecutive contacts of an unstable branch with one level of a stable
    branch, and the arc of the unstable branch between them.

    roots holds (s, u) of both contacts, s increasing, at the last parameter
    where the lobe was open; sigma is the side of the stable curve the arc
    bulges into. A lobe can only close by its two contacts merging, which is
    a tangency.
    """

    unstable: int
    stable: int
    roots: tuple
    sigma: float


def _lobes(saddle, branches, refine_tol, exclusion):
    """Interior contacts of every unstable/stable pair of branches, and the lobes they bound."""
    lobes, events = [], []
    for iu in (0, 1):
        for js in (2, 3):
            U, S = branches[iu], branches[js]
            found = [e for e in find_intersections(U, S, refine_tol) if np.linalg.norm(e.point - saddle.location) > exclusion]
            found.sort(key=lambda e: e.param_a)
            events.extend(found)
            for e1, e2 in zip(found, found[1:]):
                if math.floor(e1.param_b) != math.floor(e2.param_b):
                    continue
                roots = ((e1.param_a, e1.param_b), (e2.param_a, e2.param_b))
                lobes.append(_Lobe(iu, js, roots, _bulge_side(U, S, roots)))
    return lobes, events


def _moved(family, a, lobe, roots):
    return replace(lobe, roots=roots, sigma=_bulge_side(*family.pair(a, lobe), roots))


class _Family:
    """Exact branches of the outer saddle of Hénon(a, b) over frozen levels, cached by a."""

    def __init__(self, b, levels):
        self.b = b
        self.levels = levels
        self._cache = {}

    def at(self, a):
        curves = self._cache.get(a)
        if curves is None:
            map_def = dynamics.MapDef.henon(a, self.b)
            saddle = outer_saddle(map_def)
            branches = [
                exact_branch(map_def, saddle, kind, side, levels) for (kind, side), levels in zip(BRANCH_JOBS, self.levels)
            ]
            curves = (map_def, saddle, branches)
            self._cache[a] = curves
        return curves

    def pair(self, a, lobe):
        _, _, branches = self.at(a)
        return branches[lobe.unstable], branches[lobe.stable]


def _follow(U, S, root, shift, refine_tol):
    """Newton continuation of a contact U(s) = S(u) from where it was at a nearby parameter."""
    s0, u0 = root
    s, u = root
    for _ in range(30):
        pa, ta = U.evaluate(s)
        pb, tb = S.evaluate(u)
        residual = pa - pb
        try:
            step = np.linalg.solve(np.column_stack([ta, -tb]), -residual)
        except np.linalg.LinAlgError:
            return None
        s, u = s + step[0], u + step[1]
        if not (abs(s - s0) <= shift[0] and abs(u - u0) <= shift[1]):
            return None
        if not (0.0 <= s <= U.levels and 0.0 <= u <= S.levels):
            return None
        if np.linalg.norm(residual) <= refine_tol * (1.0 + np.linalg.norm(pa)) and np.max(np.abs(step)) <= PARAM_XTOL * (
            1.0 + abs(s) + abs(u)
        ):
            return s, u
    return None


def _lobe_gap(U, S, lobe, widen=1.0):
    """
    Largest signed height of the unstable arc across the stable curve, over
    a window around the lobe's last contacts.

    Returns:
        (height, peak, grid, heights, feet): the height is positive while
        the lobe is open and nonpositive once it has closed
    """
    (s1, u1), (s2, _) = lobe.roots
    half = 0.5 * (s2 - s1) * widen
    grid = np.linspace(s1 - half, s2 + half, GAP_SAMPLES)
    heights, feet = np.empty(len(grid)), np.empty(len(grid))
    u = u1
    for k, s in enumerate(grid):
        d, u = _signed_distance(U, S, s, u)
        heights[k], feet[k] = lobe.sigma * d, u
    if not (np.all(np.isfinite(heights)) and np.all(np.isfinite(feet))):
        return math.nan, math.nan, grid, heights, feet

    def lowered(s):
        return -lobe.sigma * _signed_distance(U, S, s, float(np.interp(s, grid, feet)))[0]

    k = int(np.argmax(heights))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    result = minimize_scalar(lowered, bounds=(lo, hi), method="bounded", options={"xatol": PARAM_XTOL * (1.0 + abs(hi))})
    peak, height = float(result.x), -float(result.fun)
    if heights[k] > height:
        peak, height = float(grid[k]), float(heights[k])
    return height, peak, grid, heights, feet


def _gap_roots(U, S, lobe, gap):
    """The two contacts on either side of the peak, or None if the window misses one."""
    _, peak, grid, heights, feet = gap
    left = np.nonzero((grid < peak) & (heights < 0.0))[0]
    right = np.nonzero((grid > peak) & (heights < 0.0))[0]
    if not len(left) or not len(right):
        return None

    def signed(s):
        return lobe.sigma * _signed_distance(U, S, s, float(np.interp(s, grid, feet)))[0]

    roots = []
    for lo, hi in ((grid[left[-1]], peak), (peak, grid[right[0]])):
        s = brentq(signed, lo, hi, xtol=PARAM_XTOL * (1.0 + abs(hi)), rtol=8.9e-16)
        _, u = _signed_distance(U, S, s, float(np.interp(s, grid, feet)))
        roots.append((float(s), float(u)))
    return tuple(roots)


def _judge(U, S, lobe):
    """Open, closed or lost, from the lobe height alone."""
    for widening in range(GAP_WIDENINGS):
        gap = _lobe_gap(U, S, lobe, 2.0**widening)
        grid, feet = gap[2], gap[4]
        if not (math.isfinite(gap[0]) and grid[0] >= 0.0 and grid[-1] <= U.levels):
            return _LobeState.LOST, None
        if not (feet.min() >= 0.0 and feet.max() <= S.levels):
            return _LobeState.LOST, None
        if widening == 0 and gap[0] <= 0.0:
            return _LobeState.CLOSED, None
        roots = _gap_roots(U, S, lobe, gap)
        if roots is not None:
            return _LobeState.OPEN, roots
    return _LobeState.LOST, None


def _track(family, lobe, a_from, a_to, refine_tol, depth=MAX_SUBSTEPS):
    """
    Carry a lobe that is open at a_from to a_to.

    Contacts are followed by Newton continuation. When that fails the step
    is halved, and only at the finest step is the lobe judged by its height.
    """
    U, S = family.pair(a_to, lobe)
    (s1, u1), (s2, u2) = lobe.roots
    shift = (0.5 * (s2 - s1), max(0.5 * abs(u2 - u1), FOLLOW_SHIFT))
    first = _follow(U, S, lobe.roots[0], shift, refine_tol)
    second = _follow(U, S, lobe.roots[1], shift, refine_tol) if first is not None else None
    if second is not None:
        return _LobeState.OPEN, (first, second)
    if depth == 0:
        return _judge(U, S, lobe)
    mid = 0.5 * (a_from + a_to)
    state, roots = _track(family, lobe, a_from, mid, refine_tol, depth - 1)
    if state is not _LobeState.OPEN:
        return state, roots
    return _track(family, _moved(family, mid, lobe, roots), mid, a_to, refine_tol, depth - 1)


def _step(family, lobes, a_from, a_to, refine_tol, threads):
    """Lobes still open at a_to (with their new contacts) and those that closed on the way."""
    results = map_ordered(lambda lobe: _track(family, lobe, a_from, a_to, refine_tol), lobes, threads)
    opened, closed = [], []
    for lobe, (state, roots) in zip(lobes, results):
        if state is _LobeState.OPEN:
            opened.append(_moved(family, a_to, lobe, roots))
        elif state is _LobeState.CLOSED:
            closed.append(lobe)
        else:
            logger.info("lost track of a lobe between a = %.9f and a = %.9f", a_from, a_to)
    return opened, closed


def _closing_parameter(family, lobe, lo, hi):
    """Zero of the lobe height in [lo, hi], or hi when the height keeps its sign."""

    def height(a):
        return _lobe_gap(*family.pair(a, lobe), lobe)[0]

    h_lo, h_hi = height(lo), height(hi)
    if not (h_lo <= 0.0 < h_hi):
        logger.warning("lobe height %.3e at %.9f and %.3e at %.9f; keeping the bracket top", h_lo, lo, h_hi, hi)
        return hi
    return float(brentq(height, lo, hi, xtol=1e-15, rtol=8.9e-16))


def _fold_point(U, S, lobe):
    """
    Parameters (s, u) of the point of the arc whose tangent is parallel to
    the stable curve, next to the peak of the lobe height.
    """
    _, peak, grid, _, feet = _lobe_gap(U, S, lobe)

    def turn(s):
        x, tu = U.evaluate(s)
        _, _, ts = _project(S, x, float(np.interp(s, grid, feet)))
        return _cross(ts / np.linalg.norm(ts), tu / np.linalg.norm(tu))

    spacing = grid[1] - grid[0]
    lo, hi = max(peak - spacing, grid[0]), min(peak + spacing, grid[-1])
    if turn(lo) * turn(hi) < 0.0:
        peak = float(brentq(turn, lo, hi, xtol=1e-15, rtol=8.9e-16))
    x, _ = U.evaluate(peak)
    u, _, _ = _project(S, x, float(np.interp(peak, grid, feet)))
    return peak, u


def _tangency_orbit(map_def, event, ubranch, sbranch):
    """
    Points, directions and one-step log g along the orbit of a tangency point.

    The past comes from forward images of the unstable seed point, the future
    from backward images of the stable seed point; both carry their branch
    tangent, transported along the orbit. The orbit switches leg at the
    contact: index J_u is the stable foot, so the forward step there is taken
    at the stable leg and the backward step at the unstable one.
    """
    level_u, t_u = ubranch.split_param(event.param_a)
    level_s, t_s = sbranch.split_param(event.param_b)
    J_u, J_s = level_u * ubranch.steps_per_level, level_s * sbranch.steps_per_level

    x = ubranch.seed_point(t_u)
    v = geometry.angle_of(ubranch.seed[1] - ubranch.seed[0])
    past, past_dirs, logs = [x], [v], []
    for _ in range(J_u):
        J = map_def.jacobian(x)
        logs.append(math.log(geometry.g_step(J, v)))
        v = geometry.g_transport(J, v)
        x = map_def.forward(x)
        past.append(x)
        past_dirs.append(v)

    # backward iteration is stable along W^s
    y = sbranch.seed_point(t_s)
    w = geometry.angle_of(sbranch.seed[1] - sbranch.seed[0])
    future, future_dirs = [y], [w]
    for _ in range(J_s):
        w = geometry.g_transport(map_def.backward_jacobian(y), w)
        y = map_def.backward(y)
        future.append(y)
        future_dirs.append(w)
    future, future_dirs = future[::-1], future_dirs[::-1]
    for n in range(J_s):
        logs.append(math.log(geometry.g_step(map_def.jacobian(future[n]), future_dirs[n])))

    points = np.array(past[:-1] + future)
    directions = past_dirs[:-1] + future_dirs
    leg_mismatch = float(np.linalg.norm(past[-1] - future[0]))
    return points, directions, logs, J_u, leg_mismatch


def _saddle_stable_logs(saddle):
    """One-step log g along the stable eigendirection over one period of the saddle."""
    theta = geometry.eigen_directions(saddle.derivative_at_period)[-1][1]
    logs = []
    for J in saddle.cycle_jacobians:
        logs.append(math.log(geometry.g_step(J, theta)))
        theta = geometry.g_transport(J, theta)
    return logs


def _window_scores(logs, window):
    C = np.concatenate([[0.0], np.cumsum(logs)])
    scores = np.empty(len(C))
    for j in range(len(C)):
        lo, hi = max(0, j - window), min(len(C) - 1, j + window)
        scores[j] = C[lo : hi + 1].min() - C[j]
    return scores


def locate_critical_iterate(map_def, saddle, event, ubranch, sbranch, window=TANGENCY_WINDOW):
    """
    Critical iterate on the orbit of a (near-)tangency point.

    The one-step g values of the tangent direction along the orbit, padded at
    the end with saddle-local stable steps until their product is at least 1,
    are split at their minimal cumulative product. The split index is the
    critical iterate; its single-direction window score is the largest on the
    orbit.

    Returns:
        dict with the critical iterate (time relative to the tangency point),
        its point and direction, the per-iterate window scores and the
        assembled Orbit, padded at both ends with the saddle
    """
    points, directions, logs, J_u, leg_mismatch = _tangency_orbit(map_def, event, ubranch, sbranch)
    padding = _saddle_stable_logs(saddle)
    padded = 0
    while sum(logs) < 0.0:
        logs.extend(padding)
        padded += len(padding)
        if padded > MAX_PADDING:
            raise BracketInvalid("tangency orbit does not return to the saddle")
    K = cocycle.cumulative_min_split(np.exp(logs))
    scores = _window_scores(logs, window)

    index = min(K, len(points) - 1)
    if index != K:
        logger.warning("critical iterate falls in the saddle padding; using the last orbit point")
    pad = np.repeat(saddle.location[None, :], window + abs(index - J_u), axis=0)
    full = np.vstack([pad, points, pad])
    lo = -J_u - len(pad)
    orb = dynamics.Orbit(full[-lo], lo, full, map_def.jacobian(full))
    return {
        "critical_iterate": K - J_u,
        "split_index": K,
        "point": points[index],
        "direction": directions[index],
        "iterate_scores": [(j - J_u, float(sc)) for j, sc in enumerate(scores)],
        "orbit": orb.shifted(index - J_u),
        "leg_mismatch": leg_mismatch,
    }


def first_tangency(
    b,
    a_range,
    budgets=(50.0, 50.0),
    tol=1e-6,
    curvature_tol=CURVATURE_TOL,
    refine_tol=REFINE_TOL,
    window=TANGENCY_WINDOW,
    saddle_exclusion=SADDLE_EXCLUSION,
    min_angle=MIN_BRACKET_ANGLE,
    max_pair_angle=MAX_PAIR_ANGLE,
    sweep_steps=SWEEP_STEPS,
    threads=1,
):
    """
    First homoclinic tangency of the outer saddle in the Hénon family.

    At a_hi the branches of the outer fixed point are grown to the arclength
    budgets inside the trapping box of a_hi. Each pair of consecutive
    contacts of an unstable branch with one level of a stable branch bounds
    a lobe. The lobes are carried down in a on the exact curves over the
    levels frozen at a_hi, with their contacts followed by continuation; a
    lobe closes only when its height across the stable curve reaches zero.
    A sweep of `sweep_steps` equal steps finds where the first lobe closes,
    bisection on "every lobe open" narrows that to width `tol`, and a_star
    is the zero of the closing lobe's height inside the final bracket.

    Args:
        b: Hénon parameter b (nonzero)
        a_range: (a_lo, a_hi) bracketing the tangency
        budgets: (unstable, stable) arclength budgets at a_hi
        tol: Final bracket width
        max_pair_angle: Largest angle of the closing lobe's contacts at the bracket top

    Returns:
        TangencyReport

    Raises:
        BracketInvalid: if a_hi lacks a transversal pattern, every lobe stays
            open down to a_lo, or the closing lobe does not end in a tangency
        NonInvertible: for b = 0
    """
    a_lo, a_hi = map(float, a_range)
    if not a_lo < a_hi:
        raise BracketInvalid("a_range must satisfy a_lo < a_hi")
    map_hi = dynamics.MapDef.henon(a_hi, b)
    saddle_hi = outer_saddle(map_hi)
    grown = _grow_all(map_hi, saddle_hi, budgets, curvature_tol, threads)
    lobes, events = _lobes(saddle_hi, grown, refine_tol, saddle_exclusion)
    if not events:
        raise BracketInvalid(f"no interior intersections at a = {a_hi}")
    angle_hi = min(e.angle for e in events)
    if angle_hi <= min_angle:
        raise BracketInvalid(f"smallest intersection angle {angle_hi:.3e} at a = {a_hi} is not transversal")
    if not lobes:
        raise BracketInvalid(f"no lobes at a = {a_hi}")
    logger.info("a = %g: %d interior intersections bounding %d lobes", a_hi, len(events), len(lobes))
    family = _Family(b, [br.levels for br in grown])

    opened = lobes
    grid = np.linspace(a_hi, a_lo, sweep_steps + 1)
    for a_from, a_to in zip(grid, grid[1:]):
        carried, closed = _step(family, opened, float(a_from), float(a_to), refine_tol, threads)
        if closed:
            break
        if not carried:
            raise BracketInvalid(f"every lobe was lost by a = {a_to}")
        opened = carried
    else:
        raise BracketInvalid(f"every lobe stays open down to a = {a_lo}")
    lo, hi = float(a_to), float(a_from)
    logger.info("a lobe closes in [%.6f, %.6f]", lo, hi)

    steps = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        carried, closed = _step(family, opened, hi, mid, refine_tol, threads)
        if closed:
            lo = mid
        elif carried:
            hi, opened = mid, carried
        else:
            raise BracketInvalid(f"every lobe was lost by a = {mid}")
        steps += 1
        logger.info("bisection %d: a = %.9f, %d lobes closed, bracket width %.2e", steps, mid, len(closed), hi - lo)

    _, closing = _step(family, opened, hi, lo, refine_tol, threads)
    if not closing:
        raise BracketInvalid(f"no lobe closes in [{lo}, {hi}]")
    # lobes on one tangency orbit close together; the first to close wins
    a_star, lobe = max(((_closing_parameter(family, lobe, lo, hi), lobe) for lobe in closing), key=lambda item: item[0])

    U_hi, S_hi = family.pair(hi, lobe)
    pair_angle = max(_event(U_hi, S_hi, -1, -1, s, u).angle for s, u in lobe.roots)
    if pair_angle > max_pair_angle:
        raise BracketInvalid(f"closing contacts meet at {pair_angle:.3e} rad at a = {hi}; not a tangency")
    map_star, saddle_star, _ = family.at(a_star)
    ubranch, sbranch = family.pair(a_star, lobe)
    event = _event(ubranch, sbranch, -1, -1, *_fold_point(ubranch, sbranch, lobe))
    if event.residual > CONTACT_TOL * (1.0 + np.linalg.norm(event.point)):
        raise BracketInvalid(f"closing lobe leaves a gap of {event.residual:.3e} at a = {a_star}")
    if event.angle > MAX_TANGENCY_ANGLE:
        raise BracketInvalid(f"branches meet at {event.angle:.3e} rad at a = {a_star}; not a tangency")

    located = locate_critical_iterate(map_star, saddle_star, event, ubranch, sbranch, window)
    report = criticality.criticality_score(map_star, located["orbit"], window)
    return TangencyReport(
        family_b=float(b),
        a_star=a_star,
        bracket=(lo, hi),
        tangency_point=event.point,
        tangency_angle=event.angle,
        tangency_direction=event.direction_a,
        contact_gap=event.residual,
        pair_angle=pair_angle,
        critical_iterate=located["critical_iterate"],
        critical_point_estimate=located["point"],
        critical_direction=located["direction"],
        split_index=located["split_index"],
        iterate_scores=located["iterate_scores"],
        critical_score=report.score,
        critical_best_direction=report.best_direction,
        direction_mismatch=geometry.rp1_distance(report.best_direction, located["direction"]),
        counts={"a_hi": len(events), "lobes": len(lobes), "closing": len(closing)},
        bisection_steps=steps,
        leg_mismatch=located["leg_mismatch"],
    )
