"""
Domination

Estimate the E/F splitting by projective power iteration, test the
finite-horizon domination condition

    log g^N(G^m F) < N log(1 + delta)    for 0 <= m <= m_horizon,

and certify domination independently with an invariant cone field.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from critset import cocycle, dynamics, geometry
from critset.errors import ConformalMatrix, DegenerateAngle, Escaped, MeshTooCoarse
from critset.parallel import map_ordered

logger = logging.getLogger(__name__)

ANGLE_RESOLUTION = 1e-8
TRANSPORT_HORIZON = 20
CONE_MARGIN = 1e-3
CONE_FACTOR = 1.0 + 1e-3
MESH_TOL = 1e-6
CONE_SAMPLES = 17


@dataclass
class SplittingEstimate:
    base: np.ndarray
    E: float
    F: float
    transport_horizon: int
    angle: float

    def to_dict(self):
        return {
            "base": self.base.tolist(),
            "E": self.E,
            "F": self.F,
            "transport_horizon": self.transport_horizon,
            "angle": self.angle,
        }


@dataclass
class Violation:
    point: np.ndarray
    m: int | None
    value: float | None
    tag: str

    def to_dict(self):
        return {"point": self.point.tolist(), "m": self.m, "value": self.value, "tag": self.tag}


@dataclass
class DominationReport:
    samples: int
    N: int
    delta: float
    max_ratio: float
    condition_star_holds: bool
    violations: list = field(default_factory=list)

    @property
    def margin(self):
        """log(1 + delta) - max_ratio; positive when every tested ratio is below the bound."""
        return math.log1p(self.delta) - self.max_ratio

    def to_dict(self):
        finite = math.isfinite(self.max_ratio)
        return {
            "samples": self.samples,
            "N": self.N,
            "delta": self.delta,
            "max_ratio": self.max_ratio if finite else None,
            "margin": self.margin if finite else None,
            "condition_star_holds": self.condition_star_holds,
            "violations": [v.to_dict() for v in self.violations],
        }


@dataclass
class ConeField:
    """Cones of a common half-width around one center direction per sample."""

    centers: np.ndarray
    half_width: float

    def __post_init__(self):
        self.centers = np.atleast_1d(np.asarray(self.centers, dtype=float)) % math.pi
        if not 0.0 < self.half_width <= math.pi / 4:
            raise ValueError("half_width must lie in (0, pi/4]")

    def center(self, i):
        return float(self.centers[0] if len(self.centers) == 1 else self.centers[i])


@dataclass
class ConeFieldReport:
    holds: bool
    samples: int
    steps: int
    half_width: float
    worst_invariance_gap: float
    worst_factor: float
    failures: list = field(default_factory=list)

    def __bool__(self):
        return self.holds

    def to_dict(self):
        return {
            "holds": self.holds,
            "samples": self.samples,
            "steps": self.steps,
            "half_width": self.half_width,
            "worst_invariance_gap": self.worst_invariance_gap,
            "worst_factor": self.worst_factor,
            "failures": [{"index": i, "reason": reason} for i, reason in self.failures],
        }


def _seed(jacobians):
    """Most expanded direction of the first Jacobian, or of the whole product when that one is conformal."""
    try:
        return geometry.singular_pair(jacobians[0]).f
    except ConformalMatrix:
        pass
    try:
        return geometry.singular_pair(dynamics.ordered_product(jacobians)).f
    except ConformalMatrix:
        raise DegenerateAngle(0.0) from None


def _transport(jacobians, theta):
    for M in jacobians:
        theta = geometry.g_transport(M, theta)
    return theta


def estimate_splitting(map_def, p, T, resolution=ANGLE_RESOLUTION):
    """
    E and F at p by projective power iteration.

    F is the most expanded direction of Df at f^-T(p) carried forward to p;
    E is the most expanded direction of Df^-1 at f^T(p) carried back to p.

    Args:
        map_def: MapDef
        p: Point, PeriodicPoint or Orbit
        T: Transport horizon

    Returns:
        SplittingEstimate

    Raises:
        Escaped: if the window [-T, T] leaves the escape radius
        DegenerateAngle: if E and F are closer than `resolution`
    """
    if T < 1:
        raise ValueError("transport horizon must be positive")
    orb = dynamics.resolve_orbit(map_def, p, T, T).require(T, T)
    forward = [orb.jacobian(n) for n in range(-T, 0)]
    backward = [orb.inverse_jacobian(n) for n in range(T, 0, -1)]
    # F is pushed from the past, E pulled from the future
    F = _transport(forward, _seed(forward))
    E = _transport(backward, _seed(backward))
    angle = geometry.rp1_distance(E, F)
    if angle < resolution:
        raise DegenerateAngle(angle)
    return SplittingEstimate(base=dynamics.base_point(p), E=E, F=F, transport_horizon=T, angle=angle)


def _check_sample(map_def, sample, N, bound, m_horizon, transport_horizon):
    """(largest tested log g^N, list of Violation) for one sample."""
    point = dynamics.base_point(sample)
    try:
        F = estimate_splitting(map_def, sample, transport_horizon).F
        orb = dynamics.resolve_orbit(map_def, sample, 0, m_horizon + N).require(0, m_horizon + N)
    except DegenerateAngle:
        return -math.inf, [Violation(point, None, None, "DegenerateAngle")]
    except Escaped as exc:
        return -math.inf, [Violation(point, None, None, f"Escaped({exc.index})")]

    log_g = cocycle.log_profiles(orb, [F], 0, m_horizon + N)[1][0]
    # log g^N at G^m F is a difference of the cumulative profile
    windows = log_g[N:] - log_g[: m_horizon + 1]
    violations = [Violation(point, m, float(v), "ConditionStar") for m, v in enumerate(windows) if not v < bound]
    return float(windows.max()), violations


def condition_star(map_def, samples, N, delta, m_horizon, transport_horizon=TRANSPORT_HORIZON, threads=1):
    """
    Test log g^N(G^m F) < N log(1 + delta) for every sample and 0 <= m <= m_horizon.

    Samples without a resolvable splitting, or whose window escapes, are
    recorded as violations with a tag instead of raising.

    Returns:
        DominationReport
    """
    if N < 1 or m_horizon < 0:
        raise ValueError("N must be positive and m_horizon nonnegative")
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    samples = list(samples)
    bound = N * math.log1p(delta)
    results = map_ordered(
        lambda s: _check_sample(map_def, s, N, bound, m_horizon, transport_horizon), samples, threads
    )
    violations = [v for _, vs in results for v in vs]
    max_ratio = max((worst for worst, _ in results), default=-math.inf) / N
    if violations:
        logger.warning("condition (*) failed at %d of %d checks", len(violations), len(samples) * (m_horizon + 1))
    return DominationReport(
        samples=len(samples),
        N=N,
        delta=delta,
        max_ratio=max_ratio,
        condition_star_holds=not violations,
        violations=violations,
    )


def splitting_cone_field(map_def, samples, half_width, transport_horizon=TRANSPORT_HORIZON):
    """Cone field centered on the estimated F at every sample."""
    centers = [estimate_splitting(map_def, s, transport_horizon).F for s in samples]
    return ConeField(np.array(centers), half_width)


def verify_cone_field(map_def, samples, cone, steps=1, mesh_tol=MESH_TOL, margin=CONE_MARGIN, factor=CONE_FACTOR):
    """
    Check that a cone field is forward invariant and dominated.

    For every sample x, with y the sample nearest to f^steps(x):

    - Df^steps maps the cone at x into the cone at y shrunk by `margin`;
    - the smallest g^steps over the dual cone, of the same half-width around
      the most contracted direction of Df^steps at x, is at least `factor`
      times the largest g^steps over the cone at x.

    Args:
        map_def: MapDef
        samples: Points, PeriodicPoints or Orbits
        cone: ConeField with one center per sample (or a single center)
        steps: Number of iterates per check

    Returns:
        ConeFieldReport (truthy when the field is verified)

    Raises:
        MeshTooCoarse: if an image is farther than mesh_tol from every sample
    """
    samples = list(samples)
    points = np.array([dynamics.base_point(s) for s in samples])
    tree = cKDTree(points)
    offsets = np.linspace(-cone.half_width, cone.half_width, CONE_SAMPLES)

    failures = []
    worst_gap = math.inf
    worst_factor = math.inf
    for i, sample in enumerate(samples):
        orb = dynamics.resolve_orbit(map_def, sample, 0, steps).require(0, steps)
        distance, j = tree.query(orb.point(steps))
        # the image must land on the mesh to have a cone to compare with
        if distance > mesh_tol:
            raise MeshTooCoarse(f"image of sample {i} is {distance:.3e} from the nearest sample")

        M = dynamics.ordered_product([orb.jacobian(n) for n in range(steps)])
        center, target = cone.center(i), cone.center(int(j))
        images = [geometry.g_transport(M, center + t) for t in offsets]
        gap = cone.half_width - margin - max(geometry.rp1_distance(d, target) for d in images)
        worst_gap = min(worst_gap, gap)
        if gap < 0.0:
            failures.append((i, "cone not mapped inside its target"))
            continue

        try:
            e = geometry.singular_pair(M).e
        except ConformalMatrix:
            failures.append((i, "conformal derivative"))
            continue
        cone_max = max(geometry.g_step(M, center + t) for t in offsets)
        dual_min = min(geometry.g_step(M, e + t) for t in offsets)
        ratio = dual_min / cone_max
        worst_factor = min(worst_factor, ratio)
        if ratio < factor:
            failures.append((i, "dual cone not dominated"))

    if failures:
        logger.info("cone field failed at %d of %d samples", len(failures), len(samples))
    return ConeFieldReport(
        holds=not failures,
        samples=len(samples),
        steps=steps,
        half_width=cone.half_width,
        worst_invariance_gap=worst_gap,
        worst_factor=worst_factor,
        failures=failures,
    )
