"""
Dynamics

Planar diffeomorphisms (linear maps, the Hénon family f(x, y) = (x^2 - a - b y, x),
compositions and inverses), orbits with escape handling, periodic points and
sampling of invariant sets.

All map evaluations are vectorised: points are arrays of shape (..., 2) and
Jacobians arrays of shape (..., 2, 2).
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from critset import config, geometry
from critset.errors import Escaped, NonInvertible
from critset.parallel import map_ordered

logger = logging.getLogger(__name__)

NEWTON_MAX_ITER = 50
NEWTON_STEP_TOL = 1e-12
PERIODIC_RESIDUAL_TOL = 1e-10
MERGE_DISTANCE = 1e-6


class TimeDirection(Enum):
    FORWARD = "Forward"
    BACKWARD = "Backward"


# --- families -----------------------------------------------------------------


@dataclass(frozen=True)
class Linear:
    matrix: tuple

    def __post_init__(self):
        M = geometry.as_matrix(self.matrix)
        object.__setattr__(self, "matrix", tuple(map(tuple, M.tolist())))
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        if not abs(det) > config.DET_FLOOR:
            raise NonInvertible(f"linear map with det = {det} is not invertible")

    @cached_property
    def _M(self):
        return np.array(self.matrix)

    @cached_property
    def _Minv(self):
        return np.linalg.inv(self._M)

    def forward(self, P):
        return P @ self._M.T

    def backward(self, P):
        return P @ self._Minv.T

    def jacobian(self, P):
        return np.broadcast_to(self._M, P.shape[:-1] + (2, 2)).copy()

    def backward_jacobian(self, P):
        return np.broadcast_to(self._Minv, P.shape[:-1] + (2, 2)).copy()

    def describe(self):
        return {"family": "linear", "matrix": [list(row) for row in self.matrix]}


@dataclass(frozen=True)
class Henon:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("Hénon parameters must be finite")
        if self.b == 0.0:
            raise NonInvertible("Hénon map with b = 0 has no inverse")

    def forward(self, P):
        x, y = P[..., 0], P[..., 1]
        return np.stack([x * x - self.a - self.b * y, x], axis=-1)

    def backward(self, P):
        X, Y = P[..., 0], P[..., 1]
        # (X, Y) = f(x, y) gives x = Y, y = (Y^2 - a - X) / b
        return np.stack([Y, (Y * Y - self.a - X) / self.b], axis=-1)

    def jacobian(self, P):
        J = np.zeros(P.shape[:-1] + (2, 2))
        J[..., 0, 0] = 2.0 * P[..., 0]
        J[..., 0, 1] = -self.b
        J[..., 1, 0] = 1.0
        return J

    def backward_jacobian(self, P):
        J = np.zeros(P.shape[:-1] + (2, 2))
        J[..., 0, 1] = 1.0
        J[..., 1, 0] = -1.0 / self.b
        J[..., 1, 1] = 2.0 * P[..., 1] / self.b
        return J

    def describe(self):
        return {"family": "henon", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Composed:
    """maps[0] is applied first."""

    maps: tuple

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        if not self.maps:
            raise ValueError("a composed map needs at least one factor")

    def forward(self, P):
        for m in self.maps:
            P = m.family.forward(P)
        return P

    def backward(self, P):
        for m in reversed(self.maps):
            P = m.family.backward(P)
        return P

    def jacobian(self, P):
        J = np.broadcast_to(np.eye(2), P.shape[:-1] + (2, 2)).copy()
        for m in self.maps:
            J = m.family.jacobian(P) @ J
            P = m.family.forward(P)
        return J

    def backward_jacobian(self, P):
        J = np.broadcast_to(np.eye(2), P.shape[:-1] + (2, 2)).copy()
        for m in reversed(self.maps):
            J = m.family.backward_jacobian(P) @ J
            P = m.family.backward(P)
        return J

    def describe(self):
        return {"family": "composed", "maps": [m.describe() for m in self.maps]}


@dataclass(frozen=True)
class Inverse:
    map: "MapDef"

    def forward(self, P):
        return self.map.family.backward(P)

    def backward(self, P):
        return self.map.family.forward(P)

    def jacobian(self, P):
        return self.map.family.backward_jacobian(P)

    def backward_jacobian(self, P):
        return self.map.family.jacobian(P)

    def describe(self):
        return {"family": "inverse", "map": self.map.describe()}


@dataclass(frozen=True)
class MapDef:
    """A planar diffeomorphism together with its escape radius."""

    family: object
    escape_radius: float = config.ESCAPE_RADIUS

    def __post_init__(self):
        if not self.escape_radius > 0.0:
            raise ValueError("escape_radius must be positive")

    @classmethod
    def henon(cls, a, b, escape_radius=config.ESCAPE_RADIUS):
        return cls(Henon(float(a), float(b)), escape_radius)

    @classmethod
    def linear(cls, matrix, escape_radius=config.ESCAPE_RADIUS):
        return cls(Linear(matrix), escape_radius)

    @classmethod
    def composed(cls, maps, escape_radius=config.ESCAPE_RADIUS):
        return cls(Composed(tuple(maps)), escape_radius)

    def inverse(self):
        if isinstance(self.family, Inverse):
            return self.family.map
        return MapDef(Inverse(self), self.escape_radius)

    def power(self, n):
        """f^n for n != 0 as a composed map."""
        if n == 0:
            raise ValueError("power 0 is the identity, not a map definition")
        base = self if n > 0 else self.inverse()
        if abs(n) == 1:
            return base
        return MapDef(Composed((base,) * abs(n)), self.escape_radius)

    def forward(self, P):
        return self.family.forward(np.asarray(P, dtype=float))

    def backward(self, P):
        return self.family.backward(np.asarray(P, dtype=float))

    def jacobian(self, P):
        return self.family.jacobian(np.asarray(P, dtype=float))

    def backward_jacobian(self, P):
        return self.family.backward_jacobian(np.asarray(P, dtype=float))

    def escaped(self, P):
        """Boolean mask of points outside the escape radius (or non-finite)."""
        P = np.asarray(P, dtype=float)
        norm = np.hypot(P[..., 0], P[..., 1])
        return ~(norm <= self.escape_radius)

    def describe(self):
        return {**self.family.describe(), "escape_radius": self.escape_radius}


@dataclass(frozen=True)
class Box:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def contains(self, P):
        P = np.asarray(P, dtype=float)
        x, y = P[..., 0], P[..., 1]
        return (x >= self.xmin) & (x <= self.xmax) & (y >= self.ymin) & (y <= self.ymax)

    def grid(self, n):
        xs = np.linspace(self.xmin, self.xmax, n)
        ys = np.linspace(self.ymin, self.ymax, n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=-1)

    def to_list(self):
        return [[self.xmin, self.xmax], [self.ymin, self.ymax]]


def trapping_box(map_def, pad=0.02):
    """
    Computational domain for a map.

    For the Hénon family every bounded orbit lies in the square of half-width
    R = (1 + |b| + sqrt((1 + |b|)^2 + 4a)) / 2; other maps use the escape
    square.
    """
    family = map_def.family
    if isinstance(family, Henon):
        s = 1.0 + abs(family.b)
        R = 0.5 * (s + math.sqrt(max(s * s + 4.0 * family.a, 0.0)))
        R = max(R, 1.0) * (1.0 + pad)
        # pad so the saddle itself is strictly inside
    else:
        R = map_def.escape_radius
    return Box(-R, R, -R, R)


# --- steps and orbits ---------------------------------------------------------


def step(map_def, p, direction=TimeDirection.FORWARD):
    """
    Apply f (or f^-1) once.

    Args:
        map_def: MapDef
        p: Point (x, y)
        direction: TimeDirection

    Returns:
        (image, Jacobian of the applied map at p)

    Raises:
        Escaped: if the image leaves the escape radius
    """
    p = np.asarray(p, dtype=float)
    if direction is TimeDirection.FORWARD:
        image, jac, index = map_def.forward(p), map_def.jacobian(p), 1
    else:
        image, jac, index = map_def.backward(p), map_def.backward_jacobian(p), -1
    if map_def.escaped(image):
        raise Escaped(index, image)
    return image, jac


@dataclass
class Orbit:
    """
    Orbit window f^n(base), n in [lo, hi].

    jacobians[n] is Df at points[n]; escaped_at is the signed index of the
    last stored point on the side where the orbit escaped.
    """

    base: np.ndarray
    lo: int
    points: np.ndarray
    jacobians: np.ndarray
    escaped_at: int | None = None

    @property
    def hi(self):
        return self.lo + len(self.points) - 1

    def point(self, n):
        return self.points[n - self.lo]

    def jacobian(self, n):
        return self.jacobians[n - self.lo]

    def inverse_jacobian(self, n):
        """Jacobian of f^-1 at points[n], i.e. Df(points[n-1])^-1."""
        return np.linalg.inv(self.jacobians[n - 1 - self.lo])

    def covers(self, n_back, n_fwd):
        return self.lo <= -n_back and self.hi >= n_fwd

    def require(self, n_back, n_fwd):
        """Raise Escaped, with the index of the failing step, unless [-n_back, n_fwd] is stored."""
        if self.hi < n_fwd:
            raise Escaped(self.hi + 1, self.point(self.hi))
        if self.lo > -n_back:
            raise Escaped(self.lo - 1, self.point(self.lo))
        return self

    def window(self, n_back, n_fwd):
        """Restrict to [-n_back, n_fwd]; missing steps are reported as escape."""
        lo = max(self.lo, -n_back)
        hi = min(self.hi, n_fwd)
        escaped_at = None
        if self.lo > -n_back:
            escaped_at = self.lo
        elif self.hi < n_fwd:
            escaped_at = self.hi
        sl = slice(lo - self.lo, hi - self.lo + 1)
        return Orbit(self.point(0), lo, self.points[sl], self.jacobians[sl], escaped_at)

    def shifted(self, k):
        """The same orbit re-indexed so that points[k] becomes the base."""
        escaped_at = None if self.escaped_at is None else self.escaped_at - k
        return Orbit(self.point(k), self.lo - k, self.points, self.jacobians, escaped_at)

    def to_dict(self):
        return {
            "base": self.base.tolist(),
            "lo": self.lo,
            "hi": self.hi,
            "points": self.points.tolist(),
            "escaped_at": self.escaped_at,
        }


def orbit(map_def, p, n_back, n_fwd):
    """
    Compute both half-orbits of p.

    Escape is encoded in the result: iteration on a side stops at the last
    point inside the escape radius and escaped_at records it.
    """
    if n_back < 0 or n_fwd < 0:
        raise ValueError("window lengths must be nonnegative")
    p = np.asarray(p, dtype=float)
    if map_def.escaped(p):
        return Orbit(p, 0, p[None, :], map_def.jacobian(p)[None], escaped_at=0)

    forward_pts = [p]
    escaped_at = None
    for n in range(n_fwd):
        q = map_def.forward(forward_pts[-1])
        if map_def.escaped(q):
            escaped_at = n
            break
        forward_pts.append(q)

    backward_pts = []
    current = p
    for n in range(n_back):
        q = map_def.backward(current)
        if map_def.escaped(q):
            if escaped_at is None or n < abs(escaped_at):
                escaped_at = -n
            break
        backward_pts.append(q)
        current = q

    points = np.array(backward_pts[::-1] + forward_pts)
    return Orbit(p, -len(backward_pts), points, map_def.jacobian(points), escaped_at)


def resolve_orbit(map_def, source, n_back, n_fwd):
    """
    Orbit window for any orbit source: a point, a PeriodicPoint (its cycle
    is replayed exactly) or a precomputed Orbit.
    """
    if isinstance(source, Orbit):
        return source.window(n_back, n_fwd)
    if isinstance(source, PeriodicPoint):
        return source.orbit(n_back, n_fwd)
    return orbit(map_def, source, n_back, n_fwd)


def base_point(source):
    if isinstance(source, Orbit):
        return source.base
    if isinstance(source, PeriodicPoint):
        return source.location
    return np.asarray(source, dtype=float)


def ordered_product(jacobians):
    """J[n-1] ... J[1] J[0]."""
    P = np.eye(2)
    for J in jacobians:
        P = J @ P
    return P


# --- periodic points ----------------------------------------------------------


@dataclass
class PeriodicPoint:
    location: np.ndarray
    period: int
    derivative_at_period: np.ndarray
    linear_class: geometry.LinearClass
    eigenvalues: tuple
    cycle: np.ndarray = field(repr=False)
    cycle_jacobians: np.ndarray = field(repr=False)

    def members(self):
        """One PeriodicPoint per point of the cycle, each with its own phase."""
        out = []
        for k in range(self.period):
            cycle = np.roll(self.cycle, -k, axis=0)
            jacs = np.roll(self.cycle_jacobians, -k, axis=0)
            D = ordered_product(jacs)
            out.append(
                PeriodicPoint(
                    location=cycle[0],
                    period=self.period,
                    derivative_at_period=D,
                    linear_class=self.linear_class,
                    eigenvalues=self.eigenvalues,
                    cycle=cycle,
                    cycle_jacobians=jacs,
                )
            )
        return out

    def orbit(self, n_back, n_fwd):
        idx = np.arange(-n_back, n_fwd + 1) % self.period
        return Orbit(self.location, -n_back, self.cycle[idx], self.cycle_jacobians[idx])

    def to_dict(self):
        return {
            "location": self.location.tolist(),
            "period": self.period,
            "class": self.linear_class.value,
            "derivative_at_period": self.derivative_at_period.tolist(),
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "cycle": self.cycle.tolist(),
        }


def periodic_point_from_cycle(map_def, cycle):
    """Build a PeriodicPoint whose location is the lexicographically smallest cycle point."""
    cycle = np.asarray(cycle, dtype=float)
    start = min(range(len(cycle)), key=lambda i: (cycle[i, 0], cycle[i, 1]))
    cycle = np.roll(cycle, -start, axis=0)
    jacs = map_def.jacobian(cycle)
    D = ordered_product(jacs)
    eig = tuple(complex(z) for z in np.linalg.eigvals(D))
    return PeriodicPoint(
        location=cycle[0],
        period=len(cycle),
        derivative_at_period=D,
        linear_class=geometry.classify_linear(D),
        eigenvalues=eig,
        cycle=cycle,
        cycle_jacobians=jacs,
    )


def _iterate(map_def, x, n):
    """f^n(x) and the Jacobian product, raising Escaped on the way out."""
    P = np.eye(2)
    for i in range(n):
        P = map_def.jacobian(x) @ P
        x = map_def.forward(x)
        if map_def.escaped(x):
            raise Escaped(i + 1, x)
    return x, P


def _newton_periodic(map_def, seed, period):
    """Damped Newton on f^period(x) - x = 0; None when it fails."""
    x = np.asarray(seed, dtype=float)
    try:
        image, P = _iterate(map_def, x, period)
    except Escaped:
        return None
    residual = image - x
    for _ in range(NEWTON_MAX_ITER):
        J = P - np.eye(2)
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if abs(det) <= 1e-12 * max(1.0, float(np.sum(J * J))):
            return None
        dx = -np.linalg.solve(J, residual)
        damping = 1.0
        norm = np.linalg.norm(residual)
        # halve until the residual stops growing
        while True:
            trial = x + damping * dx
            try:
                image, P_trial = _iterate(map_def, trial, period)
                trial_residual = image - trial
                trial_norm = np.linalg.norm(trial_residual)
            except Escaped:
                trial_norm = math.inf
            if trial_norm <= norm or damping < 1e-6:
                break
            damping *= 0.5
        if not math.isfinite(trial_norm):
            return None
        x, residual, P = trial, trial_residual, P_trial
        if np.linalg.norm(damping * dx) < NEWTON_STEP_TOL:
            return x
    return None


def _minimal_cycle(map_def, x, period):
    """Cycle of x for its minimal period dividing `period`, or None."""
    tol = PERIODIC_RESIDUAL_TOL * (1.0 + np.linalg.norm(x))
    for d in _divisors(period):
        try:
            image, _ = _iterate(map_def, x, d)
        except Escaped:
            return None
        if np.linalg.norm(image - x) < tol:
            cycle = [x]
            for _ in range(d - 1):
                cycle.append(map_def.forward(cycle[-1]))
            return np.array(cycle)
    return None


def _divisors(n):
    return [d for d in range(1, n + 1) if n % d == 0]


def _merge(points):
    """Sort then drop representatives closer than MERGE_DISTANCE."""
    points = sorted(points, key=lambda pp: (pp.period, pp.location[0], pp.location[1]))
    kept = []
    for pp in points:
        if not any(
            q.period == pp.period and np.linalg.norm(q.location - pp.location) < MERGE_DISTANCE
            for q in kept
        ):
            kept.append(pp)
    return kept


def find_periodic_points(map_def, period, region, grid, threads=1):
    """
    Periodic points of f in a box.

    Newton's method on f^d - id for every divisor d of `period`, seeded on a
    grid x grid lattice over `region`. Each orbit is reported once, by its
    lexicographically smallest point and with its minimal period.

    Args:
        map_def: MapDef
        period: Positive integer
        region: Box
        grid: Seeds per axis
        threads: Worker count for seeding

    Returns:
        List of PeriodicPoint sorted by (period, x, y)
    """
    if period < 1 or grid < 1:
        raise ValueError("period and grid must be positive")
    seeds = list(region.grid(grid))
    found = []
    for d in _divisors(period):
        roots = map_ordered(lambda s, d=d: _newton_periodic(map_def, s, d), seeds, threads)
        for x in roots:
            if x is None:
                continue
            cycle = _minimal_cycle(map_def, x, d)
            if cycle is not None:
                found.append(periodic_point_from_cycle(map_def, cycle))
    kept = _merge(found)
    logger.info("period %d: %d orbits from %d seeds", period, len(kept), len(seeds))
    return kept


def _primitive_necklaces(n):
    """Binary words of length n, one per rotation class, excluding non-primitive ones."""
    words = []
    for word in itertools.product((-1, 1), repeat=n):
        rotations = [word[i:] + word[:i] for i in range(n)]
        if word != min(rotations):
            continue
        if any(n % d == 0 and word == word[d:] + word[:d] for d in range(1, n)):
            continue
        words.append(word)
    return words


def horseshoe_cycles(map_def, period, sweeps=400):
    """
    All primitive periodic orbits of a given period in the Hénon horseshoe.

    Each symbol word s is seeded with the square-root branch iteration
    x_i = s_i sqrt(a + x_{i+1} + b x_{i-1}) and polished by Newton's method on
    the cyclic system x_{i+1} - x_i^2 + a + b x_{i-1} = 0.

    Returns:
        List of PeriodicPoint (orbits whose Newton polish fails are skipped)
    """
    family = map_def.family
    if not isinstance(family, Henon):
        raise ValueError("horseshoe_cycles needs a Hénon map")
    a, b = family.a, family.b
    n = period
    cycles = []
    for word in _primitive_necklaces(n):
        s = np.array(word, dtype=float)
        x = s * math.sqrt(max(a, 0.0))
        for _ in range(sweeps):
            previous = x.copy()
            for i in range(n):
                x[i] = s[i] * math.sqrt(max(a + x[(i + 1) % n] + b * x[(i - 1) % n], 0.0))
            if np.max(np.abs(x - previous)) < 1e-14:
                break
        for _ in range(NEWTON_MAX_ITER):
            R = np.roll(x, -1) - x * x + a + b * np.roll(x, 1)
            J = np.zeros((n, n))
            for i in range(n):
                J[i, (i + 1) % n] += 1.0
                J[i, i] += -2.0 * x[i]
                J[i, (i - 1) % n] += b
            dx = np.linalg.solve(J, -R)
            x = x + dx
            if np.max(np.abs(dx)) < NEWTON_STEP_TOL:
                break
        R = np.roll(x, -1) - x * x + a + b * np.roll(x, 1)
        if not np.max(np.abs(R)) < PERIODIC_RESIDUAL_TOL:
            logger.warning("symbol word %s did not converge (residual %.2e)", word, np.max(np.abs(R)))
            continue
        # y_i = x_{i-1}
        cycle = np.stack([x, np.roll(x, 1)], axis=-1)
        cycles.append(periodic_point_from_cycle(map_def, cycle))
    return _merge(cycles)


# --- samples of invariant sets ------------------------------------------------


def grid_samples(map_def, region, n, survive):
    """Grid points whose orbit stays inside the escape radius for `survive` steps both ways."""
    return surviving(map_def, region.grid(n), survive)


def surviving(map_def, P, steps):
    """Points of P whose orbit stays inside the escape radius for `steps` steps both ways."""
    P = np.asarray(P, dtype=float)
    alive = np.ones(len(P), dtype=bool)
    fwd, bwd = P.copy(), P.copy()
    for _ in range(steps):
        with np.errstate(over="ignore", invalid="ignore"):
            fwd = map_def.forward(fwd)
            bwd = map_def.backward(bwd)
        alive &= ~map_def.escaped(fwd) & ~map_def.escaped(bwd)
    return [p for p in P[alive]]


def attractor_samples(map_def, start, count, burn_in=1000, stride=1):
    """Points of a long forward orbit after a burn-in."""
    x = np.asarray(start, dtype=float)
    out = []
    for i in range(burn_in + count * stride):
        x = map_def.forward(x)
        if map_def.escaped(x):
            raise Escaped(i + 1, x)
        if i >= burn_in and (i - burn_in) % stride == 0:
            out.append(x.copy())
    return out


def periodic_samples(map_def, max_period, region=None, grid=21, threads=1):
    """
    Every point of every periodic orbit up to `max_period`.

    Hénon maps use the symbolic horseshoe seeding; other maps the grid
    Newton search over `region`.
    """
    cycles = []
    for period in range(1, max_period + 1):
        if isinstance(map_def.family, Henon):
            cycles.extend(horseshoe_cycles(map_def, period))
        else:
            region = region or trapping_box(map_def)
            cycles.extend(p for p in find_periodic_points(map_def, period, region, grid, threads) if p.period == period)
    return [member for pp in cycles for member in pp.members()]
