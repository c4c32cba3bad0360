"""
Projective cocycle

Windowed products of the projective cocycle in log scale, Lyapunov
exponents, Pliss times and the cumulative-product split.

Along an orbit x_n = f^n(x) and a direction v the trace is

    log g^n(v) = sum_{i<n} log g_{x_i}(G^i v)
               = log|det Df^n| - 2 log|Df^n v|,

accumulated one step at a time with renormalised directions so that long
windows on expanding orbits never overflow.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from critset import dynamics, geometry
from critset.errors import EmptyHypothesis, HypothesisFailed

logger = logging.getLogger(__name__)

REORTHONORMALIZE_EVERY = 10
LOG_TOL = 1e-9


@dataclass
class CocycleTrace:
    base: np.ndarray
    initial: float
    window: tuple
    lo: int
    log_g: np.ndarray
    directions: np.ndarray
    escaped: int | None = None

    @property
    def hi(self):
        return self.lo + len(self.log_g) - 1

    def at(self, n):
        return float(self.log_g[n - self.lo])

    def direction(self, n):
        return float(self.directions[n - self.lo])

    def to_dict(self):
        return {
            "base": self.base.tolist(),
            "initial": self.initial,
            "window": list(self.window),
            "indices": list(range(self.lo, self.hi + 1)),
            "log_g": self.log_g.tolist(),
            "directions": self.directions.tolist(),
            "escaped": self.escaped,
        }


@dataclass
class PlissTimes:
    gamma0: float
    gamma1: float
    bound_a: float
    times: list
    density: float

    def to_dict(self):
        return {
            "gamma0": self.gamma0,
            "gamma1": self.gamma1,
            "bound_a": self.bound_a,
            "times": list(self.times),
            "density": self.density,
        }


@dataclass
class LyapunovEstimate:
    lambda_plus: float
    lambda_minus: float
    horizon: int

    def to_dict(self):
        return {"lambda_plus": self.lambda_plus, "lambda_minus": self.lambda_minus, "horizon": self.horizon}


def log_profiles(orb, thetas, n_back, n_fwd):
    """
    Traces of many initial directions along one orbit window.

    Args:
        orb: Orbit covering (part of) [-n_back, n_fwd]
        thetas: 1-D array of initial directions
        n_back, n_fwd: Requested window

    Returns:
        (lo, log_g, directions) where log_g and directions have shape
        (len(thetas), hi - lo + 1) and column n - lo holds time n; the window
        is clipped to what the orbit covers
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    lo = max(orb.lo, -n_back)
    hi = min(orb.hi, n_fwd)
    width = hi - lo + 1
    log_g = np.zeros((len(thetas), width))
    directions = np.zeros((len(thetas), width))
    U0 = np.stack([np.cos(thetas), np.sin(thetas)], axis=-1)
    directions[:, -lo] = thetas % math.pi

    # forward leg from column -lo (n = 0)
    U = U0
    for n in range(0, hi):
        M = orb.jacobian(n)
        log_det = math.log(abs(geometry.checked_det(M)))
        W = U @ M.T
        sq = np.einsum("ij,ij->i", W, W)
        log_g[:, n + 1 - lo] = log_g[:, n - lo] + log_det - np.log(sq)
        U = W / np.sqrt(sq)[:, None]
        directions[:, n + 1 - lo] = np.arctan2(U[:, 1], U[:, 0]) % math.pi

    # backward leg with the inverse Jacobians
    U = U0
    for n in range(0, lo, -1):
        M = orb.inverse_jacobian(n)
        log_det = math.log(abs(geometry.checked_det(M)))
        W = U @ M.T
        sq = np.einsum("ij,ij->i", W, W)
        log_g[:, n - 1 - lo] = log_g[:, n - lo] + log_det - np.log(sq)
        U = W / np.sqrt(sq)[:, None]
        directions[:, n - 1 - lo] = np.arctan2(U[:, 1], U[:, 0]) % math.pi

    # arctan2 % pi can land on pi itself for directions just below the axis
    directions[directions >= math.pi] = 0.0
    return lo, log_g, directions


def trace(map_def, p, v, n_back, n_fwd):
    """
    Cocycle trace of direction v at p over [-n_back, n_fwd].

    The backward leg uses Jacobians of the inverse map, so the entry at -n is
    log|g^{-n}(v)|. Escape shortens the trace and is recorded, not raised.

    Args:
        map_def: MapDef
        p: Point, PeriodicPoint or Orbit
        v: Initial direction
        n_back, n_fwd: Window lengths

    Returns:
        CocycleTrace
    """
    orb = dynamics.resolve_orbit(map_def, p, n_back, n_fwd)
    lo, log_g, directions = log_profiles(orb, [v], n_back, n_fwd)
    return CocycleTrace(
        base=dynamics.base_point(p),
        initial=geometry.normalize_angle(v),
        window=(n_back, n_fwd),
        lo=lo,
        log_g=log_g[0],
        directions=directions[0],
        escaped=orb.escaped_at,
    )


def lyapunov(map_def, p, horizon, reorthonormalize_every=REORTHONORMALIZE_EVERY, transient=None):
    """
    Finite-horizon Lyapunov exponents along the forward orbit of p.

    The Jacobian product is carried as Q R with Q orthogonal, re-orthonormalised
    with a QR factorisation every few steps. The first `transient` steps only
    align the leading column of Q with the expanding direction; the largest
    exponent is the mean log-growth of that column over the remaining steps,
    which drops the O(1/horizon) bias of log s_max(product) / horizon. The
    smaller exponent follows from the determinant over the same steps.

    Args:
        transient: Steps discarded before averaging; horizon // 2 when None

    Raises:
        Escaped: if the orbit leaves the domain before `horizon`
    """
    if horizon < 1:
        raise ValueError("horizon must be positive")
    if transient is None:
        transient = horizon // 2
    if not 0 <= transient < horizon:
        raise ValueError("transient must lie in [0, horizon)")
    orb = dynamics.resolve_orbit(map_def, p, 0, horizon).require(0, horizon)

    A = np.eye(2)
    log_growth = 0.0
    log_det = 0.0
    start = 0
    for n in range(horizon):
        J = orb.jacobian(n)
        det = geometry.checked_det(J)
        if n >= transient:
            log_det += math.log(abs(det))
        A = J @ A
        # block boundaries include the end of the transient
        if (n + 1) % reorthonormalize_every == 0 or n + 1 in (transient, horizon):
            Q, R = np.linalg.qr(A)
            if start >= transient:
                log_growth += math.log(abs(R[0, 0]))
            A = Q
            start = n + 1
    steps = horizon - transient
    lambda_plus = log_growth / steps
    lambda_minus = log_det / steps - lambda_plus
    return LyapunovEstimate(lambda_plus=lambda_plus, lambda_minus=lambda_minus, horizon=horizon)


def _positive_logs(seq):
    values = np.asarray(seq, dtype=float)
    if values.ndim != 1 or len(values) == 0:
        raise ValueError("sequence must be a nonempty list of reals")
    if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
        raise ValueError("sequence entries must be finite and positive")
    return np.log(values)


def pliss_times(seq, gamma0, gamma1, bound_a=None):
    """
    All Pliss times of a contracting sequence.

    t is a Pliss time when prod_{i=t+1}^{k} a_i < gamma1^(k-t) for every
    t < k <= n-1. With C_j the partial sums of log a_i - log gamma1 this reads
    C_t > max_{k>t} C_k, so one right-to-left scan finds the whole set.

    Args:
        seq: Positive reals a_0..a_{n-1}
        gamma0, gamma1: Rates with 0 < gamma0 < gamma1
        bound_a: Entries must lie in (1/bound_a, bound_a); inferred when None

    Returns:
        PlissTimes

    Raises:
        EmptyHypothesis: if prod seq >= gamma0^n
    """
    if not 0.0 < gamma0 < gamma1:
        raise ValueError("need 0 < gamma0 < gamma1")
    logs = _positive_logs(seq)
    n = len(logs)
    extreme = float(np.max(np.abs(logs)))
    if bound_a is None:
        bound_a = math.exp(extreme) * (1.0 + 1e-12)
        # strict inequality needs a hair of room
    elif not extreme < math.log(bound_a):
        raise ValueError(f"entries must lie in (1/{bound_a}, {bound_a})")
    if not float(np.sum(logs)) < n * math.log(gamma0):
        raise EmptyHypothesis(f"product of the sequence is not below gamma0^{n}")

    C = np.cumsum(logs - math.log(gamma1))
    times = []
    running_max = -math.inf
    # right-to-left: t is a time when C_t beats every later partial sum
    for t in range(n - 1, -1, -1):
        if C[t] > running_max:
            times.append(t)
        running_max = max(running_max, C[t])
    times.reverse()
    return PlissTimes(gamma0=gamma0, gamma1=gamma1, bound_a=bound_a, times=times, density=len(times) / n)


def pliss_density_bound(gamma0, gamma1, bound_a):
    """Guaranteed fraction of Pliss times: log(gamma1/gamma0) / log(bound_a/gamma0)."""
    return math.log(gamma1 / gamma0) / math.log(bound_a / gamma0)


def split_from_logs(logs):
    """
    Index K of the cumulative-product split, from log values.

    K counts the factors of the minimal prefix product (the smallest such
    prefix on ties); K = 0 when every prefix product exceeds 1.
    """
    C = np.cumsum(np.asarray(logs, dtype=float))
    j = int(np.argmin(C))
    return 0 if C[j] > 0.0 else j + 1


def split_holds(logs, K, tol=LOG_TOL):
    """True when every suffix product from K and every inverse prefix product ending at K is >= 1."""
    C = np.concatenate([[0.0], np.cumsum(np.asarray(logs, dtype=float))])
    return bool(np.all(C[K + 1 :] - C[K] >= -tol) and np.all(C[K] - C[:K] <= tol))


def cumulative_min_split(seq):
    """
    Split a sequence with product >= 1 at its minimal cumulative product.

    Returns K such that prod_{i=K}^{K+L-1} a_i >= 1 for every suffix length
    L >= 1, and prod_{i=K-L}^{K-1} 1/a_i >= 1 for every L = 1..K.

    Raises:
        HypothesisFailed: if prod seq < 1 beyond a 1e-9 log tolerance
    """
    logs = _positive_logs(seq)
    total = float(np.sum(logs))
    if total < -LOG_TOL:
        raise HypothesisFailed(f"log of the product is {total:.3e} < 0")
    K = split_from_logs(logs)
    if not split_holds(logs, K):
        raise HypothesisFailed("split conclusions do not hold at the minimal prefix")
    return K
