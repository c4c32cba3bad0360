"""
Geometry core

Exact 2x2 linear algebra, projective-line geometry and the one-step
quantities of the projective cocycle.

Directions are angles in [0, pi): a vector and its negative are the same
point of RP^1. For an invertible M acting on a unit vector u the cocycle is

    G(u) = M u / |M u|,      g(u) = |det M| / |M u|^2,

where g is the derivative of G along the fiber.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from critset import config
from critset.errors import ConformalMatrix, SingularMatrix

CONFORMAL_TOL = 1e-12
DISCRIMINANT_TOL = 1e-9


class LinearClass(Enum):
    HYPERBOLIC_SADDLE = "HyperbolicSaddle"
    NODE_TWO_REAL_EIGEN = "NodeTwoRealEigen"
    HOMOTHETY = "Homothety"
    ELLIPTIC = "Elliptic"
    PARABOLIC = "Parabolic"


@dataclass(frozen=True)
class SingularPair:
    """Most contracted (e) and most expanded (f) directions of a matrix."""

    e: float
    f: float
    g_e: float
    g_f: float

    def to_dict(self):
        return {"e": self.e, "f": self.f, "g_e": self.g_e, "g_f": self.g_f}


def normalize_angle(theta):
    """Map an angle into [0, pi)."""
    theta = math.fmod(theta, math.pi)
    if theta < 0.0:
        theta += math.pi
    # -tiny + pi rounds up to pi
    if theta >= math.pi:
        theta = 0.0
    return theta


def unit(theta):
    return np.array([math.cos(theta), math.sin(theta)])


def angle_of(vector):
    """Direction of a nonzero vector as a point of RP^1."""
    return normalize_angle(math.atan2(vector[1], vector[0]))


def rp1_distance(theta1, theta2):
    d = abs(theta1 - theta2) % math.pi
    return min(d, math.pi - d)


def slope(theta1, theta2):
    """|tan| of the RP^1 angle between two directions."""
    d = rp1_distance(theta1, theta2)
    if d >= math.pi / 2:
        return math.inf
    return math.tan(d)


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def diag(a, d):
    return np.array([[float(a), 0.0], [0.0, float(d)]])


def as_matrix(matrix):
    M = np.asarray(matrix, dtype=float)
    if M.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    return M


def checked_det(M, floor=None):
    """
    Determinant of M, refusing matrices that are numerically singular.

    Args:
        M: 2x2 array
        floor: Smallest admissible |det| (defaults to config.DET_FLOOR)

    Returns:
        det(M)
    """
    floor = config.DET_FLOOR if floor is None else floor
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if not abs(det) > floor:
        raise SingularMatrix(f"|det| = {abs(det):.3e} below floor {floor:.1e}")
    return det


def g_step(M, v):
    """
    One-step fiber derivative g(v) = |det M| / |M u|^2.

    Args:
        M: Invertible 2x2 matrix
        v: Direction angle

    Returns:
        Strictly positive real
    """
    M = np.asarray(M, dtype=float)
    det = checked_det(M)
    w = M @ unit(v)
    return abs(det) / float(w @ w)


def g_transport(M, v):
    """Direction of M u, where u is the unit vector of v."""
    M = np.asarray(M, dtype=float)
    checked_det(M)
    return angle_of(M @ unit(v))


def singular_pair(M):
    """
    Characteristic directions of M from the closed-form SVD of a 2x2 matrix.

    The Gram matrix M^T M = [[p, q], [q, r]] has its largest eigenvector at
    angle atan2(2q, p - r) / 2; that is the most expanded direction f, and e
    is orthogonal to it. g(e) = s_max / s_min and g(f) = s_min / s_max.

    Args:
        M: Invertible 2x2 matrix

    Returns:
        SingularPair

    Raises:
        ConformalMatrix: if the singular values agree to CONFORMAL_TOL
    """
    M = np.asarray(M, dtype=float)
    det = checked_det(M)
    a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    p = a * a + c * c
    q = a * b + c * d
    r = b * b + d * d
    spread = math.hypot(0.5 * (p - r), q)
    s_max = math.sqrt(0.5 * (p + r) + spread)
    # s_min from s_max * s_min = |det|, not from the small Gram root
    s_min = abs(det) / s_max
    if s_max - s_min <= CONFORMAL_TOL * s_max:
        raise ConformalMatrix("singular values coincide")
    f = normalize_angle(0.5 * math.atan2(2.0 * q, p - r))
    e = normalize_angle(f + math.pi / 2)
    return SingularPair(e=e, f=f, g_e=s_max / s_min, g_f=s_min / s_max)


def classify_linear(M):
    """
    Classify M by its eigenstructure.

    The discriminant trace^2 - 4 det is compared with DISCRIMINANT_TOL
    relative to trace^2 + |det|; a repeated eigenvalue is a homothety when M
    is a multiple of the identity and parabolic otherwise.
    """
    M = np.asarray(M, dtype=float)
    det = checked_det(M)
    trace = M[0, 0] + M[1, 1]
    disc = trace * trace - 4.0 * det
    scale = trace * trace + abs(det)
    if abs(disc) <= DISCRIMINANT_TOL * scale:
        off_scalar = M - 0.5 * trace * np.eye(2)
        if np.linalg.norm(off_scalar) <= math.sqrt(DISCRIMINANT_TOL) * np.linalg.norm(M):
            return LinearClass.HOMOTHETY
        return LinearClass.PARABOLIC
    if disc < 0.0:
        return LinearClass.ELLIPTIC
    root = math.sqrt(disc)
    # real eigenvalues (trace -+ root) / 2
    moduli = sorted((abs(0.5 * (trace - root)), abs(0.5 * (trace + root))))
    if moduli[0] < 1.0 < moduli[1]:
        return LinearClass.HYPERBOLIC_SADDLE
    return LinearClass.NODE_TWO_REAL_EIGEN


def eigen_directions(M):
    """
    Real eigenpairs of M, largest modulus first.

    Returns:
        List of (eigenvalue, direction angle); empty when eigenvalues are
        complex
    """
    values, vectors = np.linalg.eig(np.asarray(M, dtype=float))
    if np.any(np.abs(values.imag) > 0.0):
        return []
    order = np.argsort(-np.abs(values.real))
    return [(float(values.real[i]), angle_of(vectors[:, i].real)) for i in order]
