"""Exceptions raised by critset."""


class CritsetError(Exception):
    """Base class for every critset failure."""


class SingularMatrix(CritsetError, ArithmeticError):
    """|det| fell below the configured floor."""


class ConformalMatrix(CritsetError, ArithmeticError):
    """Singular values coincide; no characteristic directions exist."""


class Escaped(CritsetError, ArithmeticError):
    """An orbit left the computational domain."""

    def __init__(self, index, point=None):
        self.index = index
        self.point = point
        super().__init__(f"orbit escaped at step {index}")


class NonInvertible(CritsetError, ValueError):
    """The map definition has no inverse."""


class EmptyHypothesis(CritsetError, ValueError):
    """Input does not satisfy the product hypothesis of the Pliss lemma."""


class HypothesisFailed(CritsetError, ValueError):
    """Input does not satisfy the product hypothesis of the split claim."""


class DegenerateAngle(CritsetError, ArithmeticError):
    """Estimated E and F bundles collapsed onto one direction."""

    def __init__(self, angle):
        self.angle = angle
        super().__init__(f"splitting angle {angle:.3e} below resolution")


class MeshTooCoarse(CritsetError, ValueError):
    """A forward image could not be matched to a sample."""


class NotASaddle(CritsetError, ValueError):
    """Manifold growth requested at a point that is not a hyperbolic saddle."""


class EigenDegenerate(CritsetError, ArithmeticError):
    """Stable and unstable eigendirections are numerically parallel."""


class Undetermined(CritsetError, ArithmeticError):
    """The stable branch does not separate the local band."""


class BracketInvalid(CritsetError, ValueError):
    """The parameter range does not bracket a tangency."""


class ScenarioError(CritsetError, ValueError):
    """A scenario file failed validation."""


class NoUsableSamples(CritsetError, ArithmeticError):
    """Every sample of a run escaped or was degenerate."""
