"""Exception types shared across the package.

The CLI maps these onto exit codes: input/schema problems exit 2,
mathematical failures (degeneracy, parity, singular forms) exit 3, and
oracle failures (quadrature divergence, fit conditioning) exit 4.
"""


class SpeError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class InputError(SpeError):
    """Malformed model file, bad CLI arguments, schema violations."""

    exit_code = 2


class MathError(SpeError):
    """A mathematical precondition failed (degenerate, singular, odd...)."""

    exit_code = 3


class OracleError(SpeError):
    """A numerical oracle could not reach its accuracy contract."""

    exit_code = 4


# -- combinatorics / linear algebra --------------------------------------

class OddCountError(MathError):
    """Perfect matchings requested on an odd number of elements."""


class LimitError(MathError):
    """A hard size limit (matching count, graph order) was exceeded."""


class ShapeError(MathError):
    """Tensor or matrix with inconsistent dimensions."""


class DegenerateHessianError(MathError):
    """Hessian has an eigenvalue below the degeneracy tolerance."""


class SingularMatrixError(MathError):
    """Matrix inversion of a (numerically) singular matrix."""


class OddDimensionError(MathError):
    """Pfaffian of an odd-dimensional matrix."""


class ParityError(MathError):
    """Grassmann data with the wrong parity (odd coupling rank, ...)."""


class SingularFermionFormError(MathError):
    """Fermionic bilinear form is singular (Pfaffian or det vanishes)."""


class ModelIncompleteError(InputError):
    """A model file or LocalModel is missing required blocks."""


# -- gauge ----------------------------------------------------------------

class LieAlgebraError(MathError):
    """Generators do not close on the declared structure constants."""


class InvarianceError(MathError):
    """The phase is not annihilated by the declared generators."""


class GaugeNotTransverseError(MathError):
    """Gauge constraint is not transverse to the orbit at the point."""


# -- oracles --------------------------------------------------------------

class QuadratureDivergenceError(OracleError):
    """Damped quadrature failed to stabilise under refinement."""


class FitConditioningError(OracleError):
    """Coefficient fit is too ill-conditioned to trust."""


class BoxTooSmallError(OracleError):
    """PDE evolution leaked out of the spatial box."""


class CausticError(MathError):
    """Trajectory endpoint is conjugate (Van Vleck determinant singular)."""


class DiagramQuadratureError(MathError):
    """A diagram's time integral failed to stabilise under refinement."""
