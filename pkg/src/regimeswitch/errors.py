"""Exception and warning classes.

Every error carries a stable ``code`` used by the command line front end when
reporting failures.
"""


class RegimeSwitchError(Exception):
    code = "E_GENERIC"


class DomainError(RegimeSwitchError, ValueError):
    """An observation lies outside the support of the density family."""

    code = "E_DOMAIN"


class NonFiniteError(RegimeSwitchError, ValueError):
    """Parameters produce a non-positive scale or another non-finite quantity."""

    code = "E_NONFINITE"


class DimensionError(RegimeSwitchError, ValueError):
    code = "E_DIMENSION"


class ReducibleChainError(RegimeSwitchError):
    """The transition matrix has no unique stationary distribution."""

    code = "E_REDUCIBLE"


class NoMinorizationError(RegimeSwitchError):
    """No power of the transition matrix is strictly positive on the support."""

    code = "E_NO_MINORIZATION"


class NumericalUnderflowError(RegimeSwitchError):
    """An observation has zero likelihood under every hidden state."""

    code = "E_UNDERFLOW"


class SingularInformationError(RegimeSwitchError):
    code = "E_SINGULAR_INFORMATION"


class NonPositiveDefiniteError(RegimeSwitchError):
    code = "E_NOT_POSITIVE_DEFINITE"

    def __init__(self, message, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues


class ScaleError(RegimeSwitchError):
    code = "E_SCALE"


class NoConvergenceError(RegimeSwitchError):
    code = "E_NO_CONVERGENCE"


class DataDegeneracyError(RegimeSwitchError, ValueError):
    code = "E_DEGENERATE_DATA"


class BoundaryWarning(UserWarning):
    """An estimate sits at the edge of the admissible parameter box."""


class DegenerateIntervalWarning(UserWarning):
    pass
