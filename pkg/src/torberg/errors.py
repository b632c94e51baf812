"""Exception hierarchy shared by all pipeline stages.

Every error carries a short machine-parsable ``code`` used by the CLI to
produce stable single-line diagnostics and exit codes.
"""


class TorbergError(Exception):
    """Base class; ``code`` is a stable identifier, ``exit_code`` the CLI status."""

    code = "INTERNAL"
    exit_code = 1

    def __init__(self, message=""):
        super().__init__(message or self.__doc__)


class ValidationError(TorbergError):
    """A declared invariant of an input object is violated."""

    code = "VALIDATION"
    exit_code = 3


class ParseError(ValidationError):
    """Scenario document is malformed or contains unknown keys."""

    code = "PARSE"
    exit_code = 3


class IncompatibleSubvariety(ValidationError):
    """Subvariety descriptor does not fit the ambient polytope."""

    code = "INCOMPATIBLE_SUBVARIETY"


class NonAmpleReference(ValidationError):
    """Reference symbol gradient image does not fill the polytope interior."""

    code = "NON_AMPLE_REFERENCE"


class GridTooCoarse(ValidationError):
    """Grid resolution below the supported minimum (33 points per axis)."""

    code = "GRID_TOO_COARSE"


class NumericError(TorbergError):
    """Numerical failure inside the pipeline."""

    code = "NUMERIC"
    exit_code = 1


class QuadratureUnderflow(NumericError):
    """All integrand samples of a Gram entry underflowed; rescaling required."""

    code = "QUADRATURE_UNDERFLOW"


class NotPositiveDefinite(NumericError):
    """Gram matrix failed the Cholesky / conditioning guard."""

    code = "NOT_POSITIVE_DEFINITE"


class HullDegenerate(NumericError):
    """Convex hull construction hit an unresolvable degeneracy."""

    code = "HULL_DEGENERATE"


class NotInImage(NumericError):
    """Target section has a component outside the restricted image space."""

    code = "NOT_IN_IMAGE"


class InsufficientSweep(ValidationError):
    """Not enough tensor powers to fit the dimension growth."""

    code = "INSUFFICIENT_SWEEP"


class UnboundedConstant(NumericError):
    """Fitted envelope/kernel constant exceeded the sanity cap (1e12)."""

    code = "UNBOUNDED_CONSTANT"


class IOOutDir(TorbergError):
    """Output directory is missing or not writable."""

    code = "IO_OUT_DIR"
    exit_code = 2
