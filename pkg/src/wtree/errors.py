"""Exception hierarchy shared across the package."""


class WtreeError(Exception):
    """Base class for all package errors."""


class ValidationError(WtreeError):
    """Input data violates a structural invariant."""


class NonSquareError(ValidationError):
    pass


class NegativeEntryError(ValidationError):
    pass


class NonzeroDiagonalError(ValidationError):
    pass


class NotUltrametricError(ValidationError):
    pass


class NonMonotoneTreeError(ValidationError):
    pass


class DimensionMismatchError(ValidationError):
    pass


class LengthMismatchError(ValidationError):
    pass


class ZeroExactError(ValidationError):
    pass


class ParseError(WtreeError):
    """Malformed input file; carries the offending location."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class NumericalError(WtreeError):
    """A solver failed to reach its accuracy target."""


class InfeasibleMarginalsError(NumericalError):
    pass


class SizeCapError(ValidationError):
    pass


class SinkhornNonConvergence(NumericalError):
    def __init__(self, marginal_error, iterations):
        super().__init__(
            f"sinkhorn did not converge after {iterations} iterations "
            f"(marginal l1 error {marginal_error:.3e})"
        )
        self.marginal_error = marginal_error
        self.iterations = iterations
