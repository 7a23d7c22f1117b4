"""Exception hierarchy.

Errors split into two families that the CLI maps onto exit codes:
``ValidationError`` (bad input, exit 2) and ``NumericalError`` (a solver or
deflation step failed on input that passed validation, exit 3).
"""


class ModdevError(Exception):
    code = "error"


class ValidationError(ModdevError, ValueError):
    code = "validation"


class NumericalError(ModdevError, ArithmeticError):
    code = "numerical"


class NotSymmetric(ValidationError):
    code = "not_symmetric"


class NotPositiveDefinite(ValidationError):
    code = "not_positive_definite"


class DimensionMismatch(ValidationError):
    code = "dimension_mismatch"


class EmptyPolytope(ValidationError):
    code = "empty_polytope"


class InvalidSet(ValidationError):
    code = "invalid_set"


class InvalidAxis(ValidationError):
    code = "invalid_axis"


class TooLarge(ValidationError):
    code = "too_large"


class CovarianceMismatch(ValidationError):
    code = "covariance_mismatch"


class ScheduleError(ValidationError):
    code = "schedule"


class NoConvergence(NumericalError):
    code = "no_convergence"


class DegenerateG2(NumericalError):
    code = "degenerate_g2"


class SupportViolation(NumericalError):
    code = "support_violation"

    def __init__(self, message, witness=None, margin=None):
        super().__init__(message)
        self.witness = witness
        self.margin = margin
