"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation/domain/capacity/range
errors exit 1, baseline regressions exit 2, numerical-consistency
failures exit 3.
"""


class PrimeCircleError(Exception):
    """Base class for package errors."""


class CapacityError(PrimeCircleError):
    """Requested object exceeds a configured size budget."""


class RangeError(PrimeCircleError):
    """Argument outside the range covered by precomputed tables."""


class DomainError(PrimeCircleError):
    """Argument outside the mathematical domain of the operation."""


class NumericalConsistencyError(PrimeCircleError):
    """A floating-point result failed an internal exactness check."""


class BaselineRegressionError(PrimeCircleError):
    """A measured value drifted from its frozen baseline."""
