"""Exception types shared across the package.

Every error raised on purpose carries a short machine-readable ``code`` that
the command line reports as ``ERROR <code>: <detail>``.
"""


class GPMisspecError(Exception):
    code = "FAILURE"


class DomainError(GPMisspecError, ValueError):
    code = "DOMAIN"


class DesignError(GPMisspecError, ValueError):
    code = "DESIGN"


class SizeLimitError(GPMisspecError, ValueError):
    code = "SIZE_LIMIT"


class NotPositiveDefiniteError(GPMisspecError, ArithmeticError):
    """Cholesky factorization failed even at the largest jitter level."""

    code = "NOT_PD"

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class NumericalError(GPMisspecError, ArithmeticError):
    code = "NUMERIC"
