class MetaroundingError(Exception):
    pass


class EmptyPolytope(MetaroundingError, ValueError):
    """Raised when the relaxed point has no positive coordinate."""


class NotInPolytope(MetaroundingError, ValueError):
    """Raised when a loss vector violates the box or budget constraint."""


class DimensionMismatch(MetaroundingError, ValueError):
    pass


class IterationLimit(MetaroundingError, RuntimeError):
    """Raised by the simplex solver when the pivot budget is exhausted."""


class TooLarge(MetaroundingError, ValueError):
    pass


class IterationLimitExceeded(MetaroundingError, RuntimeError):
    """Raised when metarounding hits its iteration cap before the gap closes.

    The partial result (if any) is attached as ``self.result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class CertificateError(MetaroundingError, AssertionError):
    pass


class GenerationFailed(MetaroundingError, RuntimeError):
    pass
