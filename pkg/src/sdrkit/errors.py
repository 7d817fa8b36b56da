"""Exception types raised by the estimators.

The CLI maps these onto exit codes, so keep the hierarchy shallow: anything
about the *input* derives from :class:`DataError`, anything about the
*computation* derives from :class:`NumericalError`.
"""


class SDRError(Exception):
    """Base class for all package errors."""


class DataError(SDRError, ValueError):
    """Malformed or unusable input data."""


class InvalidInputError(DataError):
    pass


class SlicingError(DataError):
    pass


class NumericalError(SDRError, ArithmeticError):
    """A computation failed to produce a usable result."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class SingularityError(NumericalError):
    pass


class DegenerateCandidateError(NumericalError):
    pass


class BandwidthError(NumericalError):
    pass


class StallError(NumericalError):
    """Line search gave up; carries the best iterate found so far."""

    def __init__(self, message, best=None, trace=None, iterations=None):
        super().__init__(message, iterations=iterations)
        self.best = best
        self.trace = trace if trace is not None else []
