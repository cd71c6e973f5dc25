"""Exception hierarchy shared by the analysis, simulation and CLI layers."""


class DenseCellError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(DenseCellError, ValueError):
    """An argument lies outside the domain of the requested function."""


class ParameterError(DenseCellError, ValueError):
    """A model parameter makes the requested quantity undefined (e.g. divergent)."""


class UsageError(DenseCellError, ValueError):
    """Malformed user input: bad config file, bad sweep specification, wrong model shape."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(DenseCellError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance.

    ``estimate`` carries the best value obtained before giving up.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class BracketingError(DenseCellError, ValueError):
    """The supplied bracket does not contain a sign change."""


class ToleranceError(NumericalError):
    """A finite-difference quantity is indistinguishable from numerical noise."""


class NotFoundError(DenseCellError, LookupError):
    """A search over a grid did not find a point meeting its criterion."""

    def __init__(self, message, profile=None):
        super().__init__(message)
        self.profile = profile
