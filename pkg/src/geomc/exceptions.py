"""Exception types raised across the package."""


class GeomcError(Exception):
    """Base class for all package errors."""


class InvalidPointError(GeomcError, ValueError):
    """A point does not satisfy its manifold constraint."""


class DomainError(GeomcError, ValueError):
    """An argument lies outside the domain of a map or density."""


class DegenerateGeodesicError(GeomcError, ValueError):
    """No unique minimizing geodesic joins two points."""


class NumericError(GeomcError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class KickError(GeomcError, FloatingPointError):
    """The log-density gradient was not finite at a position.

    The offending position is available as ``q``.
    """

    def __init__(self, message, q=None):
        super().__init__(message)
        self.q = q


class DegenerateSeriesError(GeomcError, ValueError):
    """A series has zero variance, so autocorrelation is undefined."""


class ParameterError(GeomcError, ValueError):
    """Distribution parameters violate their invariants."""


class ConfigError(GeomcError, ValueError):
    """An experiment configuration failed to parse or validate.

    ``line`` is the 1-based line in the config document the error refers
    to, when it can be located.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
