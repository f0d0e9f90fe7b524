"""Exception hierarchy shared by the analysis modules and the CLI.

The CLI maps these onto exit codes: ``ConfigError`` -> 2, ``DataError`` -> 3,
``NumericalError`` -> 4.
"""


class InflationDynamicsError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(InflationDynamicsError, ValueError):
    pass


class DataError(InflationDynamicsError, ValueError):
    pass


class IngestionError(DataError):
    """A CSV could not be turned into a valid panel."""


class DomainError(DataError):
    """A value lies outside the domain of a transform (e.g. log of a non-positive level)."""


class AlignmentError(DataError):
    pass


class DegenerateError(DataError):
    """Input carries no usable signal (zero norm, zero variance, ...)."""


class InfeasibleError(ConfigError):
    """A portfolio constraint set admits no weight vector."""


class NumericalError(InflationDynamicsError, ArithmeticError):
    pass
