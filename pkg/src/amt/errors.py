"""Exception types shared across the package."""


class AmtError(Exception):
    """Base class for all errors raised by :mod:`amt`."""


class DomainError(AmtError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ArgumentError(AmtError, ValueError):
    """Malformed argument: wrong shape, empty grid, non-monotone times, ..."""


class StructureError(AmtError, ValueError):
    """An operator lacks a structural property the operation relies on."""


class StepSizeError(AmtError, ArithmeticError):
    """A finite-difference step is too small to resolve the quantity."""


class UndefinedRatioError(AmtError, ZeroDivisionError):
    """A ratio was requested whose denominator vanishes."""


class IntegrationError(AmtError, ArithmeticError):
    """A time integrator lost accuracy beyond its monitoring tolerance."""
