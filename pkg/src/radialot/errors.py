"""Exception taxonomy shared by all modules.

Every error raised on purpose derives from RadialOTError so the CLI can map
failures onto its exit-code contract (1 = validation, 2 = I/O).
"""


class RadialOTError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(RadialOTError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DivergenceError(DomainError):
    """A required moment integral diverges for the given parameters."""


class UnsupportedError(RadialOTError):
    """The request is well-formed but outside what this package implements."""


class InfeasibleError(RadialOTError):
    """A transportation problem has no feasible coupling."""


class CapacityError(RadialOTError):
    """Problem size exceeds a configured safety cap."""


class ConfigurationError(RadialOTError):
    """Inconsistent combination of inputs, models, or flags."""


class UndefinedConditionalError(RadialOTError):
    """A conditional law was requested at a point of zero density."""
