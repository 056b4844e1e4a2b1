"""Exception hierarchy shared by all fdcr modules."""


class FdcrError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FdcrError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(FdcrError, ValueError):
    """A parameter set violates a type invariant or schema rule."""


class InfeasibleError(FdcrError):
    """A requested target or constraint cannot be met."""


class UndefinedConditionalError(FdcrError, ZeroDivisionError):
    """A conditional probability was requested on a zero-probability event."""
