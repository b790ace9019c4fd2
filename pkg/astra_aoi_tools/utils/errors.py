"""
Exception hierarchy for ASTRA AoI Tools.

Every error raised by the package derives from AstraError and from the builtin
exception a caller would naturally expect, so both ``except AstraError`` and
``except ValueError`` style handlers work.
"""


class AstraError(Exception):
    """Base class for all package errors."""


class InvalidActionError(AstraError, ValueError):
    """An action is malformed or not allowed in the requested context."""


class UnknownActionError(AstraError, KeyError):
    """An action is not present in a calibrated success table."""


class TableSchemaError(AstraError, ValueError):
    """A success-table file does not match the expected schema."""


class CalibrationDigestWarning(UserWarning):
    """The configuration changed since a success table was calibrated."""


class ConvergenceError(AstraError, RuntimeError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class UndefinedThresholdError(AstraError, ValueError):
    """A pairwise switching threshold is requested for an unordered pair."""


class LinearProgramError(AstraError, RuntimeError):
    """The occupation-measure simplex could not produce an optimum."""


class InfeasibleBudgetError(AstraError, ValueError):
    """An energy budget lies outside the achievable range."""


class ConfigError(AstraError, ValueError):
    """A configuration file or override is malformed."""
