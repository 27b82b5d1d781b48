"""
gridtune.common
===============

Implements common features used by the other submodules of the ``gridtune``
package.
"""


class GridtuneException(Exception):
    """ Base exception for exception from the gridtune package."""


class ConstructionError(GridtuneException):
    """
    Thrown when a network topology or model cannot be constructed from
    the given description, for example because the graph is disconnected.
    """


class InputError(GridtuneException):
    """Thrown when a numeric input does not match the expected format."""


class DomainError(GridtuneException):
    """
    Thrown when a function is evaluated outside of its domain, e.g. a
    transfer function at one of its poles.
    """


class UnboundedNoiseError(GridtuneException):
    """
    Thrown when a state-space realization would require differentiating
    white measurement noise.
    """


class HomogeneityError(GridtuneException):
    """
    Thrown when an operation that requires homogeneous bus parameters is
    called with per-bus parameters that differ.
    """


class StabilityError(GridtuneException):
    """
    Thrown when a system matrix that must be Hurwitz is not.

    Attributes:
        eigenvalue: The offending eigenvalue or ``None`` if not available.
    """
    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class MarginalStabilityError(GridtuneException):
    """
    Thrown when a Nyquist locus passes so close to the critical point that
    the winding number is not well defined.

    Attributes:
        frequency: The frequency in rad/s at which the locus came closest.
    """
    def __init__(self, message, frequency=None):
        super().__init__(message)
        self.frequency = frequency


class UnboundedOptimumError(GridtuneException):
    """
    Thrown when an optimal controller gain does not exist because the
    cost keeps decreasing for growing gain.
    """


class ConfigError(GridtuneException):
    """Base class for errors in run configurations."""


class ParseError(ConfigError):
    """
    Thrown when a configuration file is not syntactically valid.

    Attributes:
        line: 1-based line of the error or ``None``.
        column: 1-based column of the error or ``None``.
    """
    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    """
    Thrown when a configuration violates the configuration schema.

    Attributes:
        violations: List of ``(field, message)`` tuples describing all
            violations found in the configuration.
    """
    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [(violations, "invalid value")]
        self.violations = list(violations)
        lines = [f"{field}: {message}" for field, message in self.violations]
        super().__init__("Invalid configuration:\n  " + "\n  ".join(lines))

    @property
    def fields(self):
        """The names of all offending fields."""
        return [field for field, _ in self.violations]
