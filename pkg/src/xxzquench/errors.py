"""Exception hierarchy shared by the engines, the protocol layer and the CLI."""


class XXZError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ParameterError(XXZError, ValueError):
    """A physical or numerical parameter is outside its allowed range."""

    exit_code = 2


class ConfigError(XXZError, ValueError):
    """A configuration document could not be parsed or validated.

    ``violations`` lists every problem found, not only the first one.
    """

    exit_code = 2

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [message])


class CapacityError(XXZError):
    """The requested system is too large for the exact engine."""

    exit_code = 3


class ConvergenceError(XXZError):
    """An iterative solver stopped before reaching its threshold."""

    exit_code = 4

    def __init__(self, message, energy_trace=None):
        super().__init__(message)
        self.energy_trace = list(energy_trace or [])


class NumericalError(XXZError):
    """A linear-algebra kernel failed or produced an inconsistent result."""

    exit_code = 4


class DomainError(XXZError, ValueError):
    """Input is not a physical state (trace, Hermiticity or positivity)."""

    exit_code = 2


class ReconstructionError(DomainError):
    """Correlators do not assemble into a valid two-qubit density matrix."""


class ToleranceError(XXZError):
    """Two independent routes disagree beyond the allowed tolerance."""

    exit_code = 5
