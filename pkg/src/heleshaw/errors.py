"""Exception types shared across the package."""


class HeleshawError(Exception):
    """Base class for all package-specific errors."""


class NonZeroMeanError(HeleshawError):
    """Right-hand side of a periodic Poisson problem is not mean-zero."""


class NoConvergenceError(HeleshawError):
    """Iterative solver exceeded its iteration cap."""


class CflViolationError(HeleshawError):
    """A sub-step was asked to advance further than its stability bound."""


class PatchTooLargeError(HeleshawError):
    """Initial patch does not fit inside the box with the required margin."""


class ValidationFailedError(HeleshawError):
    """Initial data violates one of the admissibility checks."""

    def __init__(self, failures):
        self.failures = list(failures)
        names = ", ".join(item.name for item in self.failures)
        super().__init__(f"initial-data validation failed: {names}")


class SupportEscapeError(HeleshawError):
    """Exact self-similar support leaves the computational box."""


class NumericsError(HeleshawError):
    """Non-finite values appeared during time stepping."""


class ConfigError(HeleshawError):
    """Base class for configuration-file problems."""


class UnknownKeyError(ConfigError):
    """Configuration key is not recognised."""


class BadValueError(ConfigError):
    """Configuration value is malformed or out of range."""
