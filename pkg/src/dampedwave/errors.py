"""Shared exception types."""


class ConfigError(ValueError):
    """A configuration value or combination of values is invalid."""


class SolverFailure(RuntimeError):
    """An iterative solve did not converge within its iteration cap."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class LawError(ValueError):
    """A damping law produced a non-finite value."""
