"""Exception taxonomy shared across the package."""


class ConfigurationError(ValueError):
    """A caller-supplied configuration value is invalid (bad shapes, counts, schedules)."""


class DomainError(ValueError):
    """A mathematical precondition is violated (non-PSD matrix, probability outside [0, 1])."""


class NumericalError(RuntimeError):
    """A computation cannot proceed reliably (singular or ill-conditioned matrix)."""


class UnsupportedScenarioError(LookupError):
    """The requested scenario or reference quantity does not exist."""
