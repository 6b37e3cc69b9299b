"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the domain of the operation."""


class InfeasiblePlanError(DomainError):
    """The requested iteration count cannot spend the budget with b in [0, 1)."""

    def __init__(self, message, raw_b):
        super().__init__(message)
        self.raw_b = raw_b


class ConfigError(ValueError):
    """A configuration value or key was rejected."""


class LogFormatError(ValueError):
    """An event log line could not be parsed."""

    def __init__(self, message, line_number):
        super().__init__(message)
        self.line_number = line_number
