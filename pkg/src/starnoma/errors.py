"""Exception hierarchy shared by the library and the command-line front end."""


class StarNomaError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(StarNomaError, ValueError):
    """Malformed scenario, partition, or run configuration."""

    exit_code = 2


class InfeasibleScenarioError(StarNomaError):
    """Power split cannot satisfy the SIC thresholds."""

    exit_code = 3

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class PartitionError(StarNomaError):
    """Surface partitioning could not meet its targets within the budget."""

    exit_code = 4

    def __init__(self, message, unmet_users=(), best_op=None):
        super().__init__(message)
        self.unmet_users = list(unmet_users)
        self.best_op = best_op
