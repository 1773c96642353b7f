"""Exception hierarchy shared across the package."""


class EprbError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(EprbError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateInputError(EprbError, ValueError):
    """Input is formally valid but degenerate (all-zero factor, zero quadrant sum, ...)."""


class DataInconsistencyError(EprbError, ValueError):
    """Observed counts contradict each other (e.g. negative unpaired singles)."""


class ConfigError(EprbError, ValueError):
    """Malformed or contradictory configuration."""
