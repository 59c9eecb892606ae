"""Exception types shared across the simulator."""


class OtfsNomaError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(OtfsNomaError):
    """Vector/matrix dimensions do not match an operation's contract."""


class ConfigurationError(OtfsNomaError):
    """Invalid or inconsistent configuration values."""


class SizeCapError(OtfsNomaError):
    """A dense materialization would exceed the configured size cap."""


class NumericalRankError(OtfsNomaError):
    """A linear system is singular (or numerically rank-deficient)."""
