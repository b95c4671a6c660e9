"""Exception taxonomy; maps onto CLI exit codes (config=1, runtime=2)."""


class ConfigError(ValueError):
    """Invalid configuration or parameters."""


class NumericalError(RuntimeError):
    """Numerical failure (singular system, non-finite values)."""


class AggregationError(RuntimeError):
    """An aggregation rule could not produce a value (e.g. degenerate trim)."""


class ProtocolError(RuntimeError):
    """The check-of-computations protocol cannot continue."""
