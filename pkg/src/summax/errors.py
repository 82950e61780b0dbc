"""Exception types shared across the package."""


class SumMaxError(Exception):
    """Base class for every error raised by this package."""


class ModelError(SumMaxError):
    """Invalid distribution family, parameter value, or model usage."""


class GridError(SumMaxError):
    """Invalid grid geometry or a query outside the grid rectangle."""


class EngineError(SumMaxError):
    """A recurrence engine received or produced inconsistent data."""


class DegenerateSliceError(SumMaxError):
    """Conditioning was requested where the marginal carries no mass."""


class OracleError(SumMaxError):
    """An oracle computation cannot run within its stated bounds."""


class ConfigError(SumMaxError):
    """Malformed run configuration. Carries the offending field path."""

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")
