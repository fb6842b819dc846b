"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A spec, scene, or experiment config violates its invariants."""


class UndefinedDerivativeError(ValueError):
    """Instantaneous-frequency derivative requested at a frequency-hop instant."""


class DegenerateBasisError(ValueError):
    """Regression basis is rank deficient after centering (dynamic observability lost)."""

    def __init__(self, message: str, column: int | None = None):
        super().__init__(message)
        self.column = column


class AmbiguousPeakError(RuntimeError):
    """Cross-correlation peak sits on the lag-range boundary."""
