"""Error types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration value, bitmap, or parameter combination."""


class DegenerateBackgroundError(ValueError):
    """A background intensity sum is zero or negative (dead readout region)."""
