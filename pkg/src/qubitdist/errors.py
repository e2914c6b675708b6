"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A mode, port or key does not exist in the active configuration."""


class ValidationError(ValueError):
    """A parameter or object violates its documented invariants."""
