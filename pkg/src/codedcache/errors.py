"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with arguments outside its documented domain."""


class ConfigurationError(ValueError):
    """A placement or experiment configuration cannot be satisfied."""
