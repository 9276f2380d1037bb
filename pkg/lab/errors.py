"""Exception types shared across the lab packages."""


class MdpValidationError(ValueError):
    """Raised when an MDP, policy or measure violates one of its invariants."""


class ConfigError(ValueError):
    """Raised for invalid run, training or verification configuration."""


class EmptyDatasetError(ValueError):
    """Raised when an operation needs data and receives none."""
