"""Exception types shared across the package."""


class InvalidParametersError(ValueError):
    """Model parameters outside the domain of the requested quantity."""


class InconsistentParametersError(InvalidParametersError):
    """Computed energies contradict the theoretical ordering for these parameters."""


class GeometryError(ValueError):
    """A requested configuration does not fit inside the box."""


class UnsupportedSizeError(ValueError):
    """Exact enumeration requested for a state space that is too large."""


class ConfigError(ValueError):
    """Malformed run configuration text."""
