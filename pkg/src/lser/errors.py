class InvalidConfigError(ValueError):
    """A configuration value is out of its allowed range."""


class ShapeError(ValueError):
    """Array dimensions do not match what the receiver was built for."""


class EmptyBufferError(LookupError):
    """Sampling or lookup was attempted on an empty collection."""
