"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration is internally inconsistent or names something unknown."""


class CheckpointError(ValueError):
    """A checkpoint cannot be read or does not fit the model it is loaded into."""
