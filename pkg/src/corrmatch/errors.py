"""Exception types shared across the toolkit."""


class ConfigError(ValueError):
    """Invalid experiment configuration (unknown key, bad value, missing setting)."""


class DataError(ValueError):
    """Malformed data file (XYZ cloud, checkpoint, correspondence CSV)."""


class NumericalError(RuntimeError):
    """Numerical failure: degenerate geometry, insufficient inliers, divergence."""
