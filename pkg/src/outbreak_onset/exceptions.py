"""Exception hierarchy shared by the pipeline stages."""


class OnsetError(Exception):
    """Base class for all library errors."""


class ConfigError(OnsetError, ValueError):
    """Invalid or unknown configuration values."""


class ShapeError(OnsetError, ValueError):
    """Array or volume has an unusable shape."""


class DivergenceError(OnsetError, ArithmeticError):
    """Training loss became non-finite; lower the learning rate."""


class DegenerateBaselineError(OnsetError, ValueError):
    """Kernel bandwidth collapsed to zero for a constant baseline window."""


class InsufficientDataError(OnsetError, ValueError):
    """Too few samples, windows or streams for the requested statistic."""


class PoolExhaustedError(OnsetError, ValueError):
    """An embedding pool holds fewer cases than a stream requests."""


class PathologicalConfigError(OnsetError, ValueError):
    """Sampler acceptance rate fell below the usable limit."""


class DegenerateClassError(OnsetError, ValueError):
    """Cluster labels leave the silhouette undefined."""
