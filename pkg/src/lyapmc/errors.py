class ConfigError(ValueError):
    """Invalid run or object configuration; ``key`` names the offending entry when known."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class ShapeError(ConfigError):
    pass


class DiscretizationSizeError(ValueError):
    pass


class QuadratureError(ArithmeticError):
    pass


class SingularityError(ValueError):
    pass


class DegenerateEstimateError(ArithmeticError):
    """Raised when a Monte Carlo estimator has no usable samples (all weight zero or all paths truncated)."""
