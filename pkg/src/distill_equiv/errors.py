"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Non-finite values, bad temperature, too few classes and similar."""


class DimensionMismatchError(ValueError):
    """Two vectors that must share the class count K do not."""


class KdDivergenceError(ArithmeticError):
    """The KL divergence is infinite (student probability underflowed to 0)."""


class DivergenceError(ArithmeticError):
    """An iterative procedure blew up (logit magnitude above the cap)."""


class DegenerateFitError(ValueError):
    """Fewer than two usable points for a log-log rate fit.

    The partially filled result is kept on ``.result`` so callers can still
    report the per-temperature errors.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ConfigError(ValueError):
    """Invalid experiment configuration (parse or range problem)."""
