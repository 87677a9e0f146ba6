"""Exception hierarchy shared by every module.

The CLI maps each family onto an exit code (config=2, data=3, numeric=4).
"""


class RobustAEError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RobustAEError, ValueError):
    """Invalid experiment configuration or hyperparameter."""


class DataError(RobustAEError, ValueError):
    """Malformed, missing, or insufficient input data."""


class ShapeError(DataError):
    """Array shapes do not chain or do not match."""


class NumericError(RobustAEError, ArithmeticError):
    """Non-finite values, divergence, or failed convergence."""


class NonFiniteError(NumericError):
    pass


class ConvergenceError(NumericError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class DivergenceError(NumericError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])
