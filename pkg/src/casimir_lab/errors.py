"""Exception hierarchy. CLI exit codes hang off these classes."""


class CasimirLabError(Exception):
    exit_code = 1


class ConfigError(CasimirLabError, ValueError):
    exit_code = 2


class DomainError(CasimirLabError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2


class RangeError(DomainError):
    """Interpolation or evaluation requested outside the sampled range."""


class ConvergenceError(CasimirLabError, ArithmeticError):
    exit_code = 3

    def __init__(self, message, bound=None, indices=None):
        super().__init__(message)
        self.bound = bound
        self.indices = indices


class NumericalError(CasimirLabError, ArithmeticError):
    exit_code = 3


class FitError(CasimirLabError, RuntimeError):
    exit_code = 4

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class AlignmentError(ConfigError):
    """Two curves do not share a separation grid."""
