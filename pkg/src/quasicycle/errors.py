"""Exception types raised across the package."""


class QuasiCycleError(Exception):
    """Base class for all package errors."""


class NotOscillatory(QuasiCycleError):
    """The drift matrix has real eigenvalues, so there is no quasi-cycle."""


class SingularTransform(QuasiCycleError):
    pass


class OutOfRange(QuasiCycleError):
    """A requested frequency cannot be produced by any admissible efficacy."""


class NumericalDivergence(QuasiCycleError):
    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class GridMismatch(QuasiCycleError):
    pass


class InvalidInitial(QuasiCycleError):
    pass


class EmptyInput(QuasiCycleError):
    pass


class InsufficientData(QuasiCycleError):
    pass


class ConfigError(QuasiCycleError):
    pass
