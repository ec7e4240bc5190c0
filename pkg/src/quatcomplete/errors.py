"""Exception hierarchy shared by the package."""


class QuaternionError(Exception):
    """Base class for all errors raised by quatcomplete."""


class DimensionError(QuaternionError, ValueError):
    """Operand shapes are incompatible."""


class StructureError(QuaternionError, ValueError):
    """A complex matrix does not have the block layout of a quaternion adjoint."""


class SingularMatrixError(QuaternionError, ArithmeticError):
    """A Hermitian system is singular or not positive definite."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class InfeasibleRankError(QuaternionError, ValueError):
    """Requested factor width is smaller than the matrix rank."""


class ConfigError(QuaternionError, ValueError):
    """Invalid solver configuration."""


class DivergenceError(QuaternionError, ArithmeticError):
    """Non-finite values appeared during an ADMM solve."""

    def __init__(self, message, iteration):
        super().__init__(message)
        self.iteration = iteration
