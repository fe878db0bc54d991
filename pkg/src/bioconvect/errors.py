"""Exception hierarchy shared by all solvers."""


class BioconvectError(Exception):
    pass


class DomainError(BioconvectError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class BracketError(BioconvectError, ValueError):
    """Root bracket without a sign change."""


class StiffnessError(BioconvectError, RuntimeError):
    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


class SingularMatrixError(BioconvectError, ArithmeticError):
    def __init__(self, message, rcond=None):
        super().__init__(message)
        self.rcond = rcond


class ConvergenceError(BioconvectError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ShootingError(ConvergenceError):
    pass


class DiscretizationError(BioconvectError, RuntimeError):
    pass


class SpuriousModeError(BioconvectError, RuntimeError):
    pass


class ConfigError(BioconvectError, ValueError):
    pass
