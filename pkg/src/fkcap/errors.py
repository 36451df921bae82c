"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input violates an operation's precondition (shape, hermiticity, sign)."""


class SingularityError(ArithmeticError):
    """A matrix that must be positive definite is (numerically) singular."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
