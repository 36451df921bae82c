"""Fuglede-Kadison determinants of matrix-valued semicircular operators.

Two independent routes are provided: the capacity of the covariance map
(operator-Sinkhorn scaling) and direct spectral integration of the
hermitized operator's density (matrix Dyson equation).
"""
from .cpmap import ChoiMatrix, KrausTuple
from .errors import ConvergenceError, DomainError, SingularityError

__version__ = "0.1.0"

__all__ = [
    "ChoiMatrix",
    "ConvergenceError",
    "DomainError",
    "KrausTuple",
    "SingularityError",
    "__version__",
]
