"""Dense complex-matrix primitives.

Everything here works on ``numpy`` arrays of dtype ``complex128`` (real input
is promoted).  Functions are pure; none of them mutate their arguments.
"""
import numpy as np
import scipy.linalg

from .errors import DomainError, SingularityError

HERMITIAN_RTOL = 1e-12
PSD_RTOL = 1e-10
PSD_FLOOR = 1e-12


def as_matrix(b):
    """Return ``b`` as a square complex128 array, raising DomainError otherwise."""
    a = np.asarray(b, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DomainError(f"expected a non-empty square matrix, got shape {a.shape}")
    return a


def is_hermitian(b, rtol=HERMITIAN_RTOL):
    a = as_matrix(b)
    scale = np.linalg.norm(a)
    return np.linalg.norm(a - a.conj().T) <= rtol * max(scale, np.finfo(float).tiny)


def is_psd(b, rtol=PSD_RTOL):
    a = as_matrix(b)
    if not is_hermitian(a):
        return False
    lam = np.linalg.eigvalsh(0.5 * (a + a.conj().T))
    return lam[0] >= -rtol * max(1.0, np.linalg.norm(a, 2))


def herm_eig(b):
    """Eigendecomposition of a hermitian matrix.

    Returns ``(lam, u)`` with ``lam`` ascending and ``u`` unitary such that
    ``b = u @ diag(lam) @ u^*``.  The input is symmetrized before the
    decomposition so round-off asymmetry never leaks into the result.
    """
    a = as_matrix(b)
    if not is_hermitian(a):
        raise DomainError("herm_eig requires a hermitian matrix")
    lam, u = np.linalg.eigh(0.5 * (a + a.conj().T))
    return lam, u


def _pd_eig(b):
    lam, u = herm_eig(b)
    floor = PSD_FLOOR * max(1.0, abs(lam[-1]))
    if lam[0] <= floor:
        raise SingularityError(
            f"matrix is not positive definite (min eigenvalue {lam[0]:.3e})",
            min_eigenvalue=float(lam[0]),
        )
    return lam, u


def inv_sqrt_psd(b):
    """``b^{-1/2}`` for positive definite ``b``.

    Raises
    ------
    SingularityError
        If the smallest eigenvalue is below ``1e-12 * max(1, ||b||)``.
    """
    lam, u = _pd_eig(b)
    r = (u / np.sqrt(lam)) @ u.conj().T
    return 0.5 * (r + r.conj().T)


def sqrt_psd(b):
    lam, u = herm_eig(b)
    r = (u * np.sqrt(np.clip(lam, 0.0, None))) @ u.conj().T
    return 0.5 * (r + r.conj().T)


def logdet_pd(b):
    """Sum of log-eigenvalues of a positive definite matrix."""
    a = as_matrix(b)
    h = 0.5 * (a + a.conj().T)
    try:
        c = np.linalg.cholesky(h)
    except np.linalg.LinAlgError:
        lam = np.linalg.eigvalsh(h)
        raise SingularityError(
            f"matrix is not positive definite (min eigenvalue {lam[0]:.3e})",
            min_eigenvalue=float(lam[0]),
        ) from None
    d = np.real(np.diag(c))
    if np.any(d <= 0.0):
        raise SingularityError("matrix is not positive definite", min_eigenvalue=0.0)
    return float(2.0 * np.sum(np.log(d)))


def logabsdet(b, rank_rtol=None):
    """``log|det b|`` from a column-pivoted QR factorization.

    Returns ``-inf`` when ``b`` is numerically singular, i.e. when some
    diagonal entry of ``R`` falls below ``rank_rtol * |R_00|``.  The default
    threshold is ``dim * eps``, the usual numerical-rank cutoff.
    """
    a = as_matrix(b)
    dim = a.shape[0]
    if rank_rtol is None:
        rank_rtol = dim * np.finfo(float).eps
    r = scipy.linalg.qr(a, mode="r", pivoting=True, check_finite=False)[0]
    d = np.abs(np.diag(r))
    if d[0] == 0.0 or d[-1] <= rank_rtol * d[0]:
        return -np.inf
    return float(np.sum(np.log(d)))


def normalized_trace(b):
    a = as_matrix(b)
    return complex(np.trace(a)) / a.shape[0]


def dagger(b):
    return np.conj(np.swapaxes(b, -1, -2))
