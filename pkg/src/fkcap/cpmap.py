"""Completely positive maps in Kraus form.

A :class:`KrausTuple` ``(a_1, ..., a_n)`` of ``m x m`` matrices stands for the
map ``eta(b) = sum_i a_i b a_i^*`` and its dual ``eta^*(b) = sum_i a_i^* b a_i``.
All operations return new tuples; stored arrays are read-only.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .matkernel import as_matrix, herm_eig, is_hermitian

__all__ = [
    "KrausTuple",
    "ChoiMatrix",
    "apply",
    "apply_dual",
    "ds",
    "scale",
    "depolarize",
    "cp_norm",
    "hermitize",
    "dual",
    "concatenate",
    "choi",
    "kraus_from_choi",
]


def _exact_integer(arr):
    return bool(np.all(arr.imag == 0.0) and np.all(arr.real == np.round(arr.real)))


class KrausTuple:
    """Immutable tuple of ``n >= 1`` square complex matrices of equal size.

    ``integer_flag`` is decided once, here, by exact comparison of the stored
    doubles: every entry must have zero imaginary part and an integral real
    part.
    """

    __slots__ = ("kraus", "integer_flag")

    def __init__(self, kraus):
        mats = []
        for i, a in enumerate(kraus):
            try:
                arr = np.array(as_matrix(a), dtype=np.complex128, copy=True)
            except DomainError as exc:
                raise DomainError(f"Kraus matrix {i}: {exc}") from None
            arr.setflags(write=False)
            mats.append(arr)
        if not mats:
            raise DomainError("a Kraus tuple needs at least one matrix")
        m = mats[0].shape[0]
        for i, arr in enumerate(mats):
            if arr.shape != (m, m):
                raise DomainError(f"Kraus matrix {i} has shape {arr.shape}, expected {(m, m)}")
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"Kraus matrix {i} has non-finite entries")
        object.__setattr__(self, "kraus", tuple(mats))
        object.__setattr__(self, "integer_flag", all(_exact_integer(a) for a in mats))

    def __setattr__(self, name, value):
        raise AttributeError("KrausTuple is immutable")

    def __repr__(self):
        return f"KrausTuple(m={self.m}, n={self.n}, integer={self.integer_flag})"

    @property
    def m(self):
        return self.kraus[0].shape[0]

    @property
    def n(self):
        return len(self.kraus)

    @property
    def stack(self):
        """The Kraus matrices as one ``(n, m, m)`` array."""
        return np.stack(self.kraus)

    @property
    def is_selfadjoint(self):
        return all(is_hermitian(a) for a in self.kraus)

    @property
    def bit_size(self):
        """Largest bit length of an entry magnitude (0 for non-integer tuples)."""
        if not self.integer_flag:
            return 0
        biggest = max(int(np.max(np.abs(a.real))) for a in self.kraus)
        return biggest.bit_length()

    def __iter__(self):
        return iter(self.kraus)

    def __len__(self):
        return len(self.kraus)

    def __eq__(self, other):
        if not isinstance(other, KrausTuple):
            return NotImplemented
        if (other.n, other.m) != (self.n, self.m):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.kraus, other.kraus))

    def __hash__(self):
        return hash(tuple(a.tobytes() for a in self.kraus))


@dataclass(frozen=True)
class ChoiMatrix:
    """Choi matrix ``C = sum_ij E_ij (x) eta(E_ij)`` of a map on ``M_m``."""

    m: int
    entries: np.ndarray

    def __post_init__(self):
        c = np.array(self.entries, dtype=np.complex128, copy=True)
        d = self.m * self.m
        if c.shape != (d, d):
            raise DomainError(f"Choi matrix must be {d}x{d}, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "entries", c)

    @classmethod
    def from_array(cls, arr):
        a = as_matrix(arr)
        m = int(round(np.sqrt(a.shape[0])))
        if m * m != a.shape[0]:
            raise DomainError(f"Choi matrix size {a.shape[0]} is not a perfect square")
        return cls(m, a)


def _check_arg(eta, b):
    b = as_matrix(b)
    if b.shape[0] != eta.m:
        raise DomainError(f"argument is {b.shape[0]}x{b.shape[0]}, map acts on {eta.m}x{eta.m}")
    return b


def apply(eta, b):
    """``sum_i a_i b a_i^*``."""
    b = _check_arg(eta, b)
    a = eta.stack
    return np.einsum("kij,jl,kml->im", a, b, a.conj(), optimize=True)


def apply_dual(eta, b):
    """``sum_i a_i^* b a_i``."""
    b = _check_arg(eta, b)
    a = eta.stack
    return np.einsum("kji,jl,klm->im", a.conj(), b, a, optimize=True)


def apply_batch(kraus_stack, g):
    """Apply the map with Kraus stack ``(n, m, m)`` to a batch ``(..., m, m)``."""
    return np.einsum("kij,...jl,kml->...im", kraus_stack, g, kraus_stack.conj(), optimize=True)


def _sq_dev(x):
    d = x - np.eye(x.shape[0])
    return float(np.real(np.trace(d @ d)))


def ds(eta):
    """``Tr((eta(1)-1)^2) + Tr((eta^*(1)-1)^2)``: distance from double stochasticity."""
    one = np.eye(eta.m)
    return _sq_dev(apply(eta, one)) + _sq_dev(apply_dual(eta, one))


def scale(eta, c1, c2):
    """Operator scaling at Kraus level: ``{c1 a_i c2}``.

    The resulting map is ``b -> c1 eta(c2 b c2^*) c1^*``; for hermitian ``c2``
    this is the usual ``c1 eta(c2^* b c2) c1^*``.
    """
    c1 = _check_arg(eta, c1)
    c2 = _check_arg(eta, c2)
    return KrausTuple([c1 @ a @ c2 for a in eta.kraus])


def dual(eta):
    """Kraus tuple ``{a_i^*}`` of the dual map."""
    return KrausTuple([a.conj().T for a in eta.kraus])


def concatenate(*etas):
    """Kraus tuple of the sum of maps."""
    m = etas[0].m
    if any(e.m != m for e in etas):
        raise DomainError("cannot add maps acting on different matrix sizes")
    return KrausTuple([a for e in etas for a in e.kraus])


def depolarize(eta, t):
    """Kraus tuple of ``eta + t * eta_flat`` with ``eta_flat(b) = tr_m(b) 1_m``.

    ``eta_flat`` is realized by the ``m^2`` matrix units scaled by ``sqrt(t/m)``.
    """
    if not t >= 0:
        raise DomainError(f"depolarizing weight must be >= 0, got {t}")
    if t == 0:
        return eta
    m = eta.m
    w = np.sqrt(t / m)
    units = []
    for i in range(m):
        for j in range(m):
            e = np.zeros((m, m), dtype=np.complex128)
            e[i, j] = w
            units.append(e)
    return KrausTuple(list(eta.kraus) + units)


def cp_norm(eta):
    """``||eta|| = ||eta(1)||`` (largest eigenvalue), valid for CP maps."""
    lam, _ = herm_eig(apply(eta, np.eye(eta.m)))
    return float(lam[-1])


def hermitize(eta):
    """Selfadjoint Kraus tuple ``{[[0, a_i], [a_i^*, 0]]}`` of size ``2m``."""
    m = eta.m
    out = []
    for a in eta.kraus:
        h = np.zeros((2 * m, 2 * m), dtype=np.complex128)
        h[:m, m:] = a
        h[m:, :m] = a.conj().T
        out.append(h)
    return KrausTuple(out)


def choi(eta):
    m = eta.m
    c = np.zeros((m * m, m * m), dtype=np.complex128)
    for a in eta.kraus:
        # column i of the vector is a e_i, so v[(i, r)] = a[r, i]
        v = a.T.reshape(-1)
        c += np.outer(v, v.conj())
    return ChoiMatrix(m, c)


def kraus_from_choi(c, rtol=1e-10, psd_rtol=1e-10):
    """Kraus tuple from a Choi matrix via its eigendecomposition.

    Eigenvalues below ``rtol * ||C||`` are dropped.

    Raises
    ------
    DomainError
        If ``C`` is not hermitian, has an eigenvalue below
        ``-psd_rtol * max(1, ||C||)``, or is (numerically) zero.
    """
    if not isinstance(c, ChoiMatrix):
        c = ChoiMatrix.from_array(c)
    mat = c.entries
    if not is_hermitian(mat, rtol=1e-10):
        raise DomainError("Choi matrix must be hermitian")
    lam, u = herm_eig(mat)
    top = max(abs(lam[0]), abs(lam[-1]))
    if lam[0] < -psd_rtol * max(1.0, top):
        err = DomainError(
            f"Choi matrix is not positive semidefinite (most negative eigenvalue {lam[0]:.3e})"
        )
        err.min_eigenvalue = float(lam[0])
        raise err
    keep = lam > rtol * top if top > 0 else np.zeros_like(lam, dtype=bool)
    if not np.any(keep):
        raise DomainError("Choi matrix is zero; a Kraus tuple needs at least one term")
    m = c.m
    mats = []
    for k in np.flatnonzero(keep)[::-1]:
        v = np.sqrt(lam[k]) * u[:, k]
        mats.append(v.reshape(m, m).T)
    return KrausTuple(mats)
