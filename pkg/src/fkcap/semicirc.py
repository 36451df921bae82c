"""Spectral side of matrix-valued semicircular elements.

The ``M_m``-valued Cauchy transform of a selfadjoint semicircular element with
covariance map ``eta`` solves ``G(z) = (z 1 - eta(G(z)))^{-1}`` with
``Im G(z) < 0`` for ``Im z > 0``.  Its normalized trace is the scalar Cauchy
transform, from which the density follows by Stieltjes inversion at a small
broadening ``epsilon``:  ``rho(E) = -Im tr G(E + i eps) / pi``.

Non-selfadjoint Kraus tuples are always hermitized first, so every density
here is the symmetric distribution of ``S^h``.

Moments come from non-crossing pairings; :func:`moment_matrices` is an
independent recursion used to cross-check the enumeration.
"""
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import cpmap
from .errors import ConvergenceError, DomainError

DEFAULT_DAMPING = 0.5
DEFAULT_GRID_POINTS = 2000
DEFAULT_EPS_SCHEDULE = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
MAX_PAIRING_SIZE = 20


def _require_selfadjoint(eta):
    if not eta.is_selfadjoint:
        raise DomainError("Kraus matrices must be selfadjoint; hermitize the tuple first")


def support_radius(eta):
    """``2 ||eta^h||^{1/2}``: the spectrum of ``S^h`` lies in ``[-R, R]``."""
    return 2.0 * math.sqrt(cpmap.cp_norm(cpmap.hermitize(eta)))


# ---------------------------------------------------------------------------
# Dyson equation
# ---------------------------------------------------------------------------


def _eye_batch(p, dim):
    return np.broadcast_to(np.eye(dim, dtype=np.complex128), (p, dim, dim)).copy()


def _resolvent(stack, z, g):
    dim = g.shape[-1]
    w = z[:, None, None] * np.eye(dim) - cpmap.apply_batch(stack, g)
    return np.linalg.inv(w)


def _residual(stack, z, g):
    return np.linalg.norm(g - _resolvent(stack, z, g), axis=(-2, -1))


def damped_iteration(eta_h, z, damping=DEFAULT_DAMPING, tol=1e-12, max_iter=10_000, g0=None):
    """Damped fixed-point iteration ``G <- (1-d) G + d (z - eta(G))^{-1}``.

    Starts from ``G = 1/z`` unless ``g0`` is given.  Returns ``(G, residuals)``
    where ``residuals[k]`` is the residual before update ``k``.
    """
    _require_selfadjoint(eta_h)
    stack = eta_h.stack
    zz = np.array([complex(z)])
    dim = eta_h.m
    g = (np.eye(dim, dtype=np.complex128) / zz[0])[None] if g0 is None else np.array(g0)[None]
    history = []
    for _ in range(max_iter):
        new = _resolvent(stack, zz, g)
        res = float(np.linalg.norm(g - new))
        history.append(res)
        if res <= tol:
            break
        g = (1.0 - damping) * g + damping * new
    return g[0], history


def _damped_batch(stack, z, g, damping, tol, max_iter):
    for _ in range(max_iter):
        new = _resolvent(stack, z, g)
        res = np.linalg.norm(g - new, axis=(-2, -1))
        if np.all(res <= tol):
            return new, res
        g = (1.0 - damping) * g + damping * new
    return g, _residual(stack, z, g)


def _jacobian(stack, z, g):
    # F(G) = (z - eta(G)) G - 1;  dF[X] = (z - eta(G)) X - eta(X) G
    p, dim, _ = g.shape
    w = z[:, None, None] * np.eye(dim) - cpmap.apply_batch(stack, g)
    eye = np.eye(dim)
    j1 = np.einsum("pik,jl->pijkl", w, eye)
    ag = np.einsum("qmi,pmj->qpij", stack.conj(), g)
    j2 = np.einsum("qik,qplj->pijkl", stack, ag)
    return (j1 - j2).reshape(p, dim * dim, dim * dim), w


def _im_negative(g, rtol=1e-10):
    im = (g - np.conj(np.swapaxes(g, -1, -2))) / 2j
    lam = np.linalg.eigvalsh(im)
    scale = np.maximum(1.0, np.max(np.abs(lam), axis=-1))
    return lam[:, -1] <= rtol * scale


def _newton(stack, z, g, tol, max_iter=40):
    """Batched Newton with backtracking on ``(z - eta(G)) G = 1``."""
    p, dim, _ = g.shape
    eye = np.eye(dim)
    res = _residual(stack, z, g)
    active = res > tol
    for _ in range(max_iter):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        ga, za = g[idx], z[idx]
        jac, w = _jacobian(stack, za, ga)
        f = (w @ ga - eye).reshape(len(idx), dim * dim)
        try:
            step = np.linalg.solve(jac, -f[..., None])[..., 0].reshape(len(idx), dim, dim)
        except np.linalg.LinAlgError:
            break
        base = res[idx]
        t = np.ones(len(idx))
        accepted = np.zeros(len(idx), dtype=bool)
        trial = ga.copy()
        new_res = base.copy()
        for _ in range(20):
            todo = ~accepted
            if not np.any(todo):
                break
            cand = ga[todo] + t[todo, None, None] * step[todo]
            cres = _residual(stack, za[todo], cand)
            ok = np.isfinite(cres) & (cres < base[todo])
            sel = np.flatnonzero(todo)[ok]
            trial[sel] = cand[ok]
            new_res[sel] = cres[ok]
            accepted[sel] = True
            t[todo] *= 0.5
        if not np.any(accepted):
            break
        g[idx[accepted]] = trial[accepted]
        res[idx[accepted]] = new_res[accepted]
        stalled = idx[~accepted]
        active = res > tol
        active[stalled] = False
    return g, res


def _descend(stack, energies, g, y_from, y_to, tol, depth=0):
    """Newton continuation of ``G(E + i y)`` from ``y_from`` to ``y_to``."""
    z = energies + 1j * y_to
    g_new, res = _newton(stack, z, g.copy(), tol)
    ok = (res <= tol) & _im_negative(g_new)
    if np.all(ok) or depth >= 30:
        return g_new, res
    bad = np.flatnonzero(~ok)
    y_mid = math.sqrt(y_from * y_to)
    g_mid, _ = _descend(stack, energies[bad], g[bad], y_from, y_mid, tol, depth + 1)
    g_fix, res_fix = _descend(stack, energies[bad], g_mid, y_mid, y_to, tol, depth + 1)
    g_new[bad] = g_fix
    res[bad] = res_fix
    return g_new, res


def _start_height(stack):
    norm = float(np.max(np.linalg.eigvalsh(np.einsum("kij,klj->il", stack, stack.conj()))))
    return max(4.0, 4.0 * math.sqrt(max(norm, 0.0)))


def solve_ladder(eta_h, energies, targets, tol=1e-11, ratio=0.5):
    """``G(E + i y)`` for every energy and every broadening in ``targets``.

    The solution is computed by damped iteration high in the upper half-plane
    and then continued downward in ``y`` by Newton steps, shrinking ``y`` by
    ``ratio`` per rung; rungs that fail to converge (or leave the branch with
    ``Im G < 0``) are bisected.  Returns ``(solutions, residuals)``, dicts
    keyed by target.
    """
    _require_selfadjoint(eta_h)
    stack = eta_h.stack
    energies = np.asarray(energies, dtype=float)
    p, dim = energies.size, eta_h.m
    targets = sorted({float(t) for t in targets}, reverse=True)
    if targets[-1] <= 0:
        raise DomainError("broadening must be positive")
    y = max(_start_height(stack), targets[0])
    z = energies + 1j * y
    g0 = _eye_batch(p, dim) / z[:, None, None]
    g, res = _damped_batch(stack, z, g0, DEFAULT_DAMPING, tol, 500)
    g, res = _newton(stack, z, g, tol)
    sols, resids = {}, {}
    for target in targets:
        while y > target * (1 + 1e-12):
            y_next = max(y * ratio, target)
            g, res = _descend(stack, energies, g, y, y_next, tol)
            y = y_next
        sols[target] = g.copy()
        resids[target] = res.copy()
    return sols, resids


def mde_solve(eta_h, z, tol=1e-10):
    """Solve ``G = (z - eta_h(G))^{-1}`` at one point of the upper half-plane.

    Damped fixed-point iteration is tried first; near the real axis, where it
    contracts slowly, the solution is obtained by Newton continuation in
    ``Im z`` instead.

    Raises
    ------
    ConvergenceError
        If the residual stays above ``tol``.
    """
    z = complex(z)
    if not z.imag > 0:
        raise DomainError("mde_solve needs Im z > 0")
    g, hist = damped_iteration(eta_h, z, tol=tol, max_iter=2000)
    if hist[-1] <= tol and _im_negative(g[None])[0]:
        return g
    sols, resids = solve_ladder(eta_h, [z.real], [z.imag], tol=min(tol, 1e-11))
    g, res = sols[z.imag][0], float(resids[z.imag][0])
    if not res <= tol or not _im_negative(g[None])[0]:
        raise ConvergenceError(f"Dyson equation did not converge at z={z}", residual=res)
    return g


# ---------------------------------------------------------------------------
# Density and atoms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralGrid:
    energies: np.ndarray
    epsilon: float
    density: np.ndarray
    mass: float
    failed: np.ndarray = field(default=None, repr=False)
    support_radius: float = math.nan

    @property
    def n_failed(self):
        return 0 if self.failed is None else int(np.count_nonzero(self.failed))


def _grid(eta, n_points):
    r = support_radius(eta)
    return np.linspace(-(r + 1.0), r + 1.0, n_points), r


def _density_from_g(g):
    dim = g.shape[-1]
    rho = -np.imag(np.trace(g, axis1=-2, axis2=-1)) / (math.pi * dim)
    return np.clip(rho, 0.0, None)


def density_grids(eta, n_points=DEFAULT_GRID_POINTS, epsilons=DEFAULT_EPS_SCHEDULE, tol=1e-11):
    """One :class:`SpectralGrid` per broadening, sharing a single continuation."""
    eta_h = cpmap.hermitize(eta)
    energies, r = _grid(eta, n_points)
    sols, resids = solve_ladder(eta_h, energies, epsilons, tol=tol)
    grids = {}
    for eps, g in sols.items():
        failed = ~(resids[eps] <= max(tol, 1e-9))
        rho = _density_from_g(g)
        grids[eps] = SpectralGrid(
            energies=energies,
            epsilon=eps,
            density=rho,
            mass=float(np.trapezoid(rho, energies)),
            failed=failed,
            support_radius=r,
        )
    return grids


def density(eta, n_points=DEFAULT_GRID_POINTS, epsilon=1e-3):
    """Broadened density of ``S^h`` on a uniform grid over ``[-R-1, R+1]``."""
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    return density_grids(eta, n_points, (epsilon,))[float(epsilon)]


def _extrapolate_linear(xs, ys):
    """Value at ``x = 0`` of the line through the two points with smallest ``x``."""
    order = np.argsort(xs)
    x1, x2 = xs[order[0]], xs[order[1]]
    y1, y2 = ys[order[0]], ys[order[1]]
    return (x2 * y1 - x1 * y2) / (x2 - x1)


def atom_at_zero(eta, epsilons=DEFAULT_EPS_SCHEDULE, details=False):
    """Point mass of ``S^h`` at zero.

    ``eps * (-Im tr G(i eps))`` tends to ``mu({0})`` as ``eps -> 0`` with a
    first-order correction, removed by linear extrapolation over the two
    smallest broadenings.
    """
    eta_h = cpmap.hermitize(eta)
    sols, _ = solve_ladder(eta_h, [0.0], epsilons)
    eps = np.array(sorted(sols))
    w = np.array([e * -np.imag(np.trace(sols[e][0])) / eta_h.m for e in eps])
    val = float(np.clip(_extrapolate_linear(eps, w), 0.0, 1.0))
    if details:
        return val, dict(zip(eps.tolist(), w.tolist()))
    return val


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _nc2(lo, hi):
    if lo > hi:
        return ((),)
    out = []
    for j in range(lo + 1, hi + 1, 2):
        for inner in _nc2(lo + 1, j - 1):
            for outer in _nc2(j + 1, hi):
                out.append(((lo, j),) + inner + outer)
    return tuple(out)


def enumerate_nc2(two_k):
    """Non-crossing pairings of ``{1, ..., two_k}`` as tuples of pairs."""
    if two_k < 0 or two_k % 2 or two_k > MAX_PAIRING_SIZE:
        raise DomainError(f"need an even size between 0 and {MAX_PAIRING_SIZE}, got {two_k}")
    return [tuple(sorted(p)) for p in _nc2(1, two_k)]


def catalan(k):
    return math.comb(2 * k, k) // (k + 1)


def kappa(eta, pairing):
    """``eta_pi(1 (x) ... (x) 1)``, collapsing the left-most adjacent block each time."""
    m = eta.m
    two_k = 2 * len(pairing)
    label = [0] * two_k
    for b, (p, q) in enumerate(pairing):
        label[p - 1] = label[q - 1] = b
    args = [np.eye(m, dtype=np.complex128) for _ in range(two_k + 1)]
    while label:
        t = next(i for i in range(len(label) - 1) if label[i] == label[i + 1])
        merged = args[t] @ cpmap.apply(eta, args[t + 1]) @ args[t + 2]
        args = args[:t] + [merged] + args[t + 3 :]
        label = label[:t] + label[t + 2 :]
    return args[0]


def moment(eta, k):
    """``tr_m E[S^{2k}]`` as a sum over non-crossing pairings."""
    _require_selfadjoint(eta)
    if k < 0 or k > MAX_PAIRING_SIZE // 2:
        raise DomainError(f"k must lie in [0, {MAX_PAIRING_SIZE // 2}]")
    total = np.zeros((eta.m, eta.m), dtype=np.complex128)
    for pi in enumerate_nc2(2 * k):
        total += kappa(eta, pi)
    return float(np.real(np.trace(total))) / eta.m


def moment_matrices(eta, k_max):
    """``E[S^{2k}]`` for ``k = 0..k_max`` by ``M_k = sum_j eta(M_j) M_{k-1-j}``."""
    mats = [np.eye(eta.m, dtype=np.complex128)]
    for k in range(1, k_max + 1):
        acc = np.zeros((eta.m, eta.m), dtype=np.complex128)
        for j in range(k):
            acc += cpmap.apply(eta, mats[j]) @ mats[k - 1 - j]
        mats.append(acc)
    return mats


def semicircle_deviation_bound(eta, k):
    """``C_k (sum_{j<k} ||eta||^j) ||eta(1) - 1||``."""
    if k < 1:
        raise DomainError("k must be >= 1")
    norm = cpmap.cp_norm(eta)
    dev = cpmap.apply(eta, np.eye(eta.m)) - np.eye(eta.m)
    dev_norm = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (dev + dev.conj().T)))))
    return catalan(k) * sum(norm**j for j in range(k)) * dev_norm


@dataclass(frozen=True)
class MomentTable:
    k_max: int
    moments: tuple
    bounds: tuple
    catalan: tuple

    @property
    def holds(self):
        return tuple(
            abs(mk - ck) <= bk * (1 + 1e-12) + 1e-12 * max(1.0, abs(mk))
            for mk, ck, bk in zip(self.moments, self.catalan, self.bounds)
        )

    def to_dict(self):
        return {
            "k_max": self.k_max,
            "moments": list(self.moments),
            "catalan": list(self.catalan),
            "bounds": list(self.bounds),
            "bound_holds": list(self.holds),
        }


def moment_table(eta, k_max):
    """Moments of ``S`` (hermitized when the Kraus matrices are not selfadjoint)."""
    if not eta.is_selfadjoint:
        eta = cpmap.hermitize(eta)
    moments = tuple(moment(eta, k) for k in range(k_max + 1))
    bounds = (0.0,) + tuple(semicircle_deviation_bound(eta, k) for k in range(1, k_max + 1))
    return MomentTable(k_max, moments, bounds, tuple(catalan(k) for k in range(k_max + 1)))
