"""Fuglede-Kadison determinants.

Three routes:

* finite matrices: ``Delta(b) = |det b|^{1/m}``;
* capacity: ``Delta(S) = cap(eta)^{1/(2m)} exp(-1/2)``;
* spectral: ``Delta(S) = exp(int log|t| dmu_{S^h}(t))`` from broadened
  densities of the hermitization, extrapolated to zero broadening.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import capacity, semicirc
from .errors import DomainError
from .matkernel import as_matrix, logabsdet

ATOM_THRESHOLD = 0.05
COROLLARY_RTOL = 1e-2


def exp_minus_half():
    return math.exp(-0.5)


@dataclass(frozen=True)
class FkResult:
    value: float
    route: str
    certified: bool = True
    atom: bool = False
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "value": self.value,
            "route": self.route,
            "certified": self.certified,
            "atom": self.atom,
            "diagnostics": self.diagnostics,
        }


def fk_det_matrix(b):
    """``det(b b^*)^{1/(2m)}``, 0 for singular ``b``."""
    a = as_matrix(b)
    return math.exp(logabsdet(a) / a.shape[0])


def fk_det_capacity(eta, tol=capacity.DEFAULT_TOL, max_iters=None):
    rep = capacity.estimate_capacity(eta, tol=tol, max_iters=max_iters)
    diag = {
        "cap_estimate": rep.cap_estimate,
        "cap_upper": rep.cap_upper,
        "status": rep.status.value,
        "iterations": rep.iterations,
        "ds_final": rep.ds_final,
    }
    if rep.status is capacity.Status.RANK_DECREASING_SUSPECTED:
        return FkResult(0.0, "capacity", certified=True, atom=True, diagnostics=diag)
    value = math.exp(rep.log_cap_upper / (2 * eta.m) - 0.5)
    return FkResult(
        value,
        "capacity",
        certified=rep.status is capacity.Status.CONVERGED,
        diagnostics=diag,
    )


def _log_moment_cell(x0, x1, r0, r1):
    """Exact integral of ``log|x|`` times the linear interpolant of ``r`` over each cell."""

    def f0(x):
        ax = np.abs(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = x * np.log(ax) - x
        return np.where(ax > 0, v, 0.0)

    def f1(x):
        ax = np.abs(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = 0.5 * x * x * np.log(ax) - 0.25 * x * x
        return np.where(ax > 0, v, 0.0)

    h = x1 - x0
    slope = (r1 - r0) / h
    icpt = r0 - slope * x0
    return icpt * (f0(x1) - f0(x0)) + slope * (f1(x1) - f1(x0))


def log_integral(grid):
    """``int log|E| rho(E) dE`` over the whole line for a broadened density.

    Inside the grid the density is linearly interpolated and integrated
    exactly against ``log|E|``.  Outside, the broadened density decays like
    ``c / E^2``; ``c`` is matched at each grid end and the tail integrated in
    closed form.  Returns ``(log_integral, mass)`` with both tails included.
    """
    e, rho = grid.energies, grid.density
    inner = float(np.sum(_log_moment_cell(e[:-1], e[1:], rho[:-1], rho[1:])))
    mass = float(np.trapezoid(rho, e))
    for x_end, r_end in ((abs(e[0]), rho[0]), (abs(e[-1]), rho[-1])):
        c = r_end * x_end * x_end
        inner += c * (math.log(x_end) + 1.0) / x_end
        mass += c / x_end
    return inner, mass


def fk_det_spectral(
    eta,
    eps_schedule=semicirc.DEFAULT_EPS_SCHEDULE,
    n_points=semicirc.DEFAULT_GRID_POINTS,
):
    """Determinant of ``S`` from the spectral measure of its hermitization.

    For broadening ``eps`` the full-line integral of ``log|E|`` against the
    broadened density equals ``int log|t + i eps| dmu(t)``, which converges
    to the log-determinant linearly in ``eps``; the two smallest broadenings
    are combined by Richardson extrapolation.  An extrapolated atom at zero
    above 0.05 returns 0.
    """
    eps_schedule = tuple(sorted({float(e) for e in eps_schedule}, reverse=True))
    if len(eps_schedule) < 2:
        raise DomainError("the broadening schedule needs at least two values")
    atom, atom_series = semicirc.atom_at_zero(eta, eps_schedule, details=True)
    diag = {"atom_at_zero": atom, "eps_schedule": list(eps_schedule), "grid_points": n_points}
    if atom > ATOM_THRESHOLD:
        return FkResult(0.0, "spectral", certified=True, atom=True, diagnostics=diag)
    grids = semicirc.density_grids(eta, n_points, eps_schedule)
    eps = np.array(sorted(grids))
    logs, masses, failed = [], [], 0
    for e in eps:
        li, mass = log_integral(grids[e])
        logs.append(float(li))
        masses.append(float(mass))
        failed += grids[e].n_failed
    log_delta = float(semicirc._extrapolate_linear(eps, np.array(logs)))
    diag.update(
        {
            "per_eps_log_delta": dict(zip(eps.tolist(), logs)),
            "per_eps_mass": dict(zip(eps.tolist(), masses)),
            "log_delta": log_delta,
            "failed_points": failed,
        }
    )
    return FkResult(math.exp(log_delta), "spectral", certified=failed == 0, diagnostics=diag)


@dataclass(frozen=True)
class CorollaryReport:
    verdict: capacity.Verdict
    capacity_value: float = None
    spectral_value: float = None
    bound: float = field(default_factory=exp_minus_half)
    passed: bool = None

    def to_dict(self):
        return {
            "verdict": self.verdict.value,
            "capacity_value": self.capacity_value,
            "spectral_value": self.spectral_value,
            "bound": self.bound,
            "passed": self.passed,
        }


def corollary_bound_check(eta, spectral=True, **spectral_kwargs):
    """Integer tuples with a rank non-decreasing map have ``Delta(S) >= e^{-1/2}``.

    Both routes are compared against ``e^{-1/2} (1 - 1e-2)``; the check is
    skipped (``passed is None``) unless the verdict is ``nondecreasing``.
    """
    if not eta.integer_flag:
        raise DomainError("the corollary check needs a Kraus tuple with integer entries")
    verdict = capacity.decide_rank_nondecreasing(eta)
    if verdict is not capacity.Verdict.NONDECREASING:
        return CorollaryReport(verdict)
    floor = exp_minus_half() * (1.0 - COROLLARY_RTOL)
    cap_val = fk_det_capacity(eta).value
    spec_val = fk_det_spectral(eta, **spectral_kwargs).value if spectral else None
    ok = cap_val >= floor and (spec_val is None or spec_val >= floor)
    return CorollaryReport(verdict, cap_val, spec_val, passed=ok)
