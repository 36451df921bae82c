"""Capacity of completely positive maps.

``cap(eta) = inf { det eta(b) / det b : b > 0 }``.  Two independent routes are
provided:

* :func:`estimate_capacity` runs alternating operator-Sinkhorn normalization
  and reads the capacity off the accumulated normalizer determinants;
* :func:`brute_force_capacity` minimizes the objective directly over a
  Cholesky-style parametrization of ``b`` (multi-start quasi-Newton).

All determinants are carried in log space.
"""
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from . import cpmap
from .errors import DomainError, SingularityError
from .matkernel import inv_sqrt_psd, logdet_pd

DEFAULT_TOL = 1e-8
DEFAULT_STARTS = 16
INTEGER_BOUND_SLACK = 1e-6


class Status(str, enum.Enum):
    CONVERGED = "converged"
    RANK_DECREASING_SUSPECTED = "rank_decreasing_suspected"
    BUDGET_EXHAUSTED = "iteration_budget_exhausted"


class Verdict(str, enum.Enum):
    NONDECREASING = "nondecreasing"
    DECREASING = "decreasing"
    INCONCLUSIVE = "inconclusive"


def default_budget(eta):
    """``200 m^2 (1 + bit size)`` steps; the bit-size term applies to integer tuples only."""
    return 200 * eta.m**2 * (1 + eta.bit_size)


def decision_threshold(m):
    return 1.0 / (m + 1)


def capacity_objective_log(eta, b):
    """``log det eta(b) - log det b``; ``-inf`` when ``eta(b)`` is singular."""
    logdet_b = logdet_pd(b)
    try:
        return logdet_pd(cpmap.apply(eta, b)) - logdet_b
    except SingularityError:
        return -math.inf


def capacity_objective(eta, b):
    """``det eta(b) / det b`` for positive definite ``b``.

    Any such ``b`` gives an upper bound on ``cap(eta)``.  Returns 0 when
    ``eta(b)`` is singular, which certifies ``cap(eta) = 0``.
    """
    return math.exp(capacity_objective_log(eta, b))


@dataclass(frozen=True)
class ScalingState:
    """Snapshot of the alternating scaling.

    ``current`` is ``{C1 a_i C2}`` where ``C1``/``C2`` are the products of all
    left/right normalizers so far.  ``acc_log_left`` and ``acc_log_right``
    hold ``log |det C1|^2`` and ``log |det C2|^2``, so that
    ``log cap(original) = log cap(current) - acc_log_left - acc_log_right``.
    ``right_factor`` is ``C2``; the candidate minimizer is ``C2 C2^*``.
    """

    current: cpmap.KrausTuple
    acc_log_left: float = 0.0
    acc_log_right: float = 0.0
    right_factor: np.ndarray = None
    ds_history: tuple = ()
    iter: int = 0

    @classmethod
    def start(cls, eta):
        return cls(
            current=eta,
            right_factor=np.eye(eta.m, dtype=np.complex128),
            ds_history=(cpmap.ds(eta),),
        )

    @property
    def witness_b(self):
        c2 = self.right_factor
        return c2 @ c2.conj().T

    @property
    def log_objective(self):
        """``log det eta(C2 C2^*) - log det(C2 C2^*)`` of the original map."""
        one = np.eye(self.current.m)
        try:
            val = logdet_pd(cpmap.apply(self.current, one))
        except SingularityError:
            return -math.inf
        return val - self.acc_log_left - self.acc_log_right


def sinkhorn_step(state, side):
    """One normalization of the current Kraus tuple.

    ``side="left"`` multiplies by ``eta(1)^{-1/2}`` on the left so that the new
    map is unital; ``side="right"`` multiplies by ``eta^*(1)^{-1/2}`` on the
    right so that the new dual is unital.

    Raises
    ------
    SingularityError
        If the normalizer does not exist.  A singular ``eta(1)`` (or
        ``eta^*(1)``) of a scaled map is a certificate that the original map
        is rank-decreasing.
    """
    cur = state.current
    one = np.eye(cur.m)
    if side == "left":
        target = cpmap.apply(cur, one)
        c = inv_sqrt_psd(target)
        new = cpmap.KrausTuple([c @ a for a in cur.kraus])
        upd = dict(acc_log_left=state.acc_log_left - logdet_pd(target))
    elif side == "right":
        target = cpmap.apply_dual(cur, one)
        c = inv_sqrt_psd(target)
        new = cpmap.KrausTuple([a @ c for a in cur.kraus])
        upd = dict(
            acc_log_right=state.acc_log_right - logdet_pd(target),
            right_factor=state.right_factor @ c,
        )
    else:
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    return replace(
        state,
        current=new,
        ds_history=state.ds_history + (cpmap.ds(new),),
        iter=state.iter + 1,
        **upd,
    )


@dataclass(frozen=True)
class CapacityReport:
    cap_upper: float
    cap_estimate: float
    ds_final: float
    status: Status
    witness_b: np.ndarray
    iterations: int
    log_cap_upper: float = -math.inf
    slack: float = math.inf
    tol: float = DEFAULT_TOL
    max_iters: int = 0
    ds_history: tuple = field(default=(), repr=False)

    def to_dict(self):
        return {
            "cap_upper": self.cap_upper,
            "cap_estimate": self.cap_estimate,
            "log_cap_upper": self.log_cap_upper,
            "ds_final": self.ds_final,
            "slack": self.slack,
            "status": self.status.value,
            "iterations": self.iterations,
            "tol": self.tol,
            "max_iters": self.max_iters,
            "witness_b": matrix_to_json(self.witness_b) if self.witness_b is not None else None,
        }


def matrix_to_json(b):
    b = np.asarray(b)
    if np.all(b.imag == 0):
        return [[float(x) for x in row] for row in b.real]
    return [[[float(x.real), float(x.imag)] for x in row] for row in b]


def _normalized_witness(b):
    sign, logdet = np.linalg.slogdet(b)
    return b * math.exp(-logdet / b.shape[0])


def _run_scaling(eta, tol, max_iters):
    """Alternate right/left steps until ``ds < tol``.

    Returns ``(best_state, last_state, status)`` where ``best_state`` has the
    smallest objective among all visited iterates.
    """
    state = ScalingState.start(eta)
    best, best_val = state, state.log_objective
    side = "right"
    status = Status.BUDGET_EXHAUSTED
    while True:
        if state.ds_history[-1] < tol:
            status = Status.CONVERGED
            break
        if state.iter >= max_iters:
            break
        try:
            state = sinkhorn_step(state, side)
        except SingularityError:
            status = Status.RANK_DECREASING_SUSPECTED
            best_val = -math.inf
            break
        val = state.log_objective
        if val < best_val:
            best, best_val = state, val
        side = "left" if side == "right" else "right"
    return best, best_val, state, status


def estimate_capacity(eta, tol=DEFAULT_TOL, max_iters=None):
    """Capacity by operator-Sinkhorn scaling.

    The scaling starts with a right step and alternates.  Each iterate
    ``{C1 a_i C2}`` gives the rigorous upper bound
    ``det eta(B) / det B`` with ``B = C2 C2^*``; ``cap_upper`` is the smallest
    of these.  Near double stochasticity the bound is tight up to a factor
    ``exp(O(ds))``, recorded as ``slack``; ``cap_estimate`` is that bound.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    if max_iters is None:
        max_iters = default_budget(eta)
    best, best_val, last, status = _run_scaling(eta, tol, max_iters)
    if status is Status.RANK_DECREASING_SUSPECTED or best_val == -math.inf:
        return CapacityReport(
            cap_upper=0.0,
            cap_estimate=0.0,
            ds_final=last.ds_history[-1],
            status=Status.RANK_DECREASING_SUSPECTED,
            witness_b=_normalized_witness(last.witness_b),
            iterations=last.iter,
            log_cap_upper=-math.inf,
            slack=0.0,
            tol=tol,
            max_iters=max_iters,
            ds_history=last.ds_history,
        )
    cap = math.exp(best_val)
    return CapacityReport(
        cap_upper=cap,
        cap_estimate=cap,
        ds_final=last.ds_history[-1],
        status=status,
        witness_b=_normalized_witness(best.witness_b),
        iterations=last.iter,
        log_cap_upper=best_val,
        slack=last.ds_history[-1],
        tol=tol,
        max_iters=max_iters,
        ds_history=last.ds_history,
    )


def decide_rank_nondecreasing(eta, budget=None):
    """Rank non-decreasing test via scaling.

    ``nondecreasing`` once some iterate has ``ds < 1/(m+1)``; ``decreasing``
    if a normalizer is singular, or for integer tuples when the budget runs
    out first; ``inconclusive`` otherwise.
    """
    if budget is None:
        budget = default_budget(eta)
    thresh = decision_threshold(eta.m)
    state = ScalingState.start(eta)
    side = "right"
    while True:
        if state.ds_history[-1] < thresh:
            return Verdict.NONDECREASING
        if state.iter >= budget:
            return Verdict.DECREASING if eta.integer_flag else Verdict.INCONCLUSIVE
        try:
            state = sinkhorn_step(state, side)
        except SingularityError:
            return Verdict.DECREASING
        side = "left" if side == "right" else "right"


@dataclass(frozen=True)
class OracleResult:
    value: float
    log_value: float
    certified: bool
    witness_b: np.ndarray
    starts: int

    def to_dict(self):
        return {
            "value": self.value,
            "log_value": self.log_value,
            "certified": self.certified,
            "starts": self.starts,
        }


def _unpack(theta, m, tril):
    low = np.zeros((m, m), dtype=np.complex128)
    k = len(tril[0])
    low[np.diag_indices(m)] = np.exp(theta[:m])
    low[tril] = theta[m : m + k] + 1j * theta[m + k :]
    return low


def _objective_and_grad(theta, eta, m, tril):
    low = _unpack(theta, m, tril)
    b = low @ low.conj().T
    eb = cpmap.apply(eta, b)
    try:
        chol = np.linalg.cholesky(0.5 * (eb + eb.conj().T))
    except np.linalg.LinAlgError:
        return np.inf, np.zeros_like(theta)
    f = 2.0 * np.sum(np.log(np.real(np.diag(chol)))) - 2.0 * np.sum(theta[:m])
    eb_inv = np.linalg.inv(eb)
    b_inv = np.linalg.inv(b)
    g_mat = cpmap.apply_dual(eta, eb_inv) - b_inv
    gl = 2.0 * (g_mat @ low)
    grad = np.empty_like(theta)
    grad[:m] = np.real(np.diag(gl)) * np.exp(theta[:m])
    k = len(tril[0])
    grad[m : m + k] = np.real(gl[tril])
    grad[m + k :] = np.imag(gl[tril])
    return f, grad


def brute_force_capacity(eta, budget=2000, starts=DEFAULT_STARTS, seed=0):
    """Direct minimization of ``log det eta(b) - log det b``.

    ``b = L L^*`` with ``L`` lower triangular, positive (log-parametrized)
    diagonal and free complex sub-diagonal entries.  The first start is the
    identity; the others are random.  The best value over all starts is an
    upper bound on ``cap(eta)``; ``certified`` is false when no start reached
    the optimizer's convergence test within ``budget`` iterations.
    """
    m = eta.m
    if m > 4:
        raise DomainError("brute_force_capacity is limited to m <= 4")
    tril = np.tril_indices(m, -1)
    k = len(tril[0])
    rng = np.random.default_rng(seed)
    best_val, best_theta, certified = math.inf, None, False
    for s in range(starts):
        theta0 = np.zeros(m + 2 * k)
        if s > 0:
            theta0 = rng.normal(scale=0.5, size=theta0.shape)
        f0, _ = _objective_and_grad(theta0, eta, m, tril)
        if not np.isfinite(f0):
            continue
        res = scipy.optimize.minimize(
            _objective_and_grad,
            theta0,
            args=(eta, m, tril),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": budget, "gtol": 1e-11, "ftol": 1e-15, "maxcor": 30},
        )
        val = float(res.fun)
        grad_ok = np.max(np.abs(res.jac)) < 1e-6 if res.jac is not None else False
        if val < best_val:
            best_val, best_theta = val, res.x
        certified = certified or (res.success or grad_ok)
    if best_theta is None:
        return OracleResult(0.0, -math.inf, True, np.eye(m), starts)
    low = _unpack(best_theta, m, tril)
    return OracleResult(
        value=math.exp(best_val),
        log_value=best_val,
        certified=certified,
        witness_b=_normalized_witness(low @ low.conj().T),
        starts=starts,
    )


@dataclass(frozen=True)
class IntegerBoundReport:
    verdict: Verdict
    cap_estimate: float
    cap_upper: float
    status: Status
    bound_holds: bool = None

    def to_dict(self):
        return {
            "verdict": self.verdict.value,
            "cap_estimate": self.cap_estimate,
            "cap_upper": self.cap_upper,
            "status": self.status.value,
            "bound_holds": self.bound_holds,
        }


def check_integer_bound(eta, tol=DEFAULT_TOL, max_iters=None):
    """Integer-coefficient lower bound: rank non-decreasing implies ``cap >= 1``.

    ``bound_holds`` is ``None`` when the verdict is not ``nondecreasing``.
    """
    if not eta.integer_flag:
        raise DomainError("integer bound check needs a Kraus tuple with integer entries")
    verdict = decide_rank_nondecreasing(eta)
    rep = estimate_capacity(eta, tol=tol, max_iters=max_iters)
    holds = None
    if verdict is Verdict.NONDECREASING:
        holds = rep.cap_upper >= 1.0 - INTEGER_BOUND_SLACK
    return IntegerBoundReport(verdict, rep.cap_estimate, rep.cap_upper, rep.status, holds)
