"""Newton solver for the small implicit systems of the time steppers.

Condition numbers are 2-norm condition numbers from singular values; the
systems here have at most ``d + 1`` unknowns so this is cheap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonConvergenceError, SingularSystemError

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
SINGULAR_THRESHOLD = 1e12
MAX_HALVINGS = 30
FD_STEP = 1e-6
POLISH_STEPS = 2


@dataclass(frozen=True)
class ResidualSystem:
    arity: int
    residual: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    constraint: Optional[Callable[[np.ndarray], bool]] = None

    def jac(self, x):
        if self.jacobian is None:
            return jacobian_fd(self.residual, x)
        return np.asarray(self.jacobian(x), dtype=float).reshape(self.arity, self.arity)

    def admissible(self, x) -> bool:
        return bool(np.all(np.isfinite(x))) and (self.constraint is None or self.constraint(x))


@dataclass(frozen=True)
class SolverReport:
    converged: bool
    iterations: int
    residual_norm: float
    condition_estimate: float
    fallback_used: bool = False
    history: tuple = field(default=(), compare=False, repr=False)


def condition_number(matrix) -> float:
    """2-norm condition ``s_max / s_min``; ``inf`` for numerically singular input."""
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"condition_number needs a square matrix, got {A.shape}")
    if not np.all(np.isfinite(A)):
        return float("inf")
    if A.shape == (1, 1):
        return 1.0 if A[0, 0] != 0.0 else float("inf")
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0 or s[-1] <= np.finfo(float).eps * s[0]:
        return float("inf")
    return float(s[0] / s[-1])


def jacobian_fd(residual, x, step: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian with step ``step * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(residual(x))
    J = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = step * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        # divide by the representable spacing, not the nominal one
        J[:, i] = (np.atleast_1d(residual(xp)) - np.atleast_1d(residual(xm))) / (xp[i] - xm[i])
    return J


def _inf_norm(r) -> float:
    return float(np.max(np.abs(r)))


def _halve_into_domain(system, x, dx):
    trial = x + dx
    for _ in range(MAX_HALVINGS):
        if system.admissible(trial):
            return trial
        dx = 0.5 * dx
        trial = x + dx
    return trial if system.admissible(trial) else None


def _polish(system, x, r, J, it, rnorm, max_iter, history):
    # Extra steps below tol while they still pay off; the step equations feed
    # their residual straight into the propagated energy.  J is reused: the
    # iterate moves by O(tol) so it is the Jacobian at the solution.
    for _ in range(POLISH_STEPS):
        if it >= max_iter or rnorm == 0.0:
            break
        trial = x + np.linalg.solve(J, -r)
        if not system.admissible(trial):
            break
        rt = np.atleast_1d(system.residual(trial))
        rt_norm = _inf_norm(rt)
        if not rt_norm < rnorm:
            break
        x, r, rnorm, it = trial, rt, rt_norm, it + 1
        history.append(rnorm)
    return x, it, rnorm


def newton_solve(system: ResidualSystem, guess, tol: float = NEWTON_TOL,
                 max_iter: int = NEWTON_MAX_ITER,
                 singular_threshold: float = SINGULAR_THRESHOLD, polish: bool = True):
    """Solve ``residual(x) = 0`` by Newton's method, staying inside the constraint.

    A trial iterate outside the admissible set is pulled back by halving the
    Newton step (at most 30 times).  Once the residual is below ``tol`` up to
    two more steps are taken as long as they strictly reduce it (unless
    ``polish`` is false).  The Jacobian condition is checked at every iterate
    and at the returned point; above ``singular_threshold`` the root is
    considered indeterminate and :class:`SingularSystemError` is raised.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.array(guess, dtype=float).reshape(system.arity)
    if not system.admissible(x):
        raise ValueError("initial guess violates the constraint")

    history = []
    cond = float("nan")
    for it in range(max_iter + 1):
        r = np.atleast_1d(system.residual(x))
        rnorm = _inf_norm(r)
        history.append(rnorm)
        J = system.jac(x)
        cond = condition_number(J)
        if cond > singular_threshold:
            report = SolverReport(False, it, rnorm, cond, history=tuple(history))
            raise SingularSystemError(f"Jacobian condition {cond:.3e} exceeds threshold", x, report)
        if rnorm <= tol:
            if polish:
                moved = it
                x, it, rnorm = _polish(system, x, r, J, it, rnorm, max_iter, history)
                if it != moved:
                    cond = condition_number(system.jac(x))
                    if cond > singular_threshold:
                        report = SolverReport(False, it, rnorm, cond, history=tuple(history))
                        raise SingularSystemError(f"Jacobian condition {cond:.3e} exceeds threshold",
                                                  x, report)
            return x, SolverReport(True, it, rnorm, cond, history=tuple(history))
        if it == max_iter:
            break
        dx = np.linalg.solve(J, -r)
        trial = _halve_into_domain(system, x, dx)
        if trial is None:
            report = SolverReport(False, it, rnorm, cond, history=tuple(history))
            raise NonConvergenceError("no admissible Newton step after halving", x, report)
        x = trial

    report = SolverReport(False, max_iter, history[-1], cond, history=tuple(history))
    raise NonConvergenceError(f"no convergence in {max_iter} iterations", x, report)


def least_squares_solve(system: ResidualSystem, guess, grad_tol: float = 1e-10,
                        max_iter: int = NEWTON_MAX_ITER,
                        singular_threshold: float = SINGULAR_THRESHOLD):
    """Minimise ``sum(residual(x)**2)`` by Gauss-Newton until the gradient is small.

    Stops as soon as ``|2 J^T r|_inf <= grad_tol``, which in ill-conditioned
    directions leaves a residual far above what a root solve would reach.
    Steps are halved until admissible and non-increasing in the objective.
    """
    x = np.array(guess, dtype=float).reshape(system.arity)
    if not system.admissible(x):
        raise ValueError("initial guess violates the constraint")

    history = []
    for it in range(max_iter + 1):
        r = np.atleast_1d(system.residual(x))
        history.append(_inf_norm(r))
        J = system.jac(x)
        cond = condition_number(J)
        if cond > singular_threshold:
            report = SolverReport(False, it, history[-1], cond, history=tuple(history))
            raise SingularSystemError(f"Jacobian condition {cond:.3e} exceeds threshold", x, report)
        grad = 2.0 * J.T @ r
        if _inf_norm(grad) <= grad_tol:
            return x, SolverReport(True, it, history[-1], cond, history=tuple(history))
        if it == max_iter:
            break
        dx = np.linalg.lstsq(J, -r, rcond=None)[0]
        obj = float(r @ r)
        for _ in range(MAX_HALVINGS):
            trial = x + dx
            if system.admissible(trial):
                rt = np.atleast_1d(system.residual(trial))
                if float(rt @ rt) <= obj:
                    break
            dx = 0.5 * dx
        else:
            report = SolverReport(False, it, history[-1], cond, history=tuple(history))
            raise NonConvergenceError("no descent step found", x, report)
        x = trial

    report = SolverReport(False, max_iter, history[-1], cond, history=tuple(history))
    raise NonConvergenceError(f"no convergence in {max_iter} iterations", x, report)
