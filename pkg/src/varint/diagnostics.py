"""Energy-error decomposition, step histories and oracle comparisons.

Two error notions are kept apart.  The *discrete energy error* measures how
well the scheme preserves its own energy ``E_k``: ``|E_k - E_1|`` for a
conservative system, or the residual of the implicit energy equation of each
step for a forced one.  The *discretization error* is the gap
``|E_cont(t_k) - E_k|`` to the continuous energy along the reference solution.

Trajectory comparisons use the midpoint reconstruction of each step,
``q = (q_k + q_{k+1}) / 2`` at ``t = (t_k + t_{k+1}) / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .discrete import _gradients_at, _force_at
from .errors import VIError
from .integrators import IntegratorConfig, TrajectoryLog, run
from .model import InitialCondition, SystemSpec, continuous_energy, reference_solution


@dataclass(frozen=True)
class EnergySeries:
    t: np.ndarray
    E: np.ndarray
    E_cont: np.ndarray
    discrete_energy_error: np.ndarray
    discretization_error: np.ndarray

    def __len__(self):
        return self.t.size


def _log_context(log: TrajectoryLog, sys: SystemSpec):
    if log.ic is None:
        raise ValueError("trajectory log carries no initial condition")
    # prefer the system as integrated, so unforced runs are compared to the undamped oracle
    return (log.system if log.system is not None else sys), log.ic


def _reference(sys, ic, log):
    return reference_solution(sys, ic, float(log.t[-1]))


def energy_residuals(log: TrajectoryLog, sys: Optional[SystemSpec] = None) -> np.ndarray:
    """``|D1 L_d + g_minus - E_k|`` for the step from node k to node k+1.

    Entry ``k + 1`` holds the residual of that step; the two bootstrap
    nodes get 0.  The step length is the logged ``h_used`` rather than the
    difference of the rounded node times, which at large ``t`` would add
    its own rounding to the residual.
    """
    sys = log.system if log.system is not None else sys
    out = np.zeros(len(log))
    recs = log.records
    for k in range(1, len(recs) - 1):
        a, b = recs[k].state, recs[k + 1].state
        h = recs[k + 1].h
        tm, qm, v = a.t + 0.5 * h, 0.5 * (a.q + b.q), (b.q - a.q) / h
        e = _gradients_at(sys, h, tm, qm, v).d1
        if sys.forced:
            e -= float(_force_at(sys, h, tm, qm, v) @ v)
        out[k + 1] = abs(e - a.E)
    return out


def energy_report(log: TrajectoryLog, sys: SystemSpec) -> EnergySeries:
    """Both energy-error series along a trajectory.

    A zero-length horizon (only the bootstrap pair) has zero discrete energy
    error by convention.
    """
    esys, ic = _log_context(log, sys)
    t, E, q = log.t, log.E, log.q
    ref = _reference(esys, ic, log)
    qr, vr = ref(t)
    qr = np.asarray(qr).reshape(t.size, -1)
    vr = np.asarray(vr).reshape(t.size, -1)
    E_cont = np.array([continuous_energy(esys, tk, qk, vk) for tk, qk, vk in zip(t, qr, vr)])

    if len(log) <= 2:
        dee = np.zeros(t.size)
    elif esys.forced:
        dee = energy_residuals(log, esys)
    else:
        dee = np.abs(E - E[1])
    return EnergySeries(t, E, E_cont, dee, np.abs(E_cont - E))


def step_history(log: TrajectoryLog) -> list:
    """``[(k, h_k), ...]`` for k >= 1, ``h_k = t_k - t_{k-1}``."""
    return [(rec.state.k, rec.h) for rec in log.records[1:]]


def midpoints(log: TrajectoryLog):
    """Midpoint times, positions and velocities of every step."""
    t, q = log.t, log.q
    h = np.diff(t)
    return 0.5 * (t[1:] + t[:-1]), 0.5 * (q[1:] + q[:-1]), np.diff(q, axis=0) / h[:, None]


def trajectory_error(log: TrajectoryLog, sys: SystemSpec) -> float:
    """Max over steps of ``|q_mid - q_ref(t_mid)|_inf``."""
    esys, ic = _log_context(log, sys)
    tm, qm, _ = midpoints(log)
    qr, _ = _reference(esys, ic, log)(tm)
    qr = np.asarray(qr).reshape(tm.size, -1)
    return float(np.max(np.abs(qm - qr))) if tm.size else 0.0


def fit_order(steps: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    h = np.asarray(steps, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.size != e.size or h.size < 2:
        raise ValueError("need matching step and error lists of length >= 2")
    if not (np.all(np.isfinite(e)) and np.all(e > 0)):
        raise ValueError("degenerate order fit: errors must be finite and positive")
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    if not math.isfinite(slope):
        raise ValueError("degenerate order fit")
    return float(slope)


def fixed_end_error(sys: SystemSpec, ic: InitialCondition, h: float, t_end: float) -> float:
    """Global error ``|q_N - q_ref(t_end)|_inf`` of the fixed-step scheme landing on t_end."""
    n = round((t_end - ic.t0) / h)
    if n < 1 or abs(ic.t0 + n * h - t_end) > 1e-9 * h:
        raise ValueError(f"t_end={t_end} is not a multiple of h={h} from t0")
    # the bootstrap already takes one step
    log = run(sys, ic, IntegratorConfig(mode="fixed", h0=h, max_steps=n - 1))
    qr, _ = reference_solution(log.system, ic, t_end)(t_end)
    return float(np.max(np.abs(log.q[-1] - np.atleast_1d(qr))))


def convergence_order(sys: SystemSpec, ic: InitialCondition, steps: Sequence[float],
                      t_end: float = 10.0,
                      error_fn: Optional[Callable[[float], float]] = None) -> float:
    """Empirical order from global errors at ``t_end`` over a halving sequence.

    ``error_fn(h)`` overrides the default fixed-step global error.
    """
    steps = [float(h) for h in steps]
    if len(steps) < 3:
        raise ValueError("need at least 3 step sizes")
    for a, b in zip(steps, steps[1:]):
        if not math.isclose(b, 0.5 * a, rel_tol=1e-12):
            raise ValueError("each step size must halve the previous one")
    if error_fn is None:
        error_fn = lambda h: fixed_end_error(sys, ic, h, t_end)  # noqa: E731
    return fit_order(steps, [error_fn(h) for h in steps])


@dataclass(frozen=True)
class ConditionPoint:
    h0: float
    max_condition: float
    max_discrete_energy_error: float
    failure: Optional[str] = None


def _max_condition(log: TrajectoryLog) -> float:
    c = [r.condition_estimate for r in log.reports[2:]]
    return float(np.max(c)) if c else float("nan")


def condition_study(sys: SystemSpec, ic: InitialCondition, h0_list: Sequence[float],
                    t_end: float = 50.0, **config) -> list:
    """Adaptive runs per ``h0``: max converged-Jacobian condition and energy error.

    Solver and guard failures become points with ``failure`` set and nan values.
    """
    out = []
    for h0 in h0_list:
        try:
            log = run(sys, ic, IntegratorConfig(mode="adaptive", h0=float(h0), t_end=t_end, **config))
        except VIError as exc:
            out.append(ConditionPoint(float(h0), float("nan"), float("nan"),
                                      f"{type(exc).__name__}: {exc}"))
            continue
        dee = energy_report(log, sys).discrete_energy_error
        out.append(ConditionPoint(float(h0), _max_condition(log), float(np.max(dee))))
    return out
