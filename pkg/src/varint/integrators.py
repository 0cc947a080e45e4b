"""Fixed and adaptive-step variational time steppers and the run driver.

Fixed step: given ``(t_k, q_k, p_k)`` and ``h``, solve
``-D2 L_d - f_minus = p_k`` for ``q_{k+1}``.

Adaptive step: given ``(t_k, q_k, p_k, E_k)``, solve the coupled system
``-D2 L_d - f_minus = p_k``, ``D1 L_d + g_minus = E_k`` for ``(q_{k+1}, t_{k+1})``
with ``t_{k+1} > t_k``.  For time-independent systems the unknowns are the
step and the discrete velocity ``(h_k, v_k)`` instead.

In both cases ``p_{k+1} = D4 L_d + f_plus`` and ``E_{k+1} = -D3 L_d - g_plus``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import discrete as dsc
from .errors import ConfigError, GuardError, MissingForceError, SolverError
from .model import (
    ORACLE_SETTINGS,
    InitialCondition,
    SystemSpec,
    reference_double_well,
    reference_oscillator,
)
from .solve import (
    NEWTON_MAX_ITER,
    NEWTON_TOL,
    SINGULAR_THRESHOLD,
    ResidualSystem,
    SolverReport,
    least_squares_solve,
    newton_solve,
)

MODES = ("fixed", "adaptive")
FALLBACKS = ("none", "fixed-substep")
SOLVER_MODES = ("root-find", "least-squares")
LSQ_GRAD_TOL = 1e-10


@dataclass(frozen=True)
class ExtendedState:
    k: int
    t: float
    q: np.ndarray
    p: np.ndarray
    E: float


@dataclass(frozen=True)
class IntegratorConfig:
    mode: str = "adaptive"
    h0: float = 0.01
    t_end: Optional[float] = None
    max_steps: Optional[int] = None
    forced: Optional[bool] = None
    newton_tol: float = NEWTON_TOL
    newton_max_iter: int = NEWTON_MAX_ITER
    h_min_factor: float = 1e-3
    h_max_factor: float = 100.0
    fallback: str = "none"
    solver_mode: str = "root-find"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.fallback not in FALLBACKS:
            raise ConfigError(f"fallback must be one of {FALLBACKS}, got {self.fallback!r}")
        if self.solver_mode not in SOLVER_MODES:
            raise ConfigError(f"solver_mode must be one of {SOLVER_MODES}, got {self.solver_mode!r}")
        if not (self.h0 > 0 and math.isfinite(self.h0)):
            raise ConfigError(f"h0 must be positive, got {self.h0!r}")
        if not self.h_min_factor < 1.0 < self.h_max_factor:
            raise ConfigError("require h_min_factor < 1 < h_max_factor")
        if self.t_end is None and self.max_steps is None:
            raise ConfigError("one of t_end or max_steps is required")
        if self.max_steps is not None and self.max_steps < 0:
            raise ConfigError("max_steps must be nonnegative")
        if not self.newton_tol > 0 or self.newton_max_iter < 1:
            raise ConfigError("invalid Newton settings")


@dataclass(frozen=True)
class StepRecord:
    state: ExtendedState
    report: SolverReport
    h: Optional[float]  # step that produced this node; None for the initial node


@dataclass
class TrajectoryLog:
    records: list
    metadata: dict = field(default_factory=dict)
    ic: Optional[InitialCondition] = None
    system: Optional[SystemSpec] = None  # as integrated (force removed for unforced runs)

    def __len__(self):
        return len(self.records)

    @property
    def t(self):
        return np.array([r.state.t for r in self.records])

    @property
    def q(self):
        return np.array([r.state.q for r in self.records])

    @property
    def p(self):
        return np.array([r.state.p for r in self.records])

    @property
    def E(self):
        return np.array([r.state.E for r in self.records])

    @property
    def h(self):
        return np.array([np.nan if r.h is None else r.h for r in self.records])

    @property
    def reports(self):
        return [r.report for r in self.records]


_EXACT = SolverReport(converged=True, iterations=0, residual_norm=0.0, condition_estimate=float("nan"))


def _reference_state(sys, ic, t):
    if sys.name == "damped_oscillator":
        return reference_oscillator(sys, ic, t)
    if sys.name == "double_well":
        return reference_double_well(sys, ic, t)
    from .errors import MissingOracleError

    raise MissingOracleError(f"no reference solution for system {sys.name!r}")


def bootstrap(sys: SystemSpec, ic: InitialCondition, h0: float):
    """Two initial nodes: ``(t0, q0)`` and the reference configuration at ``t0 + h0``.

    ``p1`` and ``E1`` come from the right-end maps of that pair; the left-end
    maps give ``p0`` and ``E0``, which are only logged.
    """
    if not h0 > 0:
        raise ConfigError("h0 must be positive")
    t1 = ic.t0 + h0
    q1, _ = _reference_state(sys, ic, t1)
    pair = dsc.DiscretePair(ic.t0, ic.q0, t1, np.atleast_1d(q1))
    p0, E0 = dsc.left_maps(sys, pair)
    p1 = dsc.discrete_momentum(sys, pair)
    E1 = dsc.discrete_energy(sys, pair)
    return (
        ExtendedState(0, ic.t0, ic.q0.copy(), p0, E0),
        ExtendedState(1, t1, pair.q1, p1, E1),
    )


# -- residual systems -------------------------------------------------------

def _residual_values(sys, h, tm, qm, v, p, E):
    g = dsc._gradients_at(sys, h, tm, qm, v)
    r_q, r_E = -g.d2 - p, g.d1 - E
    if sys.forced:
        f = dsc._force_at(sys, h, tm, qm, v)
        r_q = r_q - f
        r_E -= float(f @ v)
    return r_q, r_E


def _analytic(sys):
    return sys.hessian is not None and (not sys.forced or sys.force_jacobian is not None)


def fixed_step_system(sys: SystemSpec, state: ExtendedState, h: float) -> ResidualSystem:
    """Residual ``q1 -> -D2 - f_minus - p_k`` for a step of length ``h``."""
    d = sys.dim
    tk, qk, pk = state.t, state.q, state.p
    tm = tk + 0.5 * h

    def residual(q1):
        return _residual_values(sys, h, tm, 0.5 * (qk + q1), (q1 - qk) / h, pk, 0.0)[0]

    def jacobian(q1):
        ip = dsc.implicit_partials(sys, h, tm, 0.5 * (qk + q1), (q1 - qk) / h, pk, 0.0)
        return 0.5 * ip.rq_xi[:, 1:1 + d] + ip.rq_xi[:, 1 + d:] / h

    return ResidualSystem(d, residual, jacobian if _analytic(sys) else None)


def adaptive_step_system(sys: SystemSpec, state: ExtendedState):
    """Coupled momentum/energy residuals for one adaptive step.

    Unknowns are ``(h, v)`` for time-independent systems and ``(t1, q1)``
    otherwise; the constraint is ``h > 0`` (resp. ``t1 > t_k``).  Returns the
    residual system and a map from unknowns to ``(h, t_mid, q_mid, v)``.
    """
    d = sys.dim
    tk, qk, pk, Ek = state.t, state.q, state.p, state.E
    analytic = _analytic(sys)

    if not sys.time_dependent:
        def unpack(x):
            h, v = x[0], x[1:]
            return h, tk + 0.5 * h, qk + 0.5 * h * v, v

        def jacobian(x):
            h, tm, qm, v = unpack(x)
            ip = dsc.implicit_partials(sys, h, tm, qm, v, pk, Ek)
            J = np.empty((d + 1, d + 1))
            J[:d, 0] = ip.rq_h + 0.5 * ip.rq_xi[:, 0] + ip.rq_xi[:, 1:1 + d] @ (0.5 * v)
            J[d, 0] = ip.rE_h + 0.5 * ip.rE_xi[0] + ip.rE_xi[1:1 + d] @ (0.5 * v)
            J[:d, 1:] = 0.5 * h * ip.rq_xi[:, 1:1 + d] + ip.rq_xi[:, 1 + d:]
            J[d, 1:] = 0.5 * h * ip.rE_xi[1:1 + d] + ip.rE_xi[1 + d:]
            return J

        def constraint(x):
            return x[0] > 0.0
    else:
        def unpack(x):
            t1, q1 = x[0], x[1:]
            h = t1 - tk
            return h, 0.5 * (tk + t1), 0.5 * (qk + q1), (q1 - qk) / h

        def jacobian(x):
            h, tm, qm, v = unpack(x)
            ip = dsc.implicit_partials(sys, h, tm, qm, v, pk, Ek)
            J = np.empty((d + 1, d + 1))
            J[:d, 0] = ip.rq_h + 0.5 * ip.rq_xi[:, 0] - ip.rq_xi[:, 1 + d:] @ (v / h)
            J[d, 0] = ip.rE_h + 0.5 * ip.rE_xi[0] - ip.rE_xi[1 + d:] @ (v / h)
            J[:d, 1:] = 0.5 * ip.rq_xi[:, 1:1 + d] + ip.rq_xi[:, 1 + d:] / h
            J[d, 1:] = 0.5 * ip.rE_xi[1:1 + d] + ip.rE_xi[1 + d:] / h
            return J

        def constraint(x):
            return x[0] > tk

    def residual(x):
        r_q, r_E = _residual_values(sys, *unpack(x), pk, Ek)
        return np.append(r_q, r_E)

    return ResidualSystem(d + 1, residual, jacobian if analytic else None, constraint), unpack


def adaptive_guess(sys: SystemSpec, state: ExtendedState, h: float, v: np.ndarray) -> np.ndarray:
    """Solver starting point from the previous step ``h`` and velocity ``v``."""
    if sys.time_dependent:
        return np.concatenate(([state.t + h], state.q + h * v))
    return np.concatenate(([h], v))


def _correct_momentum(system: ResidualSystem, x: np.ndarray, d: int) -> np.ndarray:
    # One Newton step on the momentum rows with the time unknown frozen.
    # Near turning points the previous velocity is a poor start for the
    # coupled solve, while this sub-system is well conditioned.
    r = system.residual(x)[:d]
    J = system.jac(x)[:d, 1:]
    try:
        trial = x.copy()
        trial[1:] -= np.linalg.solve(J, r)
    except np.linalg.LinAlgError:
        return x
    return trial if system.admissible(trial) else x


# -- steppers ----------------------------------------------------------------

def step_fixed(sys: SystemSpec, state: ExtendedState, h: float, *, guess=None,
               t_next: Optional[float] = None, tol: float = NEWTON_TOL,
               max_iter: int = NEWTON_MAX_ITER, polish: bool = True):
    """One fixed step of length ``h``; ``E`` of the result is diagnostic only."""
    if not h > 0:
        raise ConfigError("h must be positive")
    system = fixed_step_system(sys, state, h)
    q1, report = newton_solve(system, state.q if guess is None else guess, tol, max_iter,
                              singular_threshold=math.inf, polish=polish)
    t1 = state.t + h if t_next is None else t_next
    p1, E1 = dsc.right_maps_at(sys, h, state.t + 0.5 * h, 0.5 * (state.q + q1), (q1 - state.q) / h)
    return ExtendedState(state.k + 1, t1, q1, p1, E1), report


def _adaptive(sys, state, config, guess, solver):
    system, unpack = adaptive_step_system(sys, state)
    if guess is None:
        guess = adaptive_guess(sys, state, config.h0, np.zeros(sys.dim))
    guess = _correct_momentum(system, np.asarray(guess, dtype=float), sys.dim)
    try:
        if solver == "least-squares":
            x, report = least_squares_solve(system, guess, LSQ_GRAD_TOL, config.newton_max_iter,
                                            SINGULAR_THRESHOLD)
        else:
            x, report = newton_solve(system, guess, config.newton_tol, config.newton_max_iter,
                                     SINGULAR_THRESHOLD)
    except SolverError:
        if config.fallback != "fixed-substep":
            raise
        nxt, report = step_fixed(sys, state, config.h0, tol=config.newton_tol,
                                 max_iter=config.newton_max_iter)
        return nxt, dataclasses.replace(report, fallback_used=True), config.h0
    h, tm, qm, v = unpack(x)
    p1, E1 = dsc.right_maps_at(sys, h, tm, qm, v)
    if sys.time_dependent:
        t1, q1 = float(x[0]), x[1:].copy()
    else:
        t1, q1 = state.t + h, state.q + h * v
    return ExtendedState(state.k + 1, t1, q1, p1, E1), report, float(h)


def step_adaptive(sys: SystemSpec, state: ExtendedState, config: IntegratorConfig, guess=None):
    """One energy-preserving step; ``guess`` is in the solver's unknowns."""
    return _adaptive(sys, state, config, guess, "root-find")[:2]


def step_least_squares(sys: SystemSpec, state: ExtendedState, config: IntegratorConfig, guess=None):
    """Like :func:`step_adaptive` but minimising the squared residuals instead."""
    return _adaptive(sys, state, config, guess, "least-squares")[:2]


# -- driver ------------------------------------------------------------------

def effective_system(sys: SystemSpec, config: IntegratorConfig) -> SystemSpec:
    """The system a run actually integrates: unforced runs drop the force."""
    forced = sys.forced if config.forced is None else config.forced
    if forced and not sys.forced:
        raise MissingForceError(f"forced run requested but {sys.name!r} has no force")
    if not forced and sys.forced:
        params = dict(sys.parameters)
        if "c" in params:
            params["c"] = 0.0
        sys = dataclasses.replace(sys, force=None, force_jacobian=None, parameters=params)
    return sys


def run_metadata(sys: SystemSpec, ic: InitialCondition, config: IntegratorConfig) -> dict:
    return {
        "system": {"name": sys.name, "dim": sys.dim, "parameters": dict(sys.parameters),
                   "forced": sys.forced},
        "ic": {"q0": ic.q0.tolist(), "v0": ic.v0.tolist(), "t0": ic.t0},
        "integrator": dataclasses.asdict(config),
        "oracle": ORACLE_SETTINGS.get(sys.name),
        "solver": {
            "residual_norm": "inf",
            "condition_norm": "2 (singular values, converged Jacobian)",
            "singular_threshold": SINGULAR_THRESHOLD,
            "unknowns": "(t1, q1)" if sys.time_dependent else "(h, v)",
        },
    }


def _done(config, state, steps, h):
    if config.max_steps is not None and steps >= config.max_steps:
        return True
    if config.t_end is not None:
        slack = 1e-9 * h if config.mode == "fixed" else 0.0
        return state.t >= config.t_end - slack
    return False


def run(sys: SystemSpec, ic: InitialCondition, config: IntegratorConfig) -> TrajectoryLog:
    """Bootstrap from the reference solution, then step until the horizon.

    A horizon at ``t0`` yields just the two bootstrap nodes.  In adaptive
    mode an accepted step outside ``[h0 * h_min_factor, h0 * h_max_factor]``
    aborts the run with :class:`GuardError` carrying the partial log.
    """
    sys = effective_system(sys, config)
    h0 = config.h0
    log = TrajectoryLog([], run_metadata(sys, ic, config), ic, sys)
    s0, s1 = bootstrap(sys, ic, h0)
    log.records.append(StepRecord(s0, _EXACT, None))
    log.records.append(StepRecord(s1, _EXACT, h0))
    if config.t_end is not None and config.t_end <= ic.t0:
        return log

    lo, hi = h0 * config.h_min_factor, h0 * config.h_max_factor
    prev, state = s0, s1
    h_prev, v_prev = h0, (s1.q - s0.q) / h0
    steps = 0
    while not _done(config, state, steps, h_prev):
        if config.mode == "fixed":
            guess = 2.0 * state.q - prev.q
            nxt, report = step_fixed(sys, state, h0, guess=guess, t_next=ic.t0 + (state.k + 1) * h0,
                                     tol=config.newton_tol, max_iter=config.newton_max_iter)
            h = h0
        else:
            guess = adaptive_guess(sys, state, h_prev, v_prev)
            nxt, report, h = _adaptive(sys, state, config, guess, config.solver_mode)
            if not lo <= h <= hi:
                raise GuardError(f"adaptive step {h:.6g} left [{lo:.6g}, {hi:.6g}] at t={state.t:.6g}",
                                 log, h)
        log.records.append(StepRecord(nxt, report, h))
        h_prev, v_prev = h, (nxt.q - state.q) / h
        prev, state = state, nxt
        steps += 1
    return log
