"""Lagrangian system definitions, benchmark systems and reference solutions.

A system is described by its Lagrangian ``L(t, q, v)`` together with exact
first partials and (optionally) the full second-derivative matrix, plus an
optional external force ``f(t, q, v)``.  Configurations and velocities are
1-D numpy arrays of length ``dim``.

Second derivatives are stored with the variable ordering ``(t, q_1..q_d,
v_1..v_d)``, so ``hessian`` returns a ``(1 + 2d, 1 + 2d)`` matrix and
``force_jacobian`` a ``(d, 1 + 2d)`` matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InvalidParameterError, MissingOracleError, UnsupportedRegimeError

ScalarFn = Callable[[float, np.ndarray, np.ndarray], float]
VectorFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]

# Settings of the non-geometric benchmark used for the double well.
ORACLE_SETTINGS = {
    "double_well": {"method": "DOP853", "rtol": 1e-12, "atol": 1e-12},
    "damped_oscillator": {"method": "closed-form underdamped solution"},
}


@dataclass(frozen=True)
class SystemSpec:
    name: str
    dim: int
    lagrangian: ScalarFn
    dL_dt: ScalarFn
    dL_dq: VectorFn
    dL_dv: VectorFn
    force: Optional[VectorFn] = None
    hessian: Optional[Callable[[float, np.ndarray, np.ndarray], np.ndarray]] = None
    force_jacobian: Optional[Callable[[float, np.ndarray, np.ndarray], np.ndarray]] = None
    time_dependent: bool = False
    parameters: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidParameterError(f"dim must be positive, got {self.dim}")
        object.__setattr__(self, "parameters", MappingProxyType(dict(self.parameters)))

    @property
    def forced(self) -> bool:
        return self.force is not None


@dataclass(frozen=True)
class InitialCondition:
    q0: np.ndarray
    v0: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        q0 = np.atleast_1d(np.asarray(self.q0, dtype=float))
        v0 = np.atleast_1d(np.asarray(self.v0, dtype=float))
        if q0.shape != v0.shape:
            raise InvalidParameterError("q0 and v0 must have the same shape")
        if not (np.all(np.isfinite(q0)) and np.all(np.isfinite(v0)) and math.isfinite(self.t0)):
            raise InvalidParameterError("initial condition must be finite")
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "v0", v0)
        object.__setattr__(self, "t0", float(self.t0))


def _require_positive(**kwargs):
    for name, value in kwargs.items():
        if not (value > 0 and math.isfinite(value)):
            raise InvalidParameterError(f"{name} must be positive and finite, got {value!r}")


def make_double_well(m: float = 1.0) -> SystemSpec:
    """Particle in the potential ``V(q) = (q^4 - q^2) / 2``."""
    _require_positive(m=m)

    def lagrangian(t, q, v):
        return 0.5 * m * float(v @ v) - 0.5 * float(np.sum(q**4 - q**2))

    def dL_dt(t, q, v):
        return 0.0

    def dL_dq(t, q, v):
        return -(2.0 * q**3 - q)

    def dL_dv(t, q, v):
        return m * v

    def hessian(t, q, v):
        H = np.zeros((3, 3))
        H[1, 1] = -(6.0 * q[0] ** 2 - 1.0)
        H[2, 2] = m
        return H

    return SystemSpec(
        name="double_well",
        dim=1,
        lagrangian=lagrangian,
        dL_dt=dL_dt,
        dL_dq=dL_dq,
        dL_dv=dL_dv,
        hessian=hessian,
        parameters={"m": float(m)},
    )


def make_damped_oscillator(m: float = 1.0, k: float = 4.0, c: float = 0.0) -> SystemSpec:
    """Mass-spring system with viscous force ``f = -c v``.  Negative ``c`` pumps energy in."""
    _require_positive(m=m, k=k)
    if not math.isfinite(c):
        raise InvalidParameterError(f"c must be finite, got {c!r}")

    def lagrangian(t, q, v):
        return 0.5 * m * float(v @ v) - 0.5 * k * float(q @ q)

    def dL_dt(t, q, v):
        return 0.0

    def dL_dq(t, q, v):
        return -k * q

    def dL_dv(t, q, v):
        return m * v

    def hessian(t, q, v):
        H = np.zeros((3, 3))
        H[1, 1] = -k
        H[2, 2] = m
        return H

    def force(t, q, v):
        return -c * v

    def force_jacobian(t, q, v):
        return np.array([[0.0, 0.0, -c]])

    return SystemSpec(
        name="damped_oscillator",
        dim=1,
        lagrangian=lagrangian,
        dL_dt=dL_dt,
        dL_dq=dL_dq,
        dL_dv=dL_dv,
        force=force,
        hessian=hessian,
        force_jacobian=force_jacobian,
        parameters={"m": float(m), "k": float(k), "c": float(c)},
    )


def continuous_energy(sys: SystemSpec, t: float, q, v) -> float:
    """Return ``dL/dv . v - L``."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return float(sys.dL_dv(t, q, v) @ v) - sys.lagrangian(t, q, v)


def damping_ratio(sys: SystemSpec) -> float:
    p = sys.parameters
    return p["c"] / (2.0 * math.sqrt(p["k"] * p["m"]))


def _scalar_or_array(q, v, t):
    if np.ndim(t) == 0:
        return float(q), float(v)
    return np.asarray(q, dtype=float), np.asarray(v, dtype=float)


def reference_oscillator(sys: SystemSpec, ic: InitialCondition, t):
    """Closed-form underdamped solution ``(q(t), v(t))``; ``t`` may be an array."""
    if sys.name != "damped_oscillator":
        raise MissingOracleError(f"no closed form for system {sys.name!r}")
    zeta = damping_ratio(sys)
    if abs(zeta) >= 1.0:
        raise UnsupportedRegimeError(f"damping ratio {zeta} is not underdamped")
    wn = math.sqrt(sys.parameters["k"] / sys.parameters["m"])
    wd = wn * math.sqrt(1.0 - zeta**2)
    sigma = zeta * wn
    A = float(ic.q0[0])
    B = (float(ic.v0[0]) + sigma * A) / wd
    tau = np.asarray(t, dtype=float) - ic.t0
    decay = np.exp(-sigma * tau)
    cos, sin = np.cos(wd * tau), np.sin(wd * tau)
    q = decay * (A * cos + B * sin)
    v = decay * ((wd * B - sigma * A) * cos - (sigma * B + wd * A) * sin)
    return _scalar_or_array(q, v, t)


def _double_well_rhs(m):
    def rhs(t, y):
        q, v = y
        return [v, -(2.0 * q**3 - q) / m]

    return rhs


def _integrate_double_well(sys, ic, t_end, t_eval=None, dense=False):
    settings = ORACLE_SETTINGS["double_well"]
    y0 = [float(ic.q0[0]), float(ic.v0[0])]
    return solve_ivp(
        _double_well_rhs(sys.parameters["m"]),
        (ic.t0, t_end),
        y0,
        method=settings["method"],
        rtol=settings["rtol"],
        atol=settings["atol"],
        t_eval=t_eval,
        dense_output=dense,
    )


def reference_double_well(sys: SystemSpec, ic: InitialCondition, t):
    """High-accuracy benchmark state of the double well at time(s) ``t >= t0``.

    This is a classical high-order Runge-Kutta solution (DOP853, tolerance
    1e-12), deliberately not structure preserving, so it can serve as an
    independent oracle for the variational schemes.
    """
    if sys.name != "double_well":
        raise MissingOracleError(f"no double-well benchmark for system {sys.name!r}")
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < ic.t0):
        raise ValueError("benchmark is only defined for t >= t0")
    t_end = float(ts.max())
    if t_end == ic.t0:
        q = np.full(ts.shape, float(ic.q0[0]))
        v = np.full(ts.shape, float(ic.v0[0]))
    elif ts.size == 1:
        sol = _integrate_double_well(sys, ic, t_end)
        q, v = sol.y[0, -1:], sol.y[1, -1:]
    else:
        order = np.argsort(ts)
        sol = _integrate_double_well(sys, ic, t_end, dense=True)
        y = sol.sol(ts[order])
        q, v = np.empty_like(ts), np.empty_like(ts)
        q[order], v[order] = y[0], y[1]
    if np.ndim(t) == 0:
        return float(q[0]), float(v[0])
    return q, v


def reference_solution(sys: SystemSpec, ic: InitialCondition, t_end: float):
    """Return a vectorised callable ``t -> (q, v)`` valid on ``[t0, t_end]``."""
    if sys.name == "damped_oscillator":
        return lambda t: reference_oscillator(sys, ic, t)
    if sys.name == "double_well":
        if t_end <= ic.t0:
            return lambda t: reference_double_well(sys, ic, t)
        sol = _integrate_double_well(sys, ic, t_end, dense=True)

        def evaluate(t):
            y = sol.sol(np.asarray(t, dtype=float))
            return _scalar_or_array(y[0], y[1], t)

        return evaluate
    raise MissingOracleError(f"no reference solution for system {sys.name!r}")
