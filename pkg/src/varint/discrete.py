"""Midpoint discrete Lagrangian and the discrete maps built on it.

For a pair ``(t0, q0, t1, q1)`` with ``h = t1 - t0`` the discrete Lagrangian is

    L_d = h * L(t_mid, q_mid, v),   t_mid = (t0 + t1)/2,  q_mid = (q0 + q1)/2,
                                    v = (q1 - q0)/h.

Everything here is obtained from that single formula by the chain rule,
together with the symmetric midpoint split of the force and power terms

    f_minus = f_plus = (h/2) f(t_mid, q_mid, v)
    g_minus = g_plus = -(h/2) f(t_mid, q_mid, v) . v
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidPairError, MissingForceError
from .model import SystemSpec


@dataclass(frozen=True)
class DiscretePair:
    t0: float
    q0: np.ndarray
    t1: float
    q1: np.ndarray

    def __post_init__(self):
        q0 = np.atleast_1d(np.asarray(self.q0, dtype=float))
        q1 = np.atleast_1d(np.asarray(self.q1, dtype=float))
        t0, t1 = float(self.t0), float(self.t1)
        if q0.shape != q1.shape:
            raise InvalidPairError("q0 and q1 differ in shape")
        if not (math.isfinite(t0) and math.isfinite(t1)):
            raise InvalidPairError("pair times must be finite")
        if not (np.all(np.isfinite(q0)) and np.all(np.isfinite(q1))):
            raise InvalidPairError("pair configurations must be finite")
        if not t1 > t0:
            raise InvalidPairError(f"require t1 > t0, got t0={t0!r}, t1={t1!r}")
        object.__setattr__(self, "t0", t0)
        object.__setattr__(self, "t1", t1)
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "q1", q1)

    @property
    def h(self) -> float:
        return self.t1 - self.t0

    @property
    def v(self) -> np.ndarray:
        return (self.q1 - self.q0) / self.h

    def midpoint(self):
        """Return ``(h, t_mid, q_mid, v)``."""
        h = self.t1 - self.t0
        return h, 0.5 * (self.t0 + self.t1), 0.5 * (self.q0 + self.q1), (self.q1 - self.q0) / h


class DiscreteGradients(NamedTuple):
    d1: float
    d2: np.ndarray
    d3: float
    d4: np.ndarray


def discrete_lagrangian(sys: SystemSpec, pair: DiscretePair) -> float:
    h, tm, qm, v = pair.midpoint()
    return h * sys.lagrangian(tm, qm, v)


def _gradients_at(sys, h, tm, qm, v):
    L = sys.lagrangian(tm, qm, v)
    Lt = sys.dL_dt(tm, qm, v)
    Lq = np.asarray(sys.dL_dq(tm, qm, v), dtype=float)
    Lv = np.asarray(sys.dL_dv(tm, qm, v), dtype=float)
    Lv_v = float(Lv @ v)
    return DiscreteGradients(
        d1=-L + 0.5 * h * Lt + Lv_v,
        d2=0.5 * h * Lq - Lv,
        d3=L + 0.5 * h * Lt - Lv_v,
        d4=0.5 * h * Lq + Lv,
    )


def discrete_gradients(sys: SystemSpec, pair: DiscretePair) -> DiscreteGradients:
    """Partials of ``discrete_lagrangian`` with respect to ``(t0, q0, t1, q1)``."""
    return _gradients_at(sys, *pair.midpoint())


def _force_at(sys, h, tm, qm, v):
    if sys.force is None:
        raise MissingForceError(f"system {sys.name!r} has no force")
    return 0.5 * h * np.asarray(sys.force(tm, qm, v), dtype=float)


def discrete_forces(sys: SystemSpec, pair: DiscretePair):
    """Return ``(f_minus, f_plus)``; both equal ``(h/2) f`` at the midpoint."""
    f = _force_at(sys, *pair.midpoint())
    return f, f.copy()


def discrete_powers(sys: SystemSpec, pair: DiscretePair):
    """Return ``(g_minus, g_plus)``; both equal ``-(h/2) f . v`` at the midpoint."""
    h, tm, qm, v = pair.midpoint()
    g = -float(_force_at(sys, h, tm, qm, v) @ v)
    return g, g


def right_maps_at(sys: SystemSpec, h, tm, qm, v):
    """``(D4 L_d + f_plus, -D3 L_d - g_plus)`` from the midpoint arguments."""
    g = _gradients_at(sys, h, tm, qm, v)
    p, E = g.d4, -g.d3
    if sys.forced:
        f = _force_at(sys, h, tm, qm, v)
        p = p + f
        E += float(f @ v)
    return p, E


def discrete_momentum(sys: SystemSpec, pair: DiscretePair) -> np.ndarray:
    """Momentum at the right end of the pair: ``D4 L_d + f_plus``."""
    return right_maps_at(sys, *pair.midpoint())[0]


def discrete_energy(sys: SystemSpec, pair: DiscretePair) -> float:
    """Energy at the right end of the pair: ``-D3 L_d - g_plus``."""
    return right_maps_at(sys, *pair.midpoint())[1]


def left_maps(sys: SystemSpec, pair: DiscretePair):
    """Momentum and energy implied at the left end: ``(-D2 - f_minus, D1 + g_minus)``."""
    h, tm, qm, v = pair.midpoint()
    g = _gradients_at(sys, h, tm, qm, v)
    p, E = -g.d2, g.d1
    if sys.forced:
        f = _force_at(sys, h, tm, qm, v)
        p = p - f
        E -= float(f @ v)
    return p, E


class ImplicitPartials(NamedTuple):
    """Residuals of the implicit step equations and their partials.

    ``r_q = -D2 - f_minus - p`` and ``r_E = D1 + g_minus - E`` written as
    functions of ``h`` and the midpoint arguments ``xi = (t_mid, q_mid, v)``.
    ``*_h`` are partials in ``h`` at fixed ``xi``; ``*_xi`` are the
    ``(., 1 + 2d)`` partials in ``xi`` at fixed ``h``.
    """

    r_q: np.ndarray
    r_E: float
    rq_h: np.ndarray
    rq_xi: np.ndarray
    rE_h: float
    rE_xi: np.ndarray


def implicit_partials(sys: SystemSpec, h, tm, qm, v, p, E) -> ImplicitPartials:
    if sys.hessian is None or (sys.forced and sys.force_jacobian is None):
        raise NotImplementedError("analytic partials need sys.hessian and sys.force_jacobian")
    d = sys.dim
    L = sys.lagrangian(tm, qm, v)
    Lt = sys.dL_dt(tm, qm, v)
    Lq = np.asarray(sys.dL_dq(tm, qm, v), dtype=float)
    Lv = np.asarray(sys.dL_dv(tm, qm, v), dtype=float)
    H = np.asarray(sys.hessian(tm, qm, v), dtype=float)
    Hq, Hv, Ht = H[1:1 + d, :], H[1 + d:, :], H[0, :]

    r_q = -0.5 * h * Lq + Lv - p
    r_E = -L + 0.5 * h * Lt + float(Lv @ v) - E
    rq_h = -0.5 * Lq
    rE_h = 0.5 * Lt
    rq_xi = -0.5 * h * Hq + Hv
    grad = np.concatenate(([Lt], Lq, Lv))
    rE_xi = -grad + 0.5 * h * Ht + v @ Hv
    rE_xi[1 + d:] += Lv

    if sys.forced:
        f = np.asarray(sys.force(tm, qm, v), dtype=float)
        Jf = np.asarray(sys.force_jacobian(tm, qm, v), dtype=float)
        r_q = r_q - 0.5 * h * f
        r_E -= 0.5 * h * float(f @ v)
        rq_h = rq_h - 0.5 * f
        rE_h -= 0.5 * float(f @ v)
        rq_xi = rq_xi - 0.5 * h * Jf
        rE_xi = rE_xi - 0.5 * h * (v @ Jf)
        rE_xi[1 + d:] -= 0.5 * h * f
    return ImplicitPartials(r_q, r_E, rq_h, rq_xi, rE_h, rE_xi)
