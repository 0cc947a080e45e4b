"""Shared builders for tests."""
import math

import numpy as np

from varint import SystemSpec


def time_dependent_oscillator(m=1.0, k0=4.0, eps=0.3, c=0.05):
    """``L = m v^2 / 2 - k(t) q^2 / 2`` with ``k(t) = k0 (1 + eps sin t)``, force ``-c v``."""

    def k(t):
        return k0 * (1.0 + eps * math.sin(t))

    def dk(t):
        return k0 * eps * math.cos(t)

    def lagrangian(t, q, v):
        return 0.5 * m * float(v @ v) - 0.5 * k(t) * float(q @ q)

    def hessian(t, q, v):
        H = np.zeros((3, 3))
        H[0, 0] = 0.5 * k0 * eps * math.sin(t) * float(q @ q)
        H[0, 1] = H[1, 0] = -dk(t) * q[0]
        H[1, 1] = -k(t)
        H[2, 2] = m
        return H

    return SystemSpec(
        name="driven_spring",
        dim=1,
        lagrangian=lagrangian,
        dL_dt=lambda t, q, v: -0.5 * dk(t) * float(q @ q),
        dL_dq=lambda t, q, v: -k(t) * q,
        dL_dv=lambda t, q, v: m * v,
        force=lambda t, q, v: -c * v,
        hessian=hessian,
        force_jacobian=lambda t, q, v: np.array([[0.0, 0.0, -c]]),
        time_dependent=True,
        parameters={"m": m, "k0": k0, "eps": eps, "c": c},
    )


def explicit_cond_2x2(J):
    """2-norm condition from the explicit inverse and the closed-form 2x2 spectral norm."""
    a, b, c, d = J[0, 0], J[0, 1], J[1, 0], J[1, 1]
    det = a * d - b * c
    inv = np.array([[d, -b], [-c, a]]) / det

    def norm2(M):
        # largest singular value: sqrt of the largest eigenvalue of M^T M
        fro2 = float(np.sum(M * M))
        dt = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        return math.sqrt(0.5 * (fro2 + math.sqrt(max(fro2 * fro2 - 4 * dt * dt, 0.0))))

    return norm2(J) * norm2(inv)
