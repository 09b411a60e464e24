"""Gradient shrinking soliton equations on ``R x S^p1 x S^p2``.

A metric ``dy^2 + phi_1(y)^2 g_1 + phi_2(y)^2 g_2`` with potential field
``f(y) d/dy`` is a shrinking soliton with constant ``lambda < 0`` iff

    f_y            = p1 phi1''/phi1 + p2 phi2''/phi2 - lambda
    phi_i''/phi_i  = (p_i - 1)(1 - phi_i'^2)/phi_i^2 - p_j phi_1' phi_2'/(phi_1 phi_2) + f phi_i'/phi_i + lambda
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError


@dataclass
class SolitonParams:
    p1: int
    p2: int
    lam: float
    y: np.ndarray
    f: np.ndarray
    f_y: np.ndarray
    phi1: np.ndarray
    phi1_y: np.ndarray
    phi1_yy: np.ndarray
    phi2: np.ndarray
    phi2_y: np.ndarray
    phi2_yy: np.ndarray
    stopped_early: bool = False

    def __post_init__(self):
        if self.lam >= 0:
            raise ParameterError("lambda must be negative")
        if self.p1 < 2 or self.p2 < 2:
            raise ParameterError("sphere dimensions must be at least 2")


def constant_solution(p1, p2, lam, y):
    y = np.asarray(y, dtype=float)
    if lam >= 0:
        raise ParameterError("lambda must be negative")
    c1, c2 = np.sqrt((p1 - 1) / -lam), np.sqrt((p2 - 1) / -lam)
    z = np.zeros_like(y)
    return SolitonParams(p1, p2, lam, y, -lam * y, -lam + z, c1 + z, z, z.copy(), c2 + z, z.copy(), z.copy())


def _second_derivs(p1, p2, lam, f, a, a1, b, b1):
    if np.any(np.asarray(a) <= 0) or np.any(np.asarray(b) <= 0):
        raise DomainError("warping profiles must be positive")
    cross = a1 * b1 / (a * b)
    a2 = a * ((p1 - 1) * (1 - a1 * a1) / (a * a) - p2 * cross + f * a1 / a + lam)
    b2 = b * ((p2 - 1) * (1 - b1 * b1) / (b * b) - p1 * cross + f * b1 / b + lam)
    return a2, b2


def residual_fields(params: SolitonParams):
    """``LHS - RHS`` of the three equations at every grid point."""
    P = params
    if np.any(P.phi1 <= 0) or np.any(P.phi2 <= 0):
        raise DomainError("warping profiles must be positive")
    a, a1, a2 = P.phi1, P.phi1_y, P.phi1_yy
    b, b1, b2 = P.phi2, P.phi2_y, P.phi2_yy
    r_f = P.f_y - (P.p1 * a2 / a + P.p2 * b2 / b - P.lam)
    cross = a1 * b1 / (a * b)
    r_1 = a2 / a - ((P.p1 - 1) * (1 - a1 * a1) / (a * a) - P.p2 * cross + a1 / a * P.f + P.lam)
    r_2 = b2 / b - ((P.p2 - 1) * (1 - b1 * b1) / (b * b) - P.p1 * cross + b1 / b * P.f + P.lam)
    return r_f, r_1, r_2


def ode_residual(params: SolitonParams, index):
    r = residual_fields(params)
    return tuple(float(c[index]) for c in r)


def _field(p1, p2, lam):
    def F(z):
        f, a, a1, b, b1 = z
        a2, b2 = _second_derivs(p1, p2, lam, f, a, a1, b, b1)
        fy = p1 * a2 / a + p2 * b2 / b - lam
        return np.array([fy, a1, a2, b1, b2])
    return F


def integrate_ivp(p1, p2, lam, y0, state0, span, dy=1e-3, blowup=1e6):
    """Fixed-step classical RK4 march of ``(f, phi1, phi1', phi2, phi2')`` from ``y0``.

    Stops early (``stopped_early``) if a profile reaches zero or a slope exceeds ``blowup``.
    """
    if lam >= 0:
        raise ParameterError("lambda must be negative")
    if state0[1] <= 0 or state0[3] <= 0:
        raise DomainError("initial warping values must be positive")
    F = _field(p1, p2, lam)
    n = int(round(span / dy))
    ys = y0 + dy * np.arange(n + 1)
    Z = np.empty((n + 1, 5))
    Z[0] = state0
    stop = n
    for i in range(n):
        z = Z[i]
        try:
            k1 = F(z)
            k2 = F(z + 0.5 * dy * k1)
            k3 = F(z + 0.5 * dy * k2)
            k4 = F(z + dy * k3)
        except DomainError:
            stop = i
            break
        Z[i + 1] = z + dy / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if Z[i + 1, 1] <= 0 or Z[i + 1, 3] <= 0 or not np.all(np.isfinite(Z[i + 1])) \
                or max(abs(Z[i + 1, 2]), abs(Z[i + 1, 4])) > blowup:
            stop = i
            break
    Z, ys = Z[:stop + 1], ys[:stop + 1]
    a2, b2 = _second_derivs(p1, p2, lam, Z[:, 0], Z[:, 1], Z[:, 2], Z[:, 3], Z[:, 4])
    fy = p1 * a2 / Z[:, 1] + p2 * b2 / Z[:, 3] - lam
    return SolitonParams(p1, p2, lam, ys, Z[:, 0], fy, Z[:, 1], Z[:, 2], a2, Z[:, 3], Z[:, 4], b2,
                         stopped_early=stop < n)


def differenced(params: SolitonParams):
    """Same profiles with derivatives replaced by central differences of the values.

    Requires a uniform ``y`` grid; the end points get NaN.
    """
    P = params
    dy = np.diff(P.y)
    if dy.size < 2 or not np.allclose(dy, dy[0], rtol=1e-9, atol=0):
        raise DomainError("differencing needs a uniform grid of at least three points")
    h = dy[0]

    def d1(g):
        out = np.full_like(g, np.nan)
        out[1:-1] = (g[2:] - g[:-2]) / (2 * h)
        return out

    def d2(g):
        out = np.full_like(g, np.nan)
        out[1:-1] = (g[2:] - 2 * g[1:-1] + g[:-2]) / (h * h)
        return out

    return SolitonParams(P.p1, P.p2, P.lam, P.y, P.f, d1(P.f), P.phi1, d1(P.phi1), d2(P.phi1),
                         P.phi2, d1(P.phi2), d2(P.phi2))


def max_residual(params: SolitonParams) -> float:
    return float(np.nanmax(np.abs(np.concatenate(residual_fields(params)))))


def departure(params: SolitonParams):
    """Largest deviation of the warping profiles from their constant-solution values."""
    c1, c2 = np.sqrt((params.p1 - 1) / -params.lam), np.sqrt((params.p2 - 1) / -params.lam)
    return float(max(np.max(np.abs(params.phi1 - c1)), np.max(np.abs(params.phi2 - c2))))


def classify_blowup_limit(u1_inf, u2_inf, p1, p2, tolerance=0.02) -> bool:
    """Whether constant warpings ``u1, u2`` can be the shrinking soliton with ``phi_i^2 = u_i``."""
    return bool(abs(u1_inf - u2_inf) <= tolerance * max(u1_inf, u2_inf) and p1 == p2)
