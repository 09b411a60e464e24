"""Pointwise geometry of a multiply-warped metric over a one-dimensional base.

The metric is ``g = phi(x)^2 dx^2 + sum_a u_a(x, t) g_a`` where each ``g_a`` is a
space form of dimension ``n_a`` normalised by ``mu_a g_a = 2 Rc[g_a]`` and
``u_a = (a_a - mu_a t) + v_a``.  All derivatives are taken with respect to
arclength ``ds = phi dx`` using second-order central stencils on a uniform
``x`` grid; cells where a stencil does not fit are reported as NaN.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryStencilError, NumericError, ParameterError, SingularStateError


@dataclass(frozen=True)
class FiberSpec:
    dim: int
    einstein_const: float
    offset: float

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ParameterError(f"fiber dimension must be a positive integer, got {self.dim}")
        if not np.isfinite(self.einstein_const) or not np.isfinite(self.offset):
            raise ParameterError("fiber constants must be finite")
        if self.offset < 0:
            raise ParameterError(f"fiber offset must be nonnegative, got {self.offset}")

    @property
    def fiber_sectional(self) -> float:
        """Sectional curvature of the unscaled fiber (0 for a circle)."""
        if self.dim == 1:
            return 0.0
        return self.einstein_const / (2.0 * (self.dim - 1))


@dataclass(frozen=True)
class WarpedProductSpec:
    fibers: tuple
    base_dim: int = 1
    tags: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "fibers", tuple(self.fibers))
        object.__setattr__(self, "tags", tuple(self.tags))
        if self.base_dim != 1:
            raise ParameterError("only a one-dimensional base is supported")
        if not self.fibers:
            raise ParameterError("at least one fiber is required")
        if not any(f.einstein_const > 0 for f in self.fibers):
            raise ParameterError("at least one fiber must have positive Einstein constant")

    @property
    def n_fibers(self) -> int:
        return len(self.fibers)

    @property
    def dims(self) -> np.ndarray:
        return np.array([f.dim for f in self.fibers], dtype=float)

    @property
    def mus(self) -> np.ndarray:
        return np.array([f.einstein_const for f in self.fibers], dtype=float)

    @property
    def offsets(self) -> np.ndarray:
        return np.array([f.offset for f in self.fibers], dtype=float)

    @property
    def kappas(self) -> np.ndarray:
        return np.array([f.fiber_sectional for f in self.fibers], dtype=float)

    @property
    def dimension(self) -> int:
        return self.base_dim + int(sum(f.dim for f in self.fibers))

    def homogeneous(self, t) -> np.ndarray:
        """The explicit shrinking part ``a_a - mu_a t`` for each fiber."""
        return self.offsets - self.mus * t

    @property
    def varsigma(self) -> int:
        """Index of the first fiber to collapse, ``argmin a/mu`` over ``mu > 0``."""
        ratios = np.where(self.mus > 0, self.offsets / np.where(self.mus > 0, self.mus, 1.0), np.inf)
        return int(np.argmin(ratios))

    @property
    def t_form(self) -> float:
        k = self.varsigma
        return float(self.offsets[k] / self.mus[k])

    def to_dict(self):
        return {
            "base_dim": self.base_dim,
            "fibers": [{"dim": f.dim, "einstein_const": f.einstein_const, "offset": f.offset}
                       for f in self.fibers],
            "tags": list(self.tags),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(fibers=tuple(FiberSpec(int(f["dim"]), float(f["einstein_const"]), float(f["offset"]))
                                for f in d["fibers"]),
                   base_dim=int(d.get("base_dim", 1)), tags=tuple(d.get("tags", ())))


@dataclass(frozen=True)
class FlowState:
    """Grid values of ``phi`` and the perturbations ``v`` (shape ``(A, N)``) at time ``t``."""

    spec: WarpedProductSpec
    t: float
    x: np.ndarray
    phi: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        v = np.atleast_2d(np.asarray(self.v, dtype=float))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "v", v)
        n = x.size
        if n < 5 or phi.shape != (n,) or v.shape != (self.spec.n_fibers, n):
            raise ParameterError("x, phi and each v must share one length of at least 5")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(phi)) and np.all(np.isfinite(v))
                and np.isfinite(self.t)):
            raise NumericError("state contains non-finite values")
        dx = np.diff(x)
        if np.any(dx <= 0):
            raise ParameterError("x must be strictly increasing")
        if not np.allclose(dx, dx[0], rtol=1e-9, atol=0):
            raise ParameterError("x must be uniformly spaced; use phi for stretching")
        if np.any(phi <= 0):
            raise SingularStateError("phi must be positive")
        if np.any(self.u <= 0):
            raise SingularStateError(f"warping function non-positive at t={self.t}")

    @property
    def varsigma(self) -> int:
        """Collapsing fiber: ``argmin a/mu``, ties broken by the smallest ``min u``."""
        spec = self.spec
        pos = spec.mus > 0
        ratio = np.where(pos, spec.offsets / np.where(pos, spec.mus, 1.0), np.inf)
        tied = np.flatnonzero(np.isclose(ratio, ratio.min(), rtol=1e-12, atol=0))
        return int(tied[np.argmin(self.u[tied].min(axis=1))])

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def u(self) -> np.ndarray:
        return self.spec.homogeneous(self.t)[:, None] + self.v

    @property
    def size(self) -> int:
        return self.x.size

    def replace(self, **kw) -> "FlowState":
        d = dict(spec=self.spec, t=self.t, x=self.x, phi=self.phi, v=self.v)
        d.update(kw)
        return FlowState(**d)

    def window(self, lo, hi) -> "FlowState":
        """Restriction to grid cells ``lo:hi``."""
        return self.replace(x=self.x[lo:hi], phi=self.phi[lo:hi], v=self.v[:, lo:hi])

    def arclength(self) -> np.ndarray:
        """Signed arclength coordinate measured from the grid midpoint (trapezoid rule)."""
        seg = 0.5 * (self.phi[1:] + self.phi[:-1]) * np.diff(self.x)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        mid = self.size // 2
        if self.size % 2:
            return s - s[mid]
        return s - 0.5 * (s[mid - 1] + s[mid])


# ---------------------------------------------------------------- kernels

def _dx(f, h):
    out = np.full(np.shape(f), np.nan)
    out[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * h)
    return out


def _dxx(f, h):
    out = np.full(np.shape(f), np.nan)
    out[..., 1:-1] = (f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]) / (h * h)
    return out


def arclength_fields(state: FlowState, f):
    """First and second covariant arclength derivatives of a base function.

    ``f_s = f_x / phi`` and ``f_ss = (f_xx - (phi_x / phi) f_x) / phi^2``; the
    connection term is the single base Christoffel symbol ``phi_x / phi``.
    Works on arrays whose last axis is the grid.
    """
    return arclength_arrays(np.asarray(f, dtype=float), state.phi, state.h)


def arclength_arrays(f, phi, h):
    fx = _dx(f, h)
    fxx = _dxx(f, h)
    phix = _dx(phi, h)
    return fx / phi, (fxx - phix * fx / phi) / (phi * phi)


def _check_index(state, index):
    n = state.size
    i = index + n if index < 0 else index
    if i < 2 or i > n - 3:
        raise BoundaryStencilError(f"index {index} is within 2 cells of the boundary")
    return i


def arclength_derivatives(state: FlowState, field, index):
    """``(f_s, f_ss)`` at one interior grid point."""
    i = _check_index(state, index)
    f = np.asarray(field, dtype=float)
    if f.shape != state.x.shape:
        raise ParameterError("field length does not match the grid")
    loc = f[i - 2:i + 3]
    if not np.all(np.isfinite(loc)):
        raise NumericError("non-finite field values in stencil")
    fs, fss = arclength_fields(state.window(i - 2, i + 3), loc)
    return float(fs[2]), float(fss[2])


def log_gradients(state: FlowState):
    """``w_a = u_a,s / u_a`` for each fiber, shape ``(A, N)``."""
    u = state.u
    us, _ = arclength_fields(state, u)
    return us / u


def laplacian_field(state: FlowState, f):
    """Laplacian of the full metric applied to a base function.

    ``Delta_M f = f_ss + 1/2 sum_a n_a (u_a,s / u_a) f_s``.
    """
    fs, fss = arclength_fields(state, f)
    drift = 0.5 * np.einsum("a,an->n", state.spec.dims, log_gradients(state))
    return fss + drift * fs


def laplacian_scalar(state: FlowState, field, index) -> float:
    i = _check_index(state, index)
    f = np.asarray(field, dtype=float)
    if not np.all(np.isfinite(f[i - 2:i + 3])):
        raise NumericError("non-finite field values in stencil")
    return float(laplacian_field(state.window(i - 2, i + 3), f[i - 2:i + 3])[2])


def full_hessian_norm_sq_field(state: FlowState, f):
    """``|Hess_g f|^2`` for a base function ``f``.

    The base block contributes ``f_ss^2``; each fiber contributes ``n_b`` equal
    diagonal entries ``(1/2 (u_b,s / u_b) f_s)^2``.
    """
    fs, fss = arclength_fields(state, f)
    w = log_gradients(state)
    fiber = np.einsum("a,an->n", state.spec.dims, (0.5 * w * fs) ** 2)
    return fss * fss + fiber


def full_hessian_norm_sq(state: FlowState, alpha: int, index) -> float:
    i = _check_index(state, index)
    return float(full_hessian_norm_sq_field(state.window(i - 2, i + 3), state.v[alpha, i - 2:i + 3])[2])


# ---------------------------------------------------------------- curvature

@dataclass(frozen=True)
class Curvature:
    """Nonzero curvature families on every grid cell (NaN at the two end cells)."""

    u: np.ndarray
    du_ds: np.ndarray
    d2u_ds2: np.ndarray
    K_base_fiber: np.ndarray
    K_fiber_internal: np.ndarray
    K_cross: np.ndarray
    ric_horizontal: np.ndarray
    ric_vertical: np.ndarray


@dataclass(frozen=True)
class PointGeometry:
    u: np.ndarray
    du_ds: np.ndarray
    d2u_ds2: np.ndarray
    K_base_fiber: np.ndarray
    K_fiber_internal: np.ndarray
    K_cross: np.ndarray
    ric_horizontal: float
    ric_vertical: np.ndarray


def curvature_fields(state: FlowState) -> Curvature:
    spec = state.spec
    u = state.u
    us, uss = arclength_fields(state, u)
    w = us / u
    kbf = -(0.5 * uss / u - 0.25 * w * w)
    kfi = spec.kappas[:, None] / u - 0.25 * w * w
    # a circle has no planes inside the fiber
    kfi[spec.dims == 1] = np.nan
    kx = -0.25 * w[:, None, :] * w[None, :, :]
    diag = np.arange(spec.n_fibers)
    kx[diag, diag, :] = np.nan
    ric_h = np.einsum("a,an->n", spec.dims, kbf)
    lap_u = uss + 0.5 * np.einsum("b,bn->n", spec.dims, w)[None, :] * us
    ric_v = 0.5 * spec.mus[:, None] - 0.5 * (lap_u - us * us / u)
    return Curvature(u, us, uss, kbf, kfi, kx, ric_h, ric_v)


def curvature_components(state: FlowState, index) -> PointGeometry:
    i = _check_index(state, index)
    c = curvature_fields(state.window(i - 2, i + 3))
    return PointGeometry(c.u[:, 2].copy(), c.du_ds[:, 2].copy(), c.d2u_ds2[:, 2].copy(),
                         c.K_base_fiber[:, 2].copy(), c.K_fiber_internal[:, 2].copy(),
                         c.K_cross[:, :, 2].copy(), float(c.ric_horizontal[2]),
                         c.ric_vertical[:, 2].copy())


def _nanmax_abs(*arrays):
    out = None
    for a in arrays:
        a = np.abs(a).reshape(-1, a.shape[-1])
        with np.errstate(invalid="ignore"):
            m = np.fmax.reduce(a, axis=0)
        out = m if out is None else np.fmax(out, m)
    return out


def rm_pointwise(state: FlowState, curv: Curvature | None = None):
    """Largest absolute sectional-type curvature at each cell."""
    c = curvature_fields(state) if curv is None else curv
    out = _nanmax_abs(c.K_base_fiber, c.K_fiber_internal, c.K_cross)
    out[[0, -1]] = np.nan
    return out


def rm_frobenius(state: FlowState, curv: Curvature | None = None):
    """Tensor norm ``sqrt(sum R_ijkl^2) = sqrt(4 sum_planes K^2)`` at each cell."""
    c = curvature_fields(state) if curv is None else curv
    n = state.spec.dims
    kfi = np.nan_to_num(c.K_fiber_internal, nan=0.0)
    kx = np.nan_to_num(c.K_cross, nan=0.0)
    tot = np.einsum("a,an->n", n, c.K_base_fiber ** 2)
    tot = tot + np.einsum("a,an->n", n * (n - 1) / 2.0, kfi ** 2)
    tot = tot + 0.5 * np.einsum("a,b,abn->n", n, n, kx ** 2)
    return np.sqrt(4.0 * tot)


def riemann_sup_norm(state: FlowState) -> float:
    return float(np.nanmax(rm_pointwise(state)))


def rho_field(state: FlowState):
    """``|Rm[g_B]|^2`` of the base metric.

    For a base of dimension k this is the squared norm of the base curvature
    tensor; a one-dimensional base is flat so the field vanishes identically.
    """
    return np.zeros(state.size)


def cylinder_deviation_fields(state: FlowState):
    """Pointwise distance to an unwarped product and the controlling quantity.

    ``lhs`` is the largest absolute component of ``Rm[g] - sum u^-1 Rm[g_F]``;
    ``rhs = rho^1/2 + sum (gamma / u^2 + chi^1/2 / u)``.
    """
    c = curvature_fields(state)
    shifted = c.K_fiber_internal - state.spec.kappas[:, None] / c.u
    lhs = _nanmax_abs(c.K_base_fiber, shifted, c.K_cross)
    vs, vss = arclength_fields(state, state.v)
    gamma = vs * vs
    chi = vss * vss
    rhs = np.sqrt(rho_field(state)) + np.sum(gamma / c.u ** 2 + np.sqrt(chi) / c.u, axis=0)
    lhs[[0, -1]] = np.nan
    return lhs, rhs


def cylinder_deviation(state: FlowState, index):
    i = _check_index(state, index)
    lhs, rhs = cylinder_deviation_fields(state.window(i - 2, i + 3))
    return float(lhs[2]), float(rhs[2])


def interior(n, margin=1):
    """Boolean mask excluding ``margin`` cells at each end."""
    m = np.zeros(n, dtype=bool)
    m[margin:n - margin] = True
    return m
