"""Monitored quantities per frame and discrete heat-operator residuals.

``gamma = |grad v|^2`` (full metric), ``chi = |Hess v|^2`` (base metric) and
``rho = |Rm[g_B]|^2``; on a one-dimensional base ``gamma = v_s^2``,
``chi = v_ss^2`` and ``rho = 0``.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import AlignmentError
from .geometry import (FlowState, arclength_fields, full_hessian_norm_sq_field, laplacian_field, rho_field,
                       rm_pointwise)

GAMMA_CUTOFF = 1e-12


@dataclass(frozen=True)
class DiagnosticsFrame:
    t: float
    gamma: np.ndarray
    chi: np.ndarray
    rho: np.ndarray
    L: np.ndarray
    E: np.ndarray
    rm_sup: float
    rm_pointwise: np.ndarray

    def sup(self, name):
        return np.nanmax(getattr(self, name), axis=-1)


def compute_frame(state: FlowState, Gs=None) -> DiagnosticsFrame:
    u = state.u
    vs, vss = arclength_fields(state, state.v)
    gamma, chi = vs * vs, vss * vss
    rho = rho_field(state)
    L = np.sqrt(rho) + np.sum(gamma / u ** 2, axis=0) + np.sum(np.sqrt(chi) / u, axis=0)
    if Gs is None:
        E = np.full_like(gamma, np.nan)
    else:
        with np.errstate(all="ignore"):
            E = np.stack([G.value(state.v[a]) / state.v[a] ** 2 for a, G in enumerate(Gs)])
    rm = rm_pointwise(state)
    return DiagnosticsFrame(state.t, gamma, chi, rho, L, E, float(np.nanmax(rm)), rm)


def _uniform_window(frames):
    if len(frames) != 3:
        raise AlignmentError("three frames are required")
    x0 = frames[0].x
    for f in frames[1:]:
        if f.x.shape != x0.shape or np.any(f.x != x0):
            raise AlignmentError("frames do not share a grid")
    t = np.array([f.t for f in frames])
    d1, d2 = t[1] - t[0], t[2] - t[1]
    if d1 <= 0 or not np.isclose(d1, d2, rtol=1e-9, atol=0):
        raise AlignmentError("frames are not equally spaced in time")
    return 0.5 * (t[2] - t[0])


def heat_residual(fprev, fmid, fnext, state_mid: FlowState, times):
    """Central-in-time, central-in-space estimate of ``(d_t - Delta) f`` at the middle frame."""
    times = np.asarray(times, dtype=float)
    shapes = {np.shape(fprev), np.shape(fmid), np.shape(fnext)}
    if len(shapes) != 1 or np.shape(fmid)[-1] != state_mid.size:
        raise AlignmentError("fields do not share the grid")
    if times.shape != (3,):
        raise AlignmentError("three times are required")
    d1, d2 = times[1] - times[0], times[2] - times[1]
    if d1 <= 0 or not np.isclose(d1, d2, rtol=1e-9, atol=0):
        raise AlignmentError("frames are not equally spaced in time")
    dt = 0.5 * (times[2] - times[0])
    return (np.asarray(fnext) - np.asarray(fprev)) / (2.0 * dt) - laplacian_field(state_mid, fmid)


def _heat(frames, fields):
    return heat_residual(fields[0], fields[1], fields[2], frames[1], [f.t for f in frames])


def _trim(a, margin):
    a = np.array(a, dtype=float)
    a[..., :margin] = np.nan
    a[..., a.shape[-1] - margin:] = np.nan
    return a


@dataclass
class ResidualReport:
    identity_gamma_residual: float = 0.0
    ineq_gamma_margin: float = 0.0
    ineq_chi_margin: float = 0.0
    ineq_rho_margin: float = 0.0
    grid_h: float = 0.0
    dt_used: float = 0.0
    gamma_margin_quarter: float = 0.0
    gradient_identity_residual: float = 0.0
    fitted_C_chi: float = 0.0
    fitted_C_hessian: float = 0.0
    rho_zero: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def check_gamma_identity(frames, margin=4) -> ResidualReport:
    """Sup-norm residual of ``(d_t - Delta) gamma = -2|Hess v|^2 - 2<grad gamma, grad v>/u + 2 gamma^2/u^2``.

    The same call reports the residual of ``<grad gamma, grad v> = 2 Hess v(grad v, grad v)``
    with ``grad gamma`` differenced directly.
    """
    dt = _uniform_window(frames)
    mid = frames[1]
    u = mid.u
    gam = [arclength_fields(f, f.v)[0] ** 2 for f in frames]
    lhs = _heat(frames, gam)
    vs, vss = arclength_fields(mid, mid.v)
    gs, _ = arclength_fields(mid, gam[1])
    hess = np.stack([full_hessian_norm_sq_field(mid, mid.v[a]) for a in range(mid.spec.n_fibers)])
    rhs = -2.0 * hess - 2.0 * gs * vs / u + 2.0 * gam[1] ** 2 / u ** 2
    res = _trim(np.abs(lhs - rhs), margin)
    grad = _trim(np.abs(gs * vs - 2.0 * vss * vs * vs), margin)
    return ResidualReport(identity_gamma_residual=float(np.nanmax(res)), grid_h=mid.h, dt_used=dt,
                          gradient_identity_residual=float(np.nanmax(grad)))


def _nanmin_or_zero(a):
    """Smallest finite entry; an inequality with no admissible cells is vacuous."""
    return float(np.nanmin(a)) if np.isfinite(a).any() else 0.0


def _fit_constant(excess, basis, rel_floor=1e-3):
    """Smallest ``C >= 0`` with ``excess <= C * basis`` on cells where ``basis`` is resolvable.

    Near zeros of ``basis`` the ratio is dominated by discretization error, so
    cells with ``basis`` below ``rel_floor`` times its maximum are skipped.
    """
    fin = np.isfinite(excess) & np.isfinite(basis)
    if not fin.any():
        return 0.0
    ok = fin & (basis > rel_floor * np.max(basis[fin]))
    if not ok.any():
        return 0.0
    return float(max(0.0, np.max(excess[ok] / basis[ok])))


def check_evolution_inequalities(frames, margin=4, cutoff=GAMMA_CUTOFF) -> ResidualReport:
    """Signed margins (min of RHS - LHS) of the evolution inequalities for gamma, chi, rho.

    The gamma inequality uses its explicit constants.  The chi inequality and the
    Hessian evolution inequality carry a dimensional constant which is fitted
    as the smallest value making the margin nonnegative.
    """
    rep = check_gamma_identity(frames, margin)
    mid = frames[1]
    u = mid.u
    n_fib = mid.spec.n_fibers
    derivs = [arclength_fields(f, f.v) for f in frames]
    gam = [d[0] ** 2 for d in derivs]
    chi = [d[1] ** 2 for d in derivs]
    rho = [rho_field(f) for f in frames]
    g, c = gam[1], chi[1]
    vs, vss = derivs[1]
    gs, gss = arclength_fields(mid, g)
    heat_g = _heat(frames, gam)
    heat_c = _heat(frames, chi)
    heat_r = _heat(frames, rho)
    L = np.sqrt(rho[1]) + np.sum(g / u ** 2, axis=0) + np.sum(np.sqrt(c) / u, axis=0)
    v3 = arclength_fields(mid, vss)[0]
    # on a 1-D base |grad gamma|^2/gamma = 4 v_ss^2 and |grad chi|^2/chi = 4 v_sss^2 exactly;
    # the closed forms avoid differencing across zeros of gamma and chi
    with np.errstate(all="ignore"):
        keep = g >= cutoff
        grad_term = np.where(keep, 4.0 * vss * vss, np.nan)
        m_half = -0.5 * grad_term + 6.0 * (g / u ** 2) * g - heat_g
        m_quarter = -0.25 * grad_term + 6.0 * (g / u ** 2) * g - heat_g
        keep_c = c >= cutoff
        excess_c = np.where(keep_c, heat_c + 2.0 * v3 * v3, np.nan)
        basis_c = L * c + L * np.sum(g / u ** 2, axis=0) * g
    excess_c, basis_c = _trim(excess_c, margin), _trim(basis_c, margin)
    C_chi = _fit_constant(excess_c, basis_c)
    m_chi = C_chi * basis_c - excess_c

    # Hessian evolution: everything explicit except the warping cross term
    hess_full = np.stack([full_hessian_norm_sq_field(mid, mid.v[a]) for a in range(n_fib)])
    N = float(np.sum(mid.spec.dims))
    known = (-2.0 * v3 ** 2 + 2.0 * g * c / u ** 2 - 2.0 * vs * gs * g / u ** 3 + 4.0 * vss * vs * gs / u ** 2
             - 2.0 * vss * gss / u + N * g / u ** 2 * (-c + 0.25 * vs * gs / u))
    wsum = np.sum((arclength_fields(mid, u)[0] / u) ** 2, axis=0)
    basis_h = _trim(wsum * np.sqrt(hess_full) * np.abs(vss), margin)
    excess_h = _trim(heat_c - known, margin)
    C_hess = _fit_constant(excess_h, basis_h)

    m_rho = -heat_r  # both sides vanish on a flat base
    rep.ineq_gamma_margin = _nanmin_or_zero(_trim(m_half, margin))
    rep.gamma_margin_quarter = _nanmin_or_zero(_trim(m_quarter, margin))
    rep.ineq_chi_margin = float(np.nanmin(m_chi)) if np.isfinite(m_chi).any() else 0.0
    rep.ineq_rho_margin = float(np.nanmin(_trim(m_rho, margin)))
    rep.fitted_C_chi = C_chi
    rep.fitted_C_hessian = C_hess
    rep.rho_zero = bool(all(np.all(r == 0) for r in rho) and np.all(heat_r[np.isfinite(heat_r)] == 0))
    if np.isfinite(_trim(m_half, margin)).any():
        worst = np.unravel_index(np.nanargmin(_trim(m_half, margin)), m_half.shape)
        rep.extra = {"gamma_worst_fiber": int(worst[0]), "gamma_worst_x": float(mid.x[worst[1]]),
                     "gamma_worst_s": float(mid.arclength()[worst[1]])}
    return rep


def sample_windows(traj, fractions, dt, config=None):
    """Three-frame windows of spacing ``dt`` started from the frames nearest ``fractions * t_form``."""
    from .flow import probe_window
    config = traj.config if config is None else config
    t_form = traj.initial.spec.offsets[traj.initial.varsigma] / traj.initial.spec.mus[traj.initial.varsigma]
    out = []
    for f in fractions:
        out.append(probe_window(traj.frames[traj.frame_at(f * t_form)], config, dt))
    return out


CSV_FIELDS = ("t", "sup_gamma", "sup_chi", "rm_sup", "min_u_varsigma", "type_one_product")


def diagnostics_rows(traj, t_sing_est, Gs=None):
    k = traj.initial.varsigma
    rows = []
    for f in traj.frames:
        d = compute_frame(f, Gs)
        rows.append({"t": f.t,
                     "sup_gamma": ";".join(repr(float(x)) for x in d.sup("gamma")),
                     "sup_chi": ";".join(repr(float(x)) for x in d.sup("chi")),
                     "rm_sup": d.rm_sup, "min_u_varsigma": float(f.u[k].min()),
                     "type_one_product": d.rm_sup * (t_sing_est - f.t)})
    return rows


def write_csv(rows, path, fields=CSV_FIELDS):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
