"""Blowup sequences, parabolic rescaling and limit ratios near the singular time.

A sequence is a list of spacetime points ``(x_j, t_j)`` with scales
``lambda_j = 1 / (T - t_j)``.  The fiber ratio ``u_1/u_2`` and the curvature
ratio ``|Rm|(x_j, t_j) / sup |Rm|(t_j)`` are tracked along it; their "limits"
are averages over the last few usable points.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import FeasibilityError, InconclusiveError, ParameterError, TruncationError
from .flow import Trajectory
from .geometry import rm_pointwise

DEFAULT_GAPS = {
    "non_soliton": tuple(np.geomspace(1e-2, 1e-3, 7)),
    "soliton_seeking": (0.05, 0.035, 0.025, 0.018, 0.013, 0.009),
}


@dataclass
class BlowupSequence:
    mode: str
    points: list
    times: list
    scales: list
    target_c: list
    achieved_c: list
    eta: float
    certificate: list
    T: float
    frame_index: list = field(default_factory=list)

    @property
    def essential(self) -> bool:
        return bool(min(self.certificate) > 0)

    @property
    def limsup_scale_gap(self) -> float:
        return float(max(l * (self.T - t) for l, t in zip(self.scales, self.times)))

    def to_dict(self):
        d = asdict(self)
        d["essential"] = self.essential
        d["limsup_scale_gap"] = self.limsup_scale_gap
        return d


@dataclass
class RescaledFrame:
    tau: float
    y: np.ndarray
    u_rescaled: np.ndarray

    def oscillation(self):
        """Relative spatial oscillation ``ptp(u) / mean(u)`` per fiber."""
        return np.ptp(self.u_rescaled, axis=1) / np.mean(self.u_rescaled, axis=1)


def _spline(x, y):
    ok = np.isfinite(y)
    return CubicSpline(x[ok], y[ok])


def _profile_root(x, d, level):
    """Largest ``x > 0`` with ``d(x) = level`` for a profile decreasing toward the right end."""
    right = x >= 0
    xr, dr = x[right], d[right]
    if not (dr.min() < level < dr.max()):
        raise FeasibilityError(f"level {level:.3g} outside the profile range [{dr.min():.3g}, {dr.max():.3g}]")
    sp = CubicSpline(xr, dr)
    i = int(np.flatnonzero(dr > level)[-1])
    return float(brentq(lambda z: float(sp(z)) - level, xr[i], xr[i + 1]))


def build_sequence(traj: Trajectory, mode: str, T: float, c2=1.0, gaps=None, outer_fraction=0.9,
                   fiber_pair=(0, 1)):
    """Construct a sequence from recorded frames.

    ``non_soliton`` places ``x_j`` where ``delta_2(x_j) = c2 (a - t_j)`` on the initial
    profile; ``soliton_seeking`` places ``x_j`` at ``outer_fraction`` of the domain so
    that ``delta(x_j) / (a - t_j)`` is small.
    """
    if mode not in DEFAULT_GAPS:
        raise ParameterError(f"unknown sequence mode {mode!r}")
    init = traj.initial
    spec = init.spec
    k = init.varsigma
    a_over_mu = spec.offsets[k] / spec.mus[k]
    gaps = DEFAULT_GAPS[mode] if gaps is None else gaps
    i1, i2 = fiber_pair if spec.n_fibers > 1 else (0, 0)
    d1, d2 = init.v[i1], init.v[i2]
    s0 = init.arclength()
    times = traj.times
    with np.errstate(all="ignore"):
        eta = float(np.median(d1[-10:] / d2[-10:])) if spec.n_fibers > 1 else 1.0
    pts, ts, lams, targets, achieved, cert, idxs = [], [], [], [], [], [], []
    for g in gaps:
        j = int(np.argmin(np.abs((T - times) - g)))
        if j in idxs:
            continue
        t = float(times[j])
        if T - t <= 0 or abs((T - t) - g) > 0.25 * g:
            raise FeasibilityError(f"no recorded frame near T - t = {g:.3g}")
        hom = a_over_mu - t
        if mode == "non_soliton":
            level = c2 * hom
            if level <= d2[-1] * 1.5:
                raise FeasibilityError(f"domain too small: need delta = {level:.3g}, tail is {d2[-1]:.3g}")
            x = _profile_root(init.x, d2, level)
            target = [c2 * eta, c2]
        else:
            s_target = outer_fraction * s0.max()
            x = float(np.interp(s_target, s0, init.x))
            target = [0.0, 0.0]
        dd1 = float(_spline(init.x, d1)(x))
        dd2 = float(_spline(init.x, d2)(x))
        frame = traj.frames[j]
        rm = rm_pointwise(frame)
        rm_x = float(_spline(frame.x, rm)(x))
        pts.append(x)
        ts.append(t)
        lams.append(1.0 / (T - t))
        targets.append(target)
        achieved.append([dd1 / hom, dd2 / hom])
        cert.append(rm_x * (T - t))
        idxs.append(j)
    if not pts:
        raise FeasibilityError("no usable sequence points")
    return BlowupSequence(mode, pts, ts, lams, targets, achieved, eta, cert, float(T), idxs)


def _tail_limit(series, k=3):
    series = np.asarray(series, dtype=float)
    if series.size < k:
        raise InconclusiveError(f"need at least {k} sequence points, have {series.size}")
    tail = series[-k:]
    return float(np.mean(tail)), float(np.ptp(tail))


def ratio_series(seq: BlowupSequence, traj: Trajectory, fiber_pair=(0, 1)):
    i1, i2 = fiber_pair
    out = []
    for x, j in zip(seq.points, seq.frame_index):
        f = traj.frames[j]
        out.append(float(_spline(f.x, f.u[i1])(x) / _spline(f.x, f.u[i2])(x)))
    return np.array(out)


def limit_ratio(seq: BlowupSequence, traj: Trajectory, fiber_pair=(0, 1), k=3):
    """Extrapolated ``u_1 / u_2`` along the sequence (mean of the last ``k`` points)."""
    lim, _ = _tail_limit(ratio_series(seq, traj, fiber_pair), k)
    return lim


def curvature_ratio_series(seq: BlowupSequence, traj: Trajectory):
    out = []
    for x, j in zip(seq.points, seq.frame_index):
        f = traj.frames[j]
        rm = rm_pointwise(f)
        out.append(float(_spline(f.x, rm)(x) / np.nanmax(rm)))
    return np.array(out)


def soliton_criterion(seq: BlowupSequence, traj: Trajectory, tol=0.02, k=3):
    """Limit of ``|Rm|(x_j, t_j) / sup |Rm|(t_j)`` and whether it equals 1 within ``tol``."""
    lim, _ = _tail_limit(curvature_ratio_series(seq, traj), k)
    return lim, bool(abs(lim - 1.0) <= tol)


def rescale(seq: BlowupSequence, traj: Trajectory, j: int, window=5.0, points=201):
    """Parabolic blowup of frame ``j``: ``u_j(y) = lambda_j u(s_j + y / sqrt(lambda_j))``."""
    lam = seq.scales[j]
    f = traj.frames[seq.frame_index[j]]
    s = f.arclength()
    sj = float(np.interp(seq.points[j], f.x, s))
    y = np.linspace(-window, window, points)
    ss = sj + y / np.sqrt(lam)
    if ss.min() < s[1] or ss.max() > s[-2]:
        raise TruncationError("rescaling window reaches past the domain")
    u = np.stack([CubicSpline(s, f.u[a])(ss) for a in range(f.spec.n_fibers)])
    return RescaledFrame(lam * (f.t - seq.T), y, lam * u)


def closed_form_ratio(eta, c2):
    """``(1 + c2 eta) / (1 + c2)``."""
    return (1.0 + c2 * eta) / (1.0 + c2)
