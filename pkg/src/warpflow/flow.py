"""Method-of-lines integration of Ricci flow for a multiply-warped metric.

With ``u_a = (a_a - mu_a t) + v_a`` and arclength ``s`` the flow reduces to

    d_t v_a   = Delta v_a - |v_a,s|^2 / u_a
    d_t phi   = phi * sum_a n_a (sqrt u_a)_ss / sqrt u_a

where ``Delta f = f_ss + 1/2 sum n_b (u_b,s / u_b) f_s``.  The second line is
``d_t g_ss = -2 Rc_ss`` on a flat one-dimensional base.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NumericError, ParameterError, SingularStateError, SingularityImminent
from .geometry import FlowState, WarpedProductSpec, arclength_arrays, curvature_fields, rm_pointwise

log = logging.getLogger(__name__)

BC_MODES = ("asymptotic_dirichlet", "neumann")
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class IntegratorConfig:
    cfl_safety: float = 0.25
    dt_max: float = 1e-3
    refinement: int | None = None
    bc_mode: str = "asymptotic_dirichlet"
    stop_u_floor: float = 1e-4
    stop_time: float | None = None
    checkpoint_every: int = 0
    reaction_safety: float = 0.05
    frame_stride: int = 50
    frame_shrink: float = 1.05
    max_steps: int = 2_000_000
    dt_min: float = 1e-15

    def __post_init__(self):
        if not 0 < self.cfl_safety <= 1:
            raise ParameterError("cfl_safety must lie in (0, 1]")
        if self.stop_u_floor <= 0:
            raise ParameterError("stop_u_floor must be positive")
        if self.bc_mode not in BC_MODES:
            raise ParameterError(f"bc_mode must be one of {BC_MODES}")
        if self.dt_max <= 0 or self.reaction_safety <= 0:
            raise ParameterError("dt_max and reaction_safety must be positive")

    def to_dict(self):
        return asdict(self)


def _padded(f, mode):
    if mode == "neumann":
        return np.pad(f, [(0, 0)] * (f.ndim - 1) + [(1, 1)], mode="reflect")
    return f


def rhs(state: FlowState, bc_mode="asymptotic_dirichlet"):
    """Time derivatives ``(dphi_dt, dv_dt)`` on every grid cell."""
    spec = state.spec
    hom = spec.homogeneous(state.t)[:, None]
    v = _padded(state.v, bc_mode)
    phi = _padded(state.phi, bc_mode)
    u = hom + v
    if np.any(u <= 0):
        raise SingularStateError("warping function non-positive")
    vs, vss = arclength_arrays(v, phi, state.h)
    w = vs / u
    drift = 0.5 * np.einsum("a,an->n", spec.dims, w)
    dv = vss + drift * vs - vs * w
    dlogphi = np.einsum("a,an->n", spec.dims, 0.5 * vss / u - 0.25 * w * w)
    dphi = phi * dlogphi
    if bc_mode == "neumann":
        dv, dphi = dv[:, 1:-1], dphi[1:-1]
    else:
        dv[:, [0, -1]] = 0.0
        dphi[[0, -1]] = 0.0
    if not (np.all(np.isfinite(dv)) and np.all(np.isfinite(dphi))):
        raise NumericError("non-finite time derivative")
    return dphi, dv


def stable_dt(state: FlowState, config: IntegratorConfig) -> float:
    """Largest step allowed by diffusion, drift and the shrinking fiber scale."""
    spec = state.spec
    ds = state.phi * state.h
    dt = config.cfl_safety * ds.min() ** 2 / 2.0
    u = state.u
    us, _ = arclength_arrays(state.v, state.phi, state.h)
    drift = np.abs(0.5 * np.einsum("a,an->n", spec.dims, us / u))
    drift = np.nan_to_num(drift, nan=0.0)
    if drift.max() > 0:
        dt = min(dt, config.cfl_safety * float(np.min(ds[drift > 0] / drift[drift > 0])))
    pos = spec.mus > 0
    if pos.any():
        dt = min(dt, config.reaction_safety * float(np.min(u[pos].min(axis=1) / spec.mus[pos])))
    dt = min(dt, config.dt_max)
    if config.stop_time is not None:
        dt = min(dt, config.stop_time - state.t)
    return float(dt)


def _advance(state, dt, bc_mode):
    """One SSP-RK3 step; raises if an intermediate stage is singular."""
    p0, v0, t0 = state.phi, state.v, state.t
    dp, dv = rhs(state, bc_mode)
    s1 = state.replace(t=t0 + dt, phi=p0 + dt * dp, v=v0 + dt * dv)
    dp, dv = rhs(s1, bc_mode)
    s2 = state.replace(t=t0 + 0.5 * dt, phi=0.75 * p0 + 0.25 * (s1.phi + dt * dp),
                       v=0.75 * v0 + 0.25 * (s1.v + dt * dv))
    dp, dv = rhs(s2, bc_mode)
    return state.replace(t=t0 + dt, phi=p0 / 3.0 + 2.0 / 3.0 * (s2.phi + dt * dp),
                         v=v0 / 3.0 + 2.0 / 3.0 * (s2.v + dt * dv))


def step(state: FlowState, config: IntegratorConfig, dt=None) -> FlowState:
    """Advance by one accepted step, halving ``dt`` on rejection.

    A candidate is rejected when any stage is singular or non-finite, or when it
    would push the collapsing fiber below ``stop_u_floor``.
    """
    dt = stable_dt(state, config) if dt is None else float(dt)
    if dt <= 0:
        raise ParameterError("non-positive time step")
    k = state.varsigma
    while True:
        if dt < config.dt_min:
            raise SingularityImminent(f"time step underflow at t={state.t:.12g}")
        try:
            new = _advance(state, dt, config.bc_mode)
            if new.u[k].min() >= config.stop_u_floor or state.u[k].min() < config.stop_u_floor:
                return new
        except (SingularStateError, NumericError):
            pass
        dt *= 0.5


def probe_window(state: FlowState, config: IntegratorConfig, dt, count=3):
    """``count`` frames separated by exactly ``dt`` starting at ``state``."""
    frames = [state]
    for _ in range(count - 1):
        frames.append(_advance(frames[-1], dt, config.bc_mode))
    return frames


# ---------------------------------------------------------------- runs

@dataclass
class SingularityReport:
    t_sing_est: float
    t_form: float
    type_one_constant: float
    at_spatial_infinity: bool
    varsigma: int
    detected: bool = True
    degenerate: bool = False
    rm_argmax_outer: bool = False

    def to_dict(self):
        return asdict(self)


@dataclass
class Trajectory:
    """Recorded frames plus a per-step record of the collapsing scale."""

    spec: WarpedProductSpec
    config: IntegratorConfig
    frames: list
    rm_sup: list
    rm_argmax: list
    u_argmin: list
    step_t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    step_umin: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reached_floor: bool = False

    @property
    def times(self):
        return np.array([f.t for f in self.frames])

    @property
    def initial(self) -> FlowState:
        return self.frames[0]

    def frame_at(self, t):
        """Index of the frame nearest to ``t``."""
        return int(np.argmin(np.abs(self.times - t)))


def outer_mask(state: FlowState, fraction=0.1):
    s = np.abs(state.arclength())
    return s >= (1.0 - fraction) * s.max()


def _frame_info(state, k):
    curv = curvature_fields(state)
    rm = rm_pointwise(state, curv)
    return float(np.nanmax(rm)), int(np.nanargmax(rm)), int(np.argmin(state.u[k]))


def run(state0: FlowState, config: IntegratorConfig, checkpoint_path=None):
    """Integrate until ``stop_time`` or until the collapsing fiber nears ``stop_u_floor``."""
    spec = state0.spec
    k = state0.varsigma
    state = state0
    frames, rms, args, umins = [], [], [], []

    def record(s):
        frames.append(s)
        a, b, c = _frame_info(s, k)
        rms.append(a)
        args.append(b)
        umins.append(c)

    record(state)
    last_frame_u = state.u[k].min()
    ts, us = [state.t], [last_frame_u]
    floor_stop = config.stop_u_floor * (1.0 + 2.0 * config.reaction_safety)
    reached = False
    for n in range(1, config.max_steps + 1):
        if config.stop_time is not None and state.t >= config.stop_time * (1 - 1e-14):
            break
        if state.u[k].min() <= floor_stop:
            reached = True
            break
        state = step(state, config)
        umin = state.u[k].min()
        ts.append(state.t)
        us.append(umin)
        if n % config.frame_stride == 0 or last_frame_u / umin >= config.frame_shrink:
            record(state)
            last_frame_u = umin
        if checkpoint_path and config.checkpoint_every and n % config.checkpoint_every == 0:
            save_checkpoint(state, checkpoint_path)
    if frames[-1] is not state:
        record(state)
    if state.u[k].min() <= floor_stop:
        reached = True
    traj = Trajectory(spec, config, frames, rms, args, umins, np.array(ts), np.array(us), reached)
    return traj, singularity_report(traj)


def fit_singular_time(t, umin, decade=10.0):
    """Zero of a linear fit of ``min u`` against ``t`` over its final decade."""
    t, umin = np.asarray(t), np.asarray(umin)
    sel = umin <= decade * umin[-1]
    if sel.sum() < 3:
        sel = np.zeros_like(sel)
        sel[-min(10, t.size):] = True
    if sel.sum() < 2:
        return np.nan
    c1, c0 = np.polyfit(t[sel], umin[sel], 1)
    return float(-c0 / c1) if c1 < 0 else np.nan


def singularity_report(traj: Trajectory, decade=10.0, tail_frames=10) -> SingularityReport:
    spec = traj.spec
    k = traj.initial.varsigma
    t_sing = fit_singular_time(traj.step_t, traj.step_umin, decade)
    times = traj.times
    rm = np.array(traj.rm_sup)
    gap = t_sing - times
    c = np.nan
    if np.isfinite(t_sing):
        final = gap[-1]
        sel = (gap > 0) & (gap <= decade * final) if final > 0 else np.zeros(times.size, bool)
        if sel.sum() >= 1:
            c = float(np.mean(rm[sel] * gap[sel]))
    last = traj.frames[-tail_frames:]
    uk = traj.frames[-1].u[k]
    degenerate = bool(np.ptp(uk) <= 1e-12 * np.abs(uk).max())
    outer = outer_mask(traj.frames[-1])
    at_inf = (not degenerate) and all(outer[traj.u_argmin[-len(last) + i]] for i in range(len(last)))
    rm_outer = (not degenerate) and bool(outer[traj.rm_argmax[-1]])
    return SingularityReport(t_sing, float(spec.offsets[k] / spec.mus[k]), c, bool(at_inf), k, bool(traj.reached_floor),
                             degenerate, rm_outer)


# ---------------------------------------------------------------- checkpoints

def state_to_dict(state: FlowState):
    return {"version": CHECKPOINT_VERSION, "spec": state.spec.to_dict(), "t": state.t,
            "x": state.x.tolist(), "phi": state.phi.tolist(), "v": state.v.tolist()}


def state_from_dict(d) -> FlowState:
    if d.get("version") != CHECKPOINT_VERSION:
        raise ParameterError(f"unsupported checkpoint version {d.get('version')}")
    spec = WarpedProductSpec.from_dict(d["spec"])
    return FlowState(spec, float(d["t"]), np.array(d["x"]), np.array(d["phi"]), np.array(d["v"]))


def save_checkpoint(state: FlowState, path):
    with open(path, "w") as fh:
        json.dump(state_to_dict(state), fh, sort_keys=True)


def load_checkpoint(path) -> FlowState:
    with open(path) as fh:
        return state_from_dict(json.load(fh))
