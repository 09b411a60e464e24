"""Initial-data validation and the standard admissible examples."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import control
from .control import ControlFunction, H_values, g_class_report, require_in_class
from .errors import ParameterError, SingularStateError
from .geometry import FiberSpec, FlowState, WarpedProductSpec, arclength_fields, rho_field, rm_pointwise


@dataclass(frozen=True)
class GridSpec:
    """Uniform ``x`` grid; with ``stretch = w`` the arclength is ``r = w sinh(x)``.

    ``half_width`` is always the arclength half-width of the domain.
    """

    half_width: float = 200.0
    points: int = 2048
    stretch: float | None = 5.0

    def __post_init__(self):
        if self.points < 5 or self.half_width <= 0:
            raise ParameterError("grid needs at least 5 points and a positive half-width")
        if self.stretch is not None and self.stretch <= 0:
            raise ParameterError("stretch must be positive")

    def build(self):
        """Return ``(x, phi, r)``."""
        if self.stretch is None:
            x = np.linspace(-self.half_width, self.half_width, self.points)
            return x, np.ones_like(x), x.copy()
        w = self.stretch
        X = np.arcsinh(self.half_width / w)
        x = np.linspace(-X, X, self.points)
        return x, w * np.cosh(x), w * np.sinh(x)

    def refined(self, factor=2):
        """Same domain with spacing divided by ``factor`` (old points are kept)."""
        return GridSpec(self.half_width, (self.points - 1) * factor + 1, self.stretch)

    def to_dict(self):
        return {"half_width": self.half_width, "points": self.points, "stretch": self.stretch}


def inverse_square(r):
    return 1.0 / (1.0 + r * r)


def gaussian(r):
    return np.exp(-r * r)


@dataclass
class AssumptionReport:
    c_init: float
    per_bound_margins: dict
    passed: bool
    grad_rm_bounded: bool
    positive: bool = True
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"c_init": self.c_init, "per_bound_margins": self.per_bound_margins, "passed": self.passed,
                "grad_rm_bounded": self.grad_rm_bounded, "positive": self.positive, "notes": list(self.notes)}


def _tail_masks(n, frac):
    k = max(2, int(round(frac * n)))
    idx = np.arange(n)
    return [(idx < k // 2, (idx >= k // 2) & (idx < k)),
            (idx >= n - k // 2, (idx < n - k // 2) & (idx >= n - k))]


def tail_unbounded(values, frac=0.2, growth=2.0):
    """True if ``values`` keep growing toward either end of the grid.

    The outer half of each tail region is compared with its inner half; a jump
    by more than ``growth`` that also exceeds the bulk maximum reads as an
    unbounded supremum on the infinite domain.
    """
    values = np.asarray(values, dtype=float)
    if np.any(np.isinf(values)):
        return True
    finite = np.where(np.isfinite(values), values, -np.inf)
    n = values.size
    masks = _tail_masks(n, frac)
    bulk = np.ones(n, dtype=bool)
    for outer, inner in masks:
        bulk &= ~(outer | inner)
    bulk_max = finite[bulk].max() if bulk.any() else -np.inf
    for outer, inner in masks:
        o, i = finite[outer].max(), finite[inner].max()
        if o > growth * max(i, 0.0) and o > bulk_max and o > 0:
            return True
    return False


def _safe_ratio(num, den):
    with np.errstate(all="ignore"):
        out = np.where(num == 0, 0.0, num / den)
    return np.where(np.isnan(num), np.nan, out)


def validate_main_assumptions(spec: WarpedProductSpec, state0: FlowState, Gs: Sequence[ControlFunction],
                              tail_fraction=0.2) -> AssumptionReport:
    """Smallest ``C_init`` with ``gamma <= C G(v)``, ``chi <= C H(v)``, ``rho <= C``, ``|G| <= C``."""
    if state0.spec is not spec and state0.spec != spec:
        raise ParameterError("state belongs to a different spec")
    if len(Gs) != spec.n_fibers:
        raise ParameterError("one control function per fiber is required")
    require_in_class(Gs)
    if np.any(state0.u <= 0):
        raise SingularStateError("initial warping functions must be positive")
    notes = []
    v = state0.v
    constant = np.all(np.ptp(v, axis=1) == 0)
    positive = bool(np.all(v > 0) or (constant and np.all(v >= 0)))
    if not positive:
        notes.append("perturbation is not strictly positive")
    vs, vss = arclength_fields(state0, v)
    gamma, chi = vs * vs, vss * vss
    with np.errstate(all="ignore"):
        gv = np.stack([G.value(np.where(v[a] > 0, v[a], np.nan)) for a, G in enumerate(Gs)])
        hv = np.stack([H_values(Gs, a, np.where(v > 0, v, np.nan)) for a in range(spec.n_fibers)])
    margins = {"gamma": [], "chi": [], "rho": 0.0, "g_norm": []}
    for a in range(spec.n_fibers):
        for key, num, den in (("gamma", gamma[a], gv[a]), ("chi", chi[a], hv[a])):
            r = _safe_ratio(num, den)
            r = np.where(np.isnan(num), np.nan, np.where(np.isnan(den) & (num > 0), np.inf, r))
            r = np.where(np.isnan(den) & (num == 0), 0.0, r)
            m = float(np.nanmax(r)) if np.isfinite(r).any() or np.isinf(r).any() else 0.0
            if tail_unbounded(r, tail_fraction):
                notes.append(f"{key} ratio on fiber {a} grows along the tail")
                m = np.inf
            margins[key].append(m)
        margins["g_norm"].append(g_class_report(Gs[a]).g_norm)
    rho = rho_field(state0)
    margins["rho"] = float(rho.max())
    rm = rm_pointwise(state0)
    grad_rm, _ = arclength_fields(state0, rm)
    grad_rm = np.abs(grad_rm)
    grad_ok = bool(np.isfinite(grad_rm[2:-2]).all() and not tail_unbounded(grad_rm, tail_fraction))
    values = margins["gamma"] + margins["chi"] + [margins["rho"]] + margins["g_norm"]
    c_init = float(max(values))
    passed = bool(positive and grad_ok and np.isfinite(c_init) and np.any(spec.mus > 0))
    return AssumptionReport(c_init, margins, passed, grad_ok, positive, notes)


def _monotone_decay(d, frac=0.2):
    n = d.size
    k = max(3, int(round(frac * n)))
    left, right = d[:k], d[-k:]
    return bool(np.all(np.diff(left) > 0) and np.all(np.diff(right) < 0)
                and max(d[0], d[-1]) < 1e-2 * d.max())


def admissibility_check(deltas: Sequence[Callable], Gs: Sequence[ControlFunction], grid: GridSpec | None = None,
                        a_star=0.1, p=2, tail_fraction=0.2):
    """Whether the profiles form an admissible perturbation of ``R x S^p x ... x S^p``."""
    grid = GridSpec() if grid is None else grid
    x, phi, r = grid.build()
    with np.errstate(all="ignore"):
        ds = np.stack([np.asarray(d(r), dtype=float) * np.ones_like(r) for d in deltas])
    detail = {"decays": [], "decay_flags": [], "assumptions": None}
    if np.any(~np.isfinite(ds)) or np.any(ds <= 0):
        detail["reason"] = "profiles must be positive and finite on the grid"
        return False, detail
    detail["decays"] = [_monotone_decay(d, tail_fraction) for d in ds]
    detail["decay_flags"] = [g_class_report(G).decay_flag for G in Gs]
    spec = WarpedProductSpec(tuple(FiberSpec(p, 1.0, a_star) for _ in deltas))
    state = FlowState(spec, 0.0, x, phi, ds)
    rep = validate_main_assumptions(spec, state, Gs, tail_fraction)
    detail["assumptions"] = rep.to_dict()
    ok = all(detail["decays"]) and all(detail["decay_flags"]) and rep.passed
    return bool(ok), detail


# ---------------------------------------------------------------- examples

def build_canonical_example(eta, a_star, p, grid: GridSpec | None = None):
    """``R x S^p x S^p`` with ``v_2 = 1/(1+r^2)`` and ``v_1 = eta v_2``, fibers scaled so ``mu = 1``."""
    if not (np.isfinite(eta) and eta > 0):
        raise ParameterError(f"eta must be positive, got {eta}")
    if not (np.isfinite(a_star) and a_star > 0):
        raise ParameterError(f"a_star must be positive, got {a_star}")
    if int(p) != p or p < 2:
        raise ParameterError(f"p must be an integer >= 2, got {p}")
    grid = GridSpec() if grid is None else grid
    x, phi, r = grid.build()
    d2 = inverse_square(r)
    tags = ("soliton-degenerate",) if eta == 1 else ()
    spec = WarpedProductSpec((FiberSpec(int(p), 1.0, a_star), FiberSpec(int(p), 1.0, a_star)), tags=tags)
    state = FlowState(spec, 0.0, x, phi, np.stack([eta * d2, d2]))
    G = control.cubic_over_1ps()
    return spec, state, [G, G]


def build_perturbed_cylinder(a_star, p=2, grid: GridSpec | None = None, delta=inverse_square, mu=1.0):
    """Single fiber ``u(x, 0) = a_star + delta(r)``; ``delta=None`` gives the exact cylinder."""
    if a_star <= 0:
        raise ParameterError("a_star must be positive")
    grid = GridSpec() if grid is None else grid
    x, phi, r = grid.build()
    spec = WarpedProductSpec((FiberSpec(int(p), mu, a_star),))
    v = np.zeros_like(r) if delta is None else delta(r) * np.ones_like(r)
    return spec, FlowState(spec, 0.0, x, phi, v[None, :]), [control.cubic_over_1ps()]


def build_cylinder(a=1.0, mu=1.0, p=2, grid: GridSpec | None = None, eps=0.0):
    grid = GridSpec(10.0, 512, None) if grid is None else grid
    x, phi, _ = grid.build()
    spec = WarpedProductSpec((FiberSpec(int(p), mu, a),))
    return spec, FlowState(spec, 0.0, x, phi, np.full((1, x.size), eps)), [control.square()]


def build_circle_fiber(a_star, p=2, grid: GridSpec | None = None, eta=1.0):
    """``R x S^1 x S^p``: the circle has zero offset and warping ``eta delta``."""
    grid = GridSpec() if grid is None else grid
    x, phi, r = grid.build()
    d = inverse_square(r)
    spec = WarpedProductSpec((FiberSpec(1, 0.0, 0.0), FiberSpec(int(p), 1.0, a_star)))
    G = control.cubic_over_1ps()
    return spec, FlowState(spec, 0.0, x, phi, np.stack([eta * d, d])), [G, G]


def build_interior_minimum(a_star=0.1, p=2, grid: GridSpec | None = None, far=0.5, dip=0.45, width=1.0):
    """Single fiber whose perturbation has a pronounced dip at the origin (not admissible)."""
    grid = GridSpec(20.0, 801, None) if grid is None else grid
    x, phi, r = grid.build()
    v = far - dip * np.exp(-(r / width) ** 2)
    spec = WarpedProductSpec((FiberSpec(int(p), 1.0, a_star),), tags=("interior-minimum",))
    return spec, FlowState(spec, 0.0, x, phi, v[None, :]), [control.cubic_over_1ps()]
