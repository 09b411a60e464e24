"""Independent reference computations used by the test-suite.

``ChristoffelOracle`` writes the warped metric in explicit coordinates
``(x, theta^1_1, ..., theta^A_nA)`` with each fiber in geodesic polar form
``dr^2 + sn_k(r)^2 g_{S^(n-1)}``, then computes Christoffel symbols, the Riemann
tensor and Ricci tensor symbolically by brute force.  Nothing from the package
is used.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import sympy as sp

X = sp.Symbol("x", real=True)
THETA0 = 1.1


def _sn(kappa, r):
    if kappa > 0:
        k = sp.sqrt(kappa)
        return sp.sin(k * r) / k
    if kappa < 0:
        k = sp.sqrt(-kappa)
        return sp.sinh(k * r) / k
    return r


def fiber_metric(n, kappa, coords):
    """Diagonal of a space form metric with sectional curvature ``kappa`` in polar coordinates."""
    if n == 1:
        return [sp.Integer(1)]
    r, rest = coords[0], coords[1:]
    diag = [sp.Integer(1)]
    # unit round sphere on the remaining angles
    w = _sn(kappa, r) ** 2
    for j, th in enumerate(rest):
        diag.append(w)
        w = w * sp.sin(th) ** 2
    return diag


@lru_cache(maxsize=None)
def _symbolic(dims, kappas):
    """Sectional curvatures and Ricci diagonal in terms of phi(x), u_a(x) and their derivatives."""
    phi = sp.Function("phi")(X)
    us = [sp.Function(f"u{a}")(X) for a in range(len(dims))]
    coords = [X]
    diag = [phi ** 2]
    first = []
    for a, (n, k) in enumerate(zip(dims, kappas)):
        th = sp.symbols(f"t{a}_0:{n}", real=True)
        first.append(len(coords))
        coords.extend(th)
        diag.extend(us[a] * c for c in fiber_metric(n, sp.nsimplify(k), list(th)))
    D = len(coords)
    g = diag

    def Gam(L, I, J):
        # diagonal metric: Gamma^L_IJ = 1/(2 g_LL) (d_I g_JL + d_J g_IL - d_L g_IJ)
        t = 0
        if J == L:
            t += sp.diff(g[L], coords[I])
        if I == L:
            t += sp.diff(g[L], coords[J])
        if I == J:
            t -= sp.diff(g[I], coords[L])
        return t / (2 * g[L])

    G = [[[Gam(L, I, J) for J in range(D)] for I in range(D)] for L in range(D)]

    def Riem(L, I, J, K):
        # R(d_I, d_J) d_K = R^L_IJK d_L
        t = sp.diff(G[L][J][K], coords[I]) - sp.diff(G[L][I][K], coords[J])
        for M in range(D):
            t += G[L][I][M] * G[M][J][K] - G[L][J][M] * G[M][I][K]
        return t

    def sectional(I, J):
        return Riem(I, I, J, J) / g[J]

    out = {"K_bf": [], "K_fi": [], "K_cross": {}, "ric_v": []}
    for a, n in enumerate(dims):
        i = first[a]
        out["K_bf"].append(sectional(0, i))
        out["K_fi"].append(sectional(i, i + 1) if n > 1 else None)
        # g_F(d_theta1, d_theta1) = 1, so this is Ric on a g_F-unit fiber vector
        out["ric_v"].append(sum(Riem(I, I, i, i) for I in range(D)))
        for b in range(len(dims)):
            if b != a:
                out["K_cross"][(a, b)] = sectional(i, first[b])
    out["ric_h"] = sum(Riem(I, I, 0, 0) for I in range(D)) / g[0]

    # replace function derivatives by plain symbols and fix the angles
    syms = {}
    subs = {}
    for name, f in [("phi", phi)] + [(f"u{a}", u) for a, u in enumerate(us)]:
        for k in (2, 1):
            s = sp.Symbol(f"{name}_{k}")
            subs[sp.Derivative(f, (X, k))] = s
            syms[(name, k)] = s
        s = sp.Symbol(f"{name}_0")
        syms[(name, 0)] = s
    fsubs = {phi: syms[("phi", 0)], **{u: syms[(f"u{a}", 0)] for a, u in enumerate(us)}}
    angle = {c: THETA0 for c in coords[1:]}
    args = sorted(syms.values(), key=lambda s: s.name)

    def compile_(e):
        if e is None:
            return None
        e = e.subs(subs).subs(fsubs).subs(angle)
        return sp.lambdify(args, sp.simplify(e), "math")

    compiled = {"K_bf": [compile_(e) for e in out["K_bf"]], "K_fi": [compile_(e) for e in out["K_fi"]],
                "ric_v": [compile_(e) for e in out["ric_v"]], "ric_h": compile_(out["ric_h"]),
                "K_cross": {k: compile_(e) for k, e in out["K_cross"].items()}}
    return compiled, [s.name for s in args]


class ChristoffelOracle:
    """Curvature of ``phi^2 dx^2 + sum u_a g_a`` at one point from exact jets of ``phi`` and ``u_a``."""

    def __init__(self, dims, kappas):
        self.dims = tuple(int(n) for n in dims)
        self.kappas = tuple(kappas)
        self._f, self._names = _symbolic(self.dims, self.kappas)

    def evaluate(self, phi_jet, u_jets):
        vals = {"phi": phi_jet}
        vals.update({f"u{a}": j for a, j in enumerate(u_jets)})
        args = [vals[n.rsplit("_", 1)[0]][int(n.rsplit("_", 1)[1])] for n in self._names]
        A = len(self.dims)
        f = self._f
        kx = np.full((A, A), np.nan)
        for (a, b), fn in f["K_cross"].items():
            kx[a, b] = fn(*args)
        return {"K_base_fiber": np.array([fn(*args) for fn in f["K_bf"]]),
                "K_fiber_internal": np.array([np.nan if fn is None else fn(*args) for fn in f["K_fi"]]),
                "K_cross": kx, "ric_horizontal": float(f["ric_h"](*args)),
                "ric_vertical": np.array([fn(*args) for fn in f["ric_v"]])}


def random_smooth_state(rng):
    """Random analytic ``phi`` and ``u_a`` as sympy expressions in ``x``, plus fiber data."""
    configs = [(2, 2), (3, 2), (1, 2), (2,), (2, 3, 2)]
    dims = configs[rng.integers(len(configs))]
    kappas, mus, offsets = [], [], []
    for n in dims:
        if n == 1:
            kappas.append(0)
            mus.append(0.0)
            offsets.append(0.0)
        else:
            k = int(rng.integers(1, 4))
            kappas.append(k)
            mus.append(2.0 * (n - 1) * k)
            offsets.append(float(rng.uniform(0.5, 2.0)))
    c = rng.uniform(-0.3, 0.3, 3)
    phi = sp.exp(c[0] * sp.sin(2 * X + c[1])) * (1 + c[2] * X ** 2 / 4)
    us = []
    for a in range(len(dims)):
        b = rng.uniform(0.1, 0.6, 3)
        us.append(offsets[a] + b[0] + b[1] * sp.cos(1.5 * X + b[2]) ** 2 + b[2] * X ** 3 / 5)
    return dims, kappas, mus, offsets, phi, us


def observed_order(seed, x0=0.25, sizes=(41, 81)):
    """Observed convergence order of the package curvature against the oracle at one random state."""
    from warpflow.geometry import FiberSpec, FlowState, WarpedProductSpec, curvature_components
    rng = np.random.default_rng(seed)
    dims, kappas, mus, offsets, phi, us = random_smooth_state(rng)
    ref = ChristoffelOracle(dims, kappas).evaluate(jets(phi, x0), [jets(u, x0) for u in us])
    spec = WarpedProductSpec(tuple(FiberSpec(n, m, a) for n, m, a in zip(dims, mus, offsets)))
    errs = []
    for n in sizes:
        x = np.linspace(-1, 1, n)
        i = int(round((x0 + 1) / (x[1] - x[0])))
        s = FlowState(spec, 0.0, x, sample(phi, x), np.stack([sample(u, x) - a for u, a in zip(us, offsets)]))
        pg = curvature_components(s, i)
        errs.append(max(np.nanmax(np.abs(pg.K_base_fiber - ref["K_base_fiber"])),
                        np.nanmax(np.abs(pg.K_fiber_internal - ref["K_fiber_internal"]), initial=0.0),
                        np.nanmax(np.abs(pg.K_cross - ref["K_cross"]), initial=0.0),
                        abs(pg.ric_horizontal - ref["ric_horizontal"]),
                        np.max(np.abs(pg.ric_vertical - ref["ric_vertical"]))))
    return float(np.log2(errs[0] / errs[1]))


def jets(expr, x0):
    return [float(sp.diff(expr, X, k).subs(X, x0)) for k in range(3)]


def sample(expr, xs):
    return np.asarray(sp.lambdify(X, expr, "numpy")(xs), dtype=float) * np.ones_like(xs)
