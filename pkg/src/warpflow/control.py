"""Control functions ``G: R+ -> R+`` and the functionals that gate the flow estimates.

``polyd(G) = sup_s (1 + s|G'|/G + s^2|G''|/G)`` measures how far ``G`` is from
a power law; ``|G|_class = polyd(G) + sup G/s^2``.  Suprema are estimated on
a log-spaced probe grid and flagged infinite when they fail to saturate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ClassError, DomainError, ParameterError


def probe_grid(lo=1e-8, hi=1e8, per_decade=64):
    decades = np.log10(hi) - np.log10(lo)
    return np.logspace(np.log10(lo), np.log10(hi), int(round(decades * per_decade)) + 1)


@dataclass(frozen=True)
class ControlFunction:
    value: Callable
    d1: Callable
    d2: Callable
    name: str = "G"
    domain_floor: float = 1e-12
    probe: np.ndarray = field(default_factory=probe_grid, repr=False, compare=False)

    def __call__(self, s):
        return self.value(s)

    def check_derivatives(self, rtol=1e-6):
        """Compare analytic derivatives with central differences on the probe grid."""
        s = self.probe
        eps = 1e-4 * s
        with np.errstate(all="ignore"):
            f0 = self.value(s)
            fp, fm = self.value(s + eps), self.value(s - eps)
            fd1 = (fp - fm) / (2 * eps)
            fd2 = (fp - 2 * f0 + fm) / (eps * eps)
            ok = np.isfinite(f0) & np.isfinite(fp) & np.isfinite(fm)
            # compare on the natural scales G/s and G/s^2 so tiny derivatives do not dominate
            e1 = np.abs(fd1 - self.d1(s)) * s / np.abs(f0)
            e2 = np.abs(fd2 - self.d2(s)) * s * s / np.abs(f0)
        # the second difference loses roughly half the digits
        return bool(np.all(e1[ok] <= max(rtol, 1e-6)) and np.all(e2[ok] <= max(rtol, 1e-6) * 1e3))

    @classmethod
    def from_values(cls, value, name="G", h=1e-4):
        """Derivatives by relative central differences; checked before use."""
        def d1(s):
            e = h * np.asarray(s, dtype=float)
            return (value(s + e) - value(s - e)) / (2 * e)

        def d2(s):
            e = h * np.asarray(s, dtype=float)
            return (value(s + e) - 2 * value(s) + value(s - e)) / (e * e)

        return cls(value, d1, d2, name=name)


def square():
    return ControlFunction(lambda s: s * s, lambda s: 2.0 * s, lambda s: 2.0 + 0.0 * s, name="square")


def cubic_over_1ps():
    def value(s):
        return s ** 3 / (1.0 + s)

    def d1(s):
        return s * s * (2.0 * s + 3.0) / (1.0 + s) ** 2

    def d2(s):
        return 2.0 * s * (s * s + 3.0 * s + 3.0) / (1.0 + s) ** 3

    return ControlFunction(value, d1, d2, name="cubic_over_1ps")


def exponential():
    return ControlFunction(np.exp, np.exp, np.exp, name="exp")


def rational(numerator: Sequence[float], denominator: Sequence[float] = (1.0,), name="rational"):
    """``P(s)/Q(s)`` from ascending coefficient lists."""
    P = np.polynomial.Polynomial(numerator)
    Q = np.polynomial.Polynomial(denominator)
    P1, P2, Q1, Q2 = P.deriv(1), P.deriv(2), Q.deriv(1), Q.deriv(2)

    def d1(s):
        q = Q(s)
        return (P1(s) * q - P(s) * Q1(s)) / (q * q)

    def d2(s):
        q = Q(s)
        r = P(s) / q
        r1 = (P1(s) - r * Q1(s)) / q
        return (P2(s) - 2.0 * r1 * Q1(s) - r * Q2(s)) / q

    return ControlFunction(lambda s: P(s) / Q(s), d1, d2, name=name)


NAMED = {"square": square, "cubic_over_1ps": cubic_over_1ps, "exp": exponential}


def from_config(cfg) -> ControlFunction:
    if isinstance(cfg, str):
        if cfg not in NAMED:
            raise ParameterError(f"unknown control function {cfg!r}")
        return NAMED[cfg]()
    if isinstance(cfg, dict) and "numerator" in cfg:
        return rational(cfg["numerator"], cfg.get("denominator", [1.0]), name=cfg.get("name", "rational"))
    raise ParameterError(f"cannot build a control function from {cfg!r}")


def power_combination(c, m, b, k):
    """``c s^2 (s/(1+s))^m (1+b s)^-k``; in the class for ``c, b > 0``, ``m >= 0``, ``0 <= k <= 2``."""
    def value(s):
        return c * s * s * (s / (1.0 + s)) ** m * (1.0 + b * s) ** (-k)

    # logarithmic derivative l = s G'/G and its s-derivative give G'' without cancellation
    def logd(s):
        return 2.0 + m / (1.0 + s) - k * b * s / (1.0 + b * s)

    def logd_prime(s):
        return -m / (1.0 + s) ** 2 - k * b / (1.0 + b * s) ** 2

    def d1(s):
        return value(s) * logd(s) / s

    def d2(s):
        l = logd(s)
        return value(s) * (l * (l - 1.0) + s * logd_prime(s)) / (s * s)

    return ControlFunction(value, d1, d2, name=f"pc({c:.3g},{m:.3g},{b:.3g},{k:.3g})")


# ---------------------------------------------------------------- functionals

def _positive_values(G, s):
    with np.errstate(all="ignore"):
        g = np.asarray(G.value(s), dtype=float)
    if np.any(g <= 0):
        raise DomainError(f"{G.name} is not positive on the probe grid")
    return g


def polyd_terms(G: ControlFunction, s=None):
    s = G.probe if s is None else np.asarray(s, dtype=float)
    g = _positive_values(G, s)
    with np.errstate(all="ignore"):
        return 1.0 + s * np.abs(G.d1(s)) / g + (s * s) * np.abs(G.d2(s)) / g


def saturated_sup(values, per_decade=64, rtol=1e-3):
    """Supremum over a log grid, or ``inf`` if it is still growing at either end.

    The outermost decade at each end is compared with the decade next to it;
    growth beyond ``rtol`` there is taken as evidence of an unbounded sup.
    """
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        return np.inf
    d = per_decade
    if values.size < 3 * d:
        return float(values.max())
    for edge, inner in ((values[:d], values[d:2 * d]), (values[-d:], values[-2 * d:-d])):
        if edge.max() > inner.max() * (1.0 + rtol) and edge.max() > values[2 * d:-2 * d].max():
            return np.inf
    return float(values.max())


def polyd(G: ControlFunction) -> float:
    return saturated_sup(polyd_terms(G), per_decade=_per_decade(G.probe))


def _per_decade(s):
    return max(1, int(round((s.size - 1) / (np.log10(s[-1]) - np.log10(s[0])))))


def parexp(psi_value, psi_heat_residual, psi_grad_sq):
    """``|(d_t - Delta) psi| / psi + |grad psi|^2 / psi^2`` from supplied ingredients."""
    psi = np.asarray(psi_value, dtype=float)
    if np.any(psi <= 0):
        raise DomainError("psi must be positive")
    out = np.abs(psi_heat_residual) / psi + np.asarray(psi_grad_sq) / (psi * psi)
    return float(out) if np.ndim(out) == 0 else out


def E_of(G: ControlFunction, s):
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= G.domain_floor):
        raise DomainError(f"argument below the domain floor {G.domain_floor}")
    out = G.value(s_arr) / (s_arr * s_arr)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GClassReport:
    polyd: float
    sup_G_over_s2: float
    g_norm: float
    in_class: bool
    decay_flag: bool

    def to_dict(self):
        return {k: getattr(self, k) for k in ("polyd", "sup_G_over_s2", "g_norm", "in_class", "decay_flag")}


def g_class_report(G: ControlFunction, decay_tol=1e-4) -> GClassReport:
    s = G.probe
    pd = polyd(G)
    g = _positive_values(G, s)
    with np.errstate(all="ignore"):
        ratio = g / (s * s)
    sup_ratio = saturated_sup(ratio, per_decade=_per_decade(s))
    norm = pd + sup_ratio
    # G/s^2 must fall below tolerance at the small end and keep falling toward it
    low = ratio[: 2 * _per_decade(s)]
    decay = bool(np.isfinite(low).all() and low[0] < decay_tol and np.all(np.diff(low) >= 0))
    return GClassReport(pd, sup_ratio, norm, bool(np.isfinite(norm)), decay)


def require_in_class(Gs):
    for G in Gs:
        if not g_class_report(G).in_class:
            raise ClassError(f"{G.name} is not in the admissible class")


def _ratio_and_derivs(G, s):
    g, g1, g2 = G.value(s), G.d1(s), G.d2(s)
    r = g / (s * s)
    r1 = g1 / (s * s) - 2.0 * g / s ** 3
    r2 = g2 / (s * s) - 4.0 * g1 / s ** 3 + 6.0 * g / s ** 4
    return r, r1, r2


def make_H(Gs: Sequence[ControlFunction], alpha: int, others=None) -> ControlFunction:
    """``H_a(s) = (sum_b G_b(s_b)/s_b^2) G_a(s)``.

    By default every ``s_b`` equals the argument ``s`` (diagonal form).  With
    ``others`` mapping fiber index to a fixed value, those ``s_b`` are frozen and
    only the ``alpha`` term varies with ``s`` (vector-argument form).
    """
    Gs = list(Gs)
    Ga = Gs[alpha]
    frozen = dict(others or {})

    def parts(s):
        s = np.asarray(s, dtype=float)
        S = np.zeros_like(s)
        S1 = np.zeros_like(s)
        S2 = np.zeros_like(s)
        for b, Gb in enumerate(Gs):
            if b != alpha and b in frozen:
                sb = float(frozen[b])
                S = S + Gb.value(sb) / (sb * sb)
            else:
                r, r1, r2 = _ratio_and_derivs(Gb, s)
                S, S1, S2 = S + r, S1 + r1, S2 + r2
        return S, S1, S2

    def value(s):
        S, _, _ = parts(s)
        return S * Ga.value(s)

    def d1(s):
        S, S1, _ = parts(s)
        return S1 * Ga.value(s) + S * Ga.d1(s)

    def d2(s):
        S, S1, S2 = parts(s)
        return S2 * Ga.value(s) + 2.0 * S1 * Ga.d1(s) + S * Ga.d2(s)

    return ControlFunction(value, d1, d2, name=f"H{alpha}[{','.join(G.name for G in Gs)}]")


def H_values(Gs: Sequence[ControlFunction], alpha: int, v):
    """``H_a`` evaluated along a flow, with each ``s_b = v_b`` (``v`` has shape ``(A, N)``)."""
    v = np.asarray(v, dtype=float)
    S = sum(G.value(v[b]) / (v[b] * v[b]) for b, G in enumerate(Gs))
    return S * Gs[alpha].value(v[alpha])


# ---------------------------------------------------------------- compositions

def product(G1: ControlFunction, G2: ControlFunction) -> ControlFunction:
    return ControlFunction(
        lambda s: G1.value(s) * G2.value(s),
        lambda s: G1.d1(s) * G2.value(s) + G1.value(s) * G2.d1(s),
        lambda s: G1.d2(s) * G2.value(s) + 2.0 * G1.d1(s) * G2.d1(s) + G1.value(s) * G2.d2(s),
        name=f"({G1.name}*{G2.name})")


def total(G1: ControlFunction, G2: ControlFunction) -> ControlFunction:
    return ControlFunction(
        lambda s: G1.value(s) + G2.value(s),
        lambda s: G1.d1(s) + G2.d1(s),
        lambda s: G1.d2(s) + G2.d2(s),
        name=f"({G1.name}+{G2.name})")


def compose(G1: ControlFunction, G2: ControlFunction) -> ControlFunction:
    """``G1 o G2``."""
    return ControlFunction(
        lambda s: G1.value(G2.value(s)),
        lambda s: G1.d1(G2.value(s)) * G2.d1(s),
        lambda s: G1.d2(G2.value(s)) * G2.d1(s) ** 2 + G1.d1(G2.value(s)) * G2.d2(s),
        name=f"{G1.name}o{G2.name}")


def parexp_of_composition(G: ControlFunction, psi, heat, grad_sq):
    """``parexp(G o psi)`` from the ingredients of ``psi`` by the chain rule."""
    g = G.value(psi)
    heat_c = G.d1(psi) * heat - G.d2(psi) * grad_sq
    grad_c = G.d1(psi) ** 2 * grad_sq
    return parexp(g, heat_c, grad_c)


def parexp_of_product(p1, h1, g1, p2, h2, g2, cross):
    """``parexp(psi1 psi2)``; ``cross`` is ``<grad psi1, grad psi2>``."""
    return parexp(p1 * p2, p2 * h1 + p1 * h2 - 2.0 * cross, p2 * p2 * g1 + p1 * p1 * g2 + 2.0 * p1 * p2 * cross)


def parexp_of_sum(p1, h1, g1, p2, h2, g2, cross):
    return parexp(p1 + p2, h1 + h2, g1 + g2 + 2.0 * cross)
