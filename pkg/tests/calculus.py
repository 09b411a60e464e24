"""Randomized trials of the calculus inequalities for polyd and parexp."""
from __future__ import annotations

import numpy as np

from warpflow.control import (compose, parexp, parexp_of_composition, parexp_of_product, parexp_of_sum, polyd,
                              power_combination, product, total)

NAMES = ("polyd_sum", "polyd_product", "polyd_composition", "parexp_composition", "parexp_product", "parexp_sum")


def random_member(rng):
    """A random in-class control function ``c s^2 (s/(1+s))^m (1+bs)^-k``."""
    return power_combination(rng.uniform(0.1, 3.0), rng.uniform(0.0, 3.0), rng.uniform(0.1, 3.0),
                             rng.uniform(0.0, 2.0))


def random_ingredients(rng, n=256):
    """Pointwise ``(psi, (d_t - Delta) psi, psi_s)`` samples of a positive function on a 1-D base."""
    psi = np.exp(rng.uniform(-3, 3, n))
    heat = psi * rng.normal(0, 1, n)
    grad = psi * rng.normal(0, 1, n)
    return psi, heat, grad


def trial(rng, slack=1e-9):
    """Evaluate all six inequalities once; returns ``{name: (lhs, rhs, holds)}``."""
    G1, G2 = random_member(rng), random_member(rng)
    p1, p2 = polyd(G1), polyd(G2)
    out = {"polyd_sum": (polyd(total(G1, G2)), p1 + p2),
           "polyd_product": (polyd(product(G1, G2)), p1 * p2),
           "polyd_composition": (polyd(compose(G1, G2)), p1 * p2 ** 2)}
    a, ha, ga = random_ingredients(rng)
    b, hb, gb = random_ingredients(rng)
    Pa = np.max(parexp(a, ha, ga * ga))
    Pb = np.max(parexp(b, hb, gb * gb))
    # on a one-dimensional base <grad psi1, grad psi2> = psi1_s psi2_s
    cross = ga * gb
    out["parexp_composition"] = (np.max(parexp_of_composition(G1, a, ha, ga * ga)), p1 ** 2 * Pa)
    out["parexp_product"] = (np.max(parexp_of_product(a, ha, ga * ga, b, hb, gb * gb, cross)), Pa + Pb)
    out["parexp_sum"] = (np.max(parexp_of_sum(a, ha, ga * ga, b, hb, gb * gb, cross)), 2 * (Pa + Pb))
    return {k: (float(l), float(r), bool(l <= r * (1 + slack))) for k, (l, r) in out.items()}


def run_trials(count=100, seed=0):
    rng = np.random.default_rng(seed)
    results = {k: [] for k in NAMES}
    for _ in range(count):
        for k, v in trial(rng).items():
            results[k].append(v)
    return results
