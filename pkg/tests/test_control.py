import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calculus import random_member, trial
from warpflow import control as C
from warpflow.errors import ClassError, DomainError, ParameterError


def test_constant_has_polyd_one():
    G = C.ControlFunction(lambda s: 0 * s + 3.0, lambda s: 0 * s, lambda s: 0 * s, name="const")
    assert C.polyd(G) == 1.0


def test_square_is_exact():
    rep = C.g_class_report(C.square())
    assert rep.polyd == 5.0
    assert rep.g_norm == 6.0
    assert rep.sup_G_over_s2 == 1.0
    assert rep.in_class and not rep.decay_flag


def test_cubic_over_one_plus_s():
    rep = C.g_class_report(C.cubic_over_1ps())
    # closed form 10 - 7q + 2q^2 with q = s/(1+s); the sup is approached as s -> 0
    assert rep.polyd == pytest.approx(10.0, abs=1e-6)
    assert rep.polyd < 10.0
    assert rep.sup_G_over_s2 == pytest.approx(1.0, abs=1e-7)
    assert rep.decay_flag and rep.in_class


def test_cubic_polyd_closed_form_on_grid():
    s = np.logspace(-3, 3, 50)
    q = s / (1 + s)
    np.testing.assert_allclose(C.polyd_terms(C.cubic_over_1ps(), s), 10 - 7 * q + 2 * q * q, rtol=1e-12)


def test_exponential_not_in_class():
    rep = C.g_class_report(C.exponential())
    assert not rep.in_class
    with pytest.raises(ClassError):
        C.require_in_class([C.exponential()])


@pytest.mark.parametrize("G", [C.square(), C.cubic_over_1ps(), C.rational([0, 0, 1, 2], [1, 1]),
                               C.power_combination(1.0, 1.5, 0.5, 1.0)])
def test_analytic_derivatives_match_differences(G):
    assert G.check_derivatives()


def test_H_single_fiber():
    s = np.logspace(-2, 2, 9)
    np.testing.assert_allclose(C.make_H([C.square()], 0).value(s), s * s, rtol=1e-14)
    np.testing.assert_allclose(C.make_H([C.cubic_over_1ps()], 0).value(s), s ** 4 / (1 + s) ** 2, rtol=1e-13)


def test_H_two_identical_fibers_doubles():
    G = C.cubic_over_1ps()
    s = np.logspace(-2, 2, 9)
    np.testing.assert_allclose(C.make_H([G, G], 1).value(s), 2 * G.value(s) / s ** 2 * G.value(s), rtol=1e-14)


def test_H_vector_form_freezes_other_arguments():
    G = C.cubic_over_1ps()
    H = C.make_H([G, G], 0, others={1: 0.5})
    s = np.array([0.1, 1.0, 3.0])
    np.testing.assert_allclose(H.value(s), (G.value(s) / s ** 2 + G.value(0.5) / 0.25) * G.value(s))
    assert H.check_derivatives()


@pytest.mark.parametrize("G, s, expected", [(C.square(), 7.0, 1.0), (C.cubic_over_1ps(), 1.0, 0.5)])
def test_E_values(G, s, expected):
    assert C.E_of(G, s) == pytest.approx(expected, rel=1e-15)


def test_E_below_floor():
    with pytest.raises(DomainError):
        C.E_of(C.square(), 0.0)


def test_E_bounded_by_norm():
    G = C.cubic_over_1ps()
    assert np.all(C.E_of(G, G.probe) <= C.g_class_report(G).g_norm)


def test_parexp_examples():
    x = np.linspace(-1, 1, 11)
    assert np.all(C.parexp(np.full_like(x, 2.0), 0 * x, 0 * x) == 0)
    # psi = e^x on a static flat base: (d_t - Delta) psi = -e^x and |grad psi|^2 = e^2x
    psi = np.exp(x)
    np.testing.assert_allclose(C.parexp(psi, -psi, psi * psi), 2.0, rtol=1e-15)
    with pytest.raises(DomainError):
        C.parexp(np.zeros(2), np.zeros(2), np.zeros(2))


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(0.1, 10), st.floats(-10, 10), st.floats(0, 10))
def test_parexp_scale_invariant(c, psi, heat, grad):
    base = C.parexp(psi, heat * psi, grad * psi * psi)
    assert C.parexp(c * psi, c * heat * psi, c * c * grad * psi * psi) == pytest.approx(base, rel=1e-12)


def test_from_config():
    assert C.from_config("square").name == C.square().name
    assert C.from_config({"numerator": [0, 0, 1]}).value(3.0) == 9.0
    with pytest.raises(ParameterError):
        C.from_config("nope")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_polyd_calculus_inequalities_hold(seed):
    res = trial(np.random.default_rng(seed))
    for name in ("polyd_sum", "polyd_product", "polyd_composition", "parexp_composition", "parexp_sum"):
        assert res[name][2], (name, res[name])


def test_parexp_product_sharp_constant_is_three():
    # aligned gradients, no heat term: 6a against 2a
    a = 0.7
    lhs = C.parexp_of_product(1.0, 0.0, a, 1.0, 0.0, a, a)
    assert lhs == pytest.approx(6 * a)
    assert lhs > C.parexp(1.0, 0.0, a) + C.parexp(1.0, 0.0, a)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 100), st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 100), st.floats(-5, 5),
       st.floats(-5, 5))
def test_parexp_product_within_three(p1, h1, d1, p2, h2, d2):
    lhs = C.parexp_of_product(p1, h1 * p1, (d1 * p1) ** 2, p2, h2 * p2, (d2 * p2) ** 2, d1 * p1 * d2 * p2)
    rhs = C.parexp(p1, h1 * p1, (d1 * p1) ** 2) + C.parexp(p2, h2 * p2, (d2 * p2) ** 2)
    assert lhs <= 3 * rhs * (1 + 1e-12) + 1e-300


def test_random_member_in_class():
    rng = np.random.default_rng(3)
    for _ in range(5):
        assert C.g_class_report(random_member(rng)).in_class
