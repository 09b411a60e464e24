import numpy as np
import pytest

from warpflow import soliton as S
from warpflow.errors import DomainError, ParameterError

Y = np.linspace(-3, 3, 61)


@pytest.mark.parametrize("p1", [2, 3, 4])
@pytest.mark.parametrize("p2", [2, 3, 4])
@pytest.mark.parametrize("lam", [-2.0, -1.0, -0.5])
def test_constant_solution_residual(p1, p2, lam):
    sol = S.constant_solution(p1, p2, lam, Y)
    assert S.max_residual(sol) <= 1e-12


def test_unit_constant_solution():
    sol = S.constant_solution(2, 2, -1.0, Y)
    np.testing.assert_array_equal(sol.phi1, 1.0)
    np.testing.assert_array_equal(sol.f, Y)
    assert S.ode_residual(sol, 30) == (0.0, 0.0, 0.0)


def test_perturbation_sign_matches_linearization():
    sol = S.constant_solution(2, 2, -1.0, Y)
    sol.phi1 = sol.phi1 * 1.1
    r_f, r_1, r_2 = S.ode_residual(sol, 30)
    # d r_1 / d phi1 at the fixed point is 2 (p1 - 1) / phi1^3 = 2
    assert r_1 > 0 and r_1 == pytest.approx(0.1 * 2, rel=0.2)
    assert r_2 == 0.0


def test_fixed_point_stays_put():
    # the fixed point is unstable, so rounding in sqrt(2) grows slowly over long spans
    sol = S.integrate_ivp(3, 3, -1.0, 0.0, [0.0, np.sqrt(2), 0.0, np.sqrt(2), 0.0], 3.0, dy=1e-2)
    assert S.departure(sol) <= 1e-13 and not sol.stopped_early


def test_perturbed_start_departs():
    c = 1.0
    sol = S.integrate_ivp(2, 2, -1.0, 0.0, [0.0, c * (1 + 1e-3), 0.0, c, 0.0], 3.0, dy=1e-3)
    assert S.departure(sol) > 5 * 1e-3


def test_step_halving_convergence():
    res = []
    for dy in (0.02, 0.01):
        sol = S.integrate_ivp(2, 2, -1.0, 0.0, [0.0, 1.01, 0.0, 1.0, 0.0], 2.0, dy=dy)
        res.append(S.max_residual(S.differenced(sol)))
    assert 3.5 <= res[0] / res[1] <= 4.5


@pytest.mark.parametrize("u1, u2, p, expected", [(0.5, 0.5, 2, True), (1.5, 1.0, 2, False), (1.005, 1.0, 2, True)])
def test_classify(u1, u2, p, expected):
    assert S.classify_blowup_limit(u1, u2, p, p, 0.02) is expected


def test_classify_needs_equal_dimensions():
    assert not S.classify_blowup_limit(1.0, 1.0, 2, 3)


def test_invalid_inputs():
    with pytest.raises(ParameterError):
        S.constant_solution(2, 2, 1.0, Y)
    with pytest.raises(DomainError):
        S.integrate_ivp(2, 2, -1.0, 0.0, [0.0, -1.0, 0.0, 1.0, 0.0], 1.0)
