import numpy as np
import pytest

from runs import canonical, perturbed_cylinder
from warpflow import diagnostics as D
from warpflow.assumptions import GridSpec, build_cylinder, build_perturbed_cylinder
from warpflow.errors import AlignmentError
from warpflow.flow import IntegratorConfig, probe_window
from warpflow.geometry import FiberSpec, FlowState, WarpedProductSpec, riemann_sup_norm


def single(x, v, a=1.0):
    return FlowState(WarpedProductSpec((FiberSpec(2, 1.0, a),)), 0.0, x, np.ones_like(x), np.atleast_2d(v))


def test_cylinder_frame_is_zero():
    _, state, Gs = build_cylinder(eps=0.2)
    d = D.compute_frame(state, Gs)
    inner = slice(1, -1)
    assert np.all(d.gamma[:, inner] == 0) and np.all(d.chi[:, inner] == 0) and np.all(d.L[inner] == 0)
    assert np.all(d.rho == 0)


def test_linear_and_quadratic_perturbations():
    eps = 1e-2
    x = np.linspace(-0.1, 0.1, 21)
    d = D.compute_frame(single(x, eps * x))
    assert d.gamma[0, 10] == pytest.approx(eps ** 2, rel=1e-12)
    assert d.chi[0, 10] == pytest.approx(0.0, abs=1e-20)
    d = D.compute_frame(single(x, eps * x * x / 2))
    assert d.gamma[0, 10] == pytest.approx(0.0, abs=1e-20)
    assert d.chi[0, 10] == pytest.approx(eps ** 2, rel=1e-9)


def test_rm_sup_matches_geometry():
    state = canonical(1025)[1]
    assert D.compute_frame(state).rm_sup == riemann_sup_norm(state)


def test_heat_residual_examples():
    x = np.linspace(-1, 1, 21)
    s = single(x, np.full_like(x, 0.1))
    f = 3 * x + 1
    r = D.heat_residual(f, f, f, s, [0.0, 0.1, 0.2])
    np.testing.assert_allclose(r[1:-1], 0.0, atol=1e-12)
    r = D.heat_residual(0 * x, 0 * x + 0.1, 0 * x + 0.2, s, [0.0, 0.1, 0.2])
    np.testing.assert_allclose(r[1:-1], 1.0, rtol=1e-12)


def test_heat_residual_alignment_errors():
    x = np.linspace(-1, 1, 21)
    s = single(x, np.full_like(x, 0.1))
    with pytest.raises(AlignmentError):
        D.heat_residual(x, x, x, s, [0.0, 0.1, 0.3])
    with pytest.raises(AlignmentError):
        D.heat_residual(x, x[:-1], x, s, [0.0, 0.1, 0.2])


def test_flow_satisfies_its_own_equation():
    frames = probe_window(canonical(1025)[1], IntegratorConfig(), 1e-7)
    mid = frames[1]
    r = D.heat_residual(frames[0].v, mid.v, frames[2].v, mid, [f.t for f in frames])
    vs = D.arclength_fields(mid, mid.v)[0]
    err = D._trim(np.abs(r + vs * vs / mid.u), 4)
    assert np.nanmax(err) < 1e-4 * np.nanmax(vs * vs / mid.u)


def test_cylinder_identity_residual_zero():
    _, state, _ = build_cylinder(eps=0.1)
    rep = D.check_gamma_identity(probe_window(state, IntegratorConfig(), 1e-4))
    assert rep.identity_gamma_residual == 0.0


def test_identity_residual_second_order_on_perturbed_cylinder():
    res = []
    for n in (1025, 2049):
        _, state, _ = build_perturbed_cylinder(0.1, grid=GridSpec(200.0, n, 5.0))
        res.append(D.check_gamma_identity(probe_window(state, IntegratorConfig(), 1e-7)))
    assert 3.5 <= res[0].identity_gamma_residual / res[1].identity_gamma_residual <= 4.5
    assert 3.0 <= res[0].gradient_identity_residual / res[1].gradient_identity_residual <= 5.0


def test_cylinder_inequality_margins_vacuous():
    _, state, _ = build_cylinder(eps=0.1)
    rep = D.check_evolution_inequalities(probe_window(state, IntegratorConfig(), 1e-4))
    assert rep.ineq_gamma_margin == 0.0 and rep.fitted_C_chi == 0.0 and rep.rho_zero


@pytest.fixture(scope="module")
def canonical_reports():
    out = {}
    for n in (1025, 2049):
        traj = canonical(n)[3]
        out[n] = [D.check_evolution_inequalities(w) for w in D.sample_windows(traj, [0.0, 0.5], 1e-7)]
    return out


def test_gamma_inequality_with_quarter_gradient_holds(canonical_reports):
    for reps in canonical_reports.values():
        for r in reps:
            assert r.gamma_margin_quarter >= -10 * r.identity_gamma_residual


def test_gamma_inequality_with_half_gradient_is_violated(canonical_reports):
    # the stated coefficient -1/2 on |grad gamma|^2/gamma is too strong; the violation is O(1) and
    # does not shrink with the grid
    coarse, fine = canonical_reports[1025][0], canonical_reports[2049][0]
    assert fine.ineq_gamma_margin < -1.0
    assert fine.ineq_gamma_margin == pytest.approx(coarse.ineq_gamma_margin, rel=0.05)


def test_fitted_chi_constant_stable(canonical_reports):
    for k in range(2):
        a, b = canonical_reports[1025][k].fitted_C_chi, canonical_reports[2049][k].fitted_C_chi
        assert 0 < a and abs(a - b) / max(a, b) < 0.2
        assert canonical_reports[2049][k].ineq_chi_margin >= -1e-12


def test_rho_identically_zero(canonical_reports):
    assert all(r.rho_zero and r.ineq_rho_margin == 0 for reps in canonical_reports.values() for r in reps)


@pytest.mark.slow
def test_hessian_constant_converges():
    vals = []
    from warpflow.assumptions import build_canonical_example
    for n in (8193, 16385):
        _, state, _ = build_canonical_example(2.0, 0.1, 2, GridSpec(200.0, n, 5.0))
        vals.append(D.check_evolution_inequalities(probe_window(state, IntegratorConfig(), 1e-7)).fitted_C_hessian)
    assert vals[1] > 0 and abs(vals[0] - vals[1]) / vals[1] < 0.2


def test_csv_deterministic(tmp_path):
    traj, report = perturbed_cylinder(1025)[3:5]
    rows = D.diagnostics_rows(traj, report.t_sing_est)
    D.write_csv(rows, tmp_path / "a.csv")
    D.write_csv(D.diagnostics_rows(traj, report.t_sing_est), tmp_path / "b.csv")
    text = (tmp_path / "a.csv").read_text()
    assert text == (tmp_path / "b.csv").read_text()
    assert text.splitlines()[0] == ",".join(D.CSV_FIELDS)
    assert len(text.splitlines()) == len(traj.frames) + 1
