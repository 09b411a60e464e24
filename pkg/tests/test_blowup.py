import numpy as np
import pytest

from runs import canonical, cylinder
from warpflow import blowup as B
from warpflow.errors import FeasibilityError, InconclusiveError, ParameterError, TruncationError


@pytest.fixture(scope="module")
def run2048():
    _, _, _, traj, rep, _ = canonical(2048)
    return traj, rep


@pytest.fixture(scope="module")
def sequences(run2048):
    traj, rep = run2048
    return {m: B.build_sequence(traj, m, rep.t_sing_est) for m in ("non_soliton", "soliton_seeking")}


@pytest.mark.parametrize("eta, c2, expected", [(2.0, 1.0, 1.5), (2.0, 0.0, 1.0), (1.0, 0.3, 1.0), (1.0, 7.0, 1.0)])
def test_closed_form_ratio(eta, c2, expected):
    assert B.closed_form_ratio(eta, c2) == pytest.approx(expected)


def test_non_soliton_hits_target_constants(sequences):
    seq = sequences["non_soliton"]
    c = np.array(seq.achieved_c)
    assert np.all(np.abs(c[:, 1] - 1.0) < 0.05)
    np.testing.assert_allclose(c[:, 0], 2.0, rtol=1e-6)


def test_soliton_seeking_constants_small(sequences):
    assert max(sequences["soliton_seeking"].achieved_c[-1]) < 0.01


@pytest.mark.parametrize("mode", ["non_soliton", "soliton_seeking"])
def test_sequences_are_essential(sequences, mode):
    seq = sequences[mode]
    assert seq.essential and min(seq.certificate) > 0.1
    assert seq.limsup_scale_gap == pytest.approx(1.0)


def test_ratio_limits(run2048, sequences):
    traj, _ = run2048
    assert B.limit_ratio(sequences["non_soliton"], traj) == pytest.approx(1.5, rel=0.05)
    assert B.limit_ratio(sequences["soliton_seeking"], traj) == pytest.approx(1.0, abs=0.02)


def test_soliton_criterion(run2048, sequences):
    traj, _ = run2048
    lim, one = B.soliton_criterion(sequences["soliton_seeking"], traj)
    assert one and lim == pytest.approx(1.0, abs=0.02)
    lim, one = B.soliton_criterion(sequences["non_soliton"], traj)
    assert not one and lim <= 0.6


def test_rescaled_oscillation_small_and_shrinking(run2048, sequences):
    traj, _ = run2048
    seq = sequences["non_soliton"]
    n = len(seq.points)
    osc = [B.rescale(seq, traj, j).oscillation().max() for j in range(n - 3, n)]
    assert osc[-1] < 0.05
    assert osc[0] > osc[1] > osc[2]


def test_rescale_time_and_scale(run2048, sequences):
    traj, rep = run2048
    seq = sequences["soliton_seeking"]
    r = B.rescale(seq, traj, 0)
    assert r.tau == pytest.approx(-1.0)
    assert r.u_rescaled.shape == (2, 201)


def test_rescale_truncation(run2048, sequences):
    traj, _ = run2048
    with pytest.raises(TruncationError):
        B.rescale(sequences["soliton_seeking"], traj, 0, window=1e4)


def test_inconclusive_with_two_points(run2048):
    traj, rep = run2048
    seq = B.build_sequence(traj, "non_soliton", rep.t_sing_est, gaps=(1e-2, 5e-3))
    with pytest.raises(InconclusiveError):
        B.limit_ratio(seq, traj)


def test_infeasible_target(run2048):
    traj, rep = run2048
    with pytest.raises(FeasibilityError):
        B.build_sequence(traj, "non_soliton", rep.t_sing_est, c2=1e-3)


def test_unknown_mode(run2048):
    with pytest.raises(ParameterError):
        B.build_sequence(run2048[0], "sideways", 0.1)


def test_cylinder_ratio_and_rescaling_trivial():
    _, _, _, traj, rep = cylinder(None)
    seq = B.build_sequence(traj, "soliton_seeking", rep.t_sing_est, gaps=(0.05, 0.02, 0.01), fiber_pair=(0, 0))
    assert np.all(B.ratio_series(seq, traj, (0, 0)) == 1.0)
    r = B.rescale(seq, traj, 2, window=2.0)
    assert np.ptp(r.u_rescaled) <= 1e-12 * r.u_rescaled.max()
