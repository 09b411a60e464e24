"""Two blowup sequences on the same flow give different limits.

Following the point where the inner perturbation equals (T - t) gives fiber ratio
(1 + 2)/(1 + 1) = 1.5, so the limit is not a soliton.  Following a fixed far point gives
ratio 1, where the soliton criterion holds.
"""
from warpflow import blowup as B
from warpflow.assumptions import GridSpec, build_canonical_example
from warpflow.flow import IntegratorConfig, run

eta = 2.0
_, state, _ = build_canonical_example(eta, 0.1, 2, GridSpec(200.0, 2048, 5.0))
traj, report = run(state, IntegratorConfig())
for mode in ("non_soliton", "soliton_seeking"):
    seq = B.build_sequence(traj, mode, report.t_sing_est)
    print(mode)
    for t, r in zip(seq.times, B.ratio_series(seq, traj)):
        print(f"  t = {t:.5f}   u1/u2 = {r:.4f}")
    crit, one = B.soliton_criterion(seq, traj)
    print(f"  ratio limit {B.limit_ratio(seq, traj):.4f}, soliton criterion {crit:.4f} ({'soliton' if one else 'not a soliton'})")
print("closed form for c2 = 1:", B.closed_form_ratio(eta, 1.0))
