"""A decaying perturbation of the shrinking cylinder stays proportional to itself."""
import numpy as np

from warpflow import verify as V
from warpflow.assumptions import GridSpec, build_perturbed_cylinder
from warpflow.flow import IntegratorConfig, run

for n in (1024, 2048):
    _, state, _ = build_perturbed_cylinder(0.1, 2, GridSpec(200.0, n, 5.0))
    traj, report = run(state, IntegratorConfig())
    st = V.verify_cylinder_stability(traj)
    print(f"N={n}: sup_t |u - (a - t)| / delta in [{np.nanmin(st['ratio']):.4f}, {np.nanmax(st['ratio']):.4f}], "
          f"tail [{st['tail_ratio_min']:.4f}, {st['tail_ratio_max']:.4f}], fitted C {st['C_fit']:.4f}")
