"""The constant solution of the soliton ODE and what happens to nearby starts."""
import numpy as np

from warpflow import soliton as S

y = np.linspace(-3, 3, 61)
for p, lam in [(2, -1.0), (3, -0.5), (4, -2.0)]:
    sol = S.constant_solution(p, p, lam, y)
    print(f"p={p} lambda={lam}: phi = {sol.phi1[0]:.4f}, residual {S.max_residual(sol):.1e}")
for eps in (1e-3, 1e-2):
    sol = S.integrate_ivp(2, 2, -1.0, 0.0, [0.0, 1 + eps, 0.0, 1.0, 0.0], 2.0)
    print(f"start phi1 = 1 + {eps:g}: departure {S.departure(sol):.4f} after y = 2")
for dy in (0.02, 0.01, 0.005):
    sol = S.integrate_ivp(2, 2, -1.0, 0.0, [0.0, 1.01, 0.0, 1.0, 0.0], 2.0, dy=dy)
    print(f"dy={dy}: differenced residual {S.max_residual(S.differenced(sol)):.2e}")
