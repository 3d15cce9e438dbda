"""Solve the averaged LP for the built-in example and inspect the result.

The built-in "gr-example" problem is a 2-fast / 2-slow system whose optimal
long-run behaviour is a fast oscillation riding on a slow limit cycle.  The
averaged occupational-measure LP discovers this: its solution is a discrete
measure supported on ~18 slow points tracing the cycle, with a fast
measure (a few (u, y) atoms) attached to each.

Run:  python3 demos/02_averaged_solve.py        (~10 s)
"""

import time

import numpy as np

import spavglp as sp

problem = sp.get_problem("gr-example")
grids = sp.GridSpec(7, 9, 13)                 # u 7^2, y 9^2, z 13^2
basis_y = sp.make_basis(2, 5)                 # degree-5 test functions
basis_z = sp.make_basis(2, 5)

t0 = time.time()
sol = sp.solve_averaged(problem, grids, basis_y, basis_z)
print(f"outer value : {sol.outer_value:.6f}   ({time.time() - t0:.1f} s)")

print(f"slow support: {len(sol.z_groups)} points")
for z, w, inner in sorted(sol.z_groups, key=lambda g: -g[1])[:6]:
    print(f"   z = ({z[0]:+.3f}, {z[1]:+.3f})   weight {w:.4f}   "
          f"{len(inner.points)} fast atoms")

res = sp.verify_solution(problem, grids, basis_y, basis_z, sol)
print("certificate residuals:")
print(f"   dual feasibility  >= {res['min_dual_feasibility']:.2e}")
print(f"   support residual  <= {res['max_abs_support_residual']:.2e}")

# the dual certificate yields a feedback law in closed form
law = sp.FeedbackLaw(sol.certificate, problem)
z = np.asarray(sol.z_groups[0][0])
y = np.array([0.3, -0.4])
print(f"feedback at y={y}, z={z}: u = {law.feedback(y, z)}")
