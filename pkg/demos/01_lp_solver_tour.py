"""Tour of the bundled LP solver.

The library ships its own dense revised simplex (two-phase, Devex pricing,
lexicographic anti-cycling) because the averaged-control LPs it solves are
small but heavily degenerate.  This demo solves a tiny transportation-style
LP three ways — our simplex, brute-force vertex enumeration, and a dual
check — and prints the matching answers.

Run:  python3 demos/01_lp_solver_tour.py
"""

import itertools

import numpy as np

import spavglp as sp

# min c'x  s.t.  A x = b, x >= 0  — 3 supply/demand balances, 6 routes
A = np.array([
    [1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
    [1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
])
b = np.array([3.0, 2.0, 1.5])
c = np.array([4.0, 2.0, 5.0, 1.0, 3.0, 2.5])

lp = sp.LinearProgram(A.shape[0], A.shape[1], b, dense=A, costs=c)
sol = sp.solve(lp)
print("status      :", sol.status.name)
print("objective   :", sol.objective)
print("basic cols  :", sol.basic_cols)
print("duals       :", np.round(sol.duals, 6))

# brute force: enumerate all 3x3 basis candidates
best = np.inf
for cols in itertools.combinations(range(6), 3):
    B = A[:, cols]
    if abs(np.linalg.det(B)) < 1e-12:
        continue
    x = np.linalg.solve(B, b)
    if x.min() >= -1e-12:
        best = min(best, float(c[list(cols)] @ x))
print("enumeration :", best)
assert abs(best - sol.objective) < 1e-9

# dual (KKT) check: reduced costs nonnegative, complementary slackness
r = c - sol.duals @ A
print("min reduced cost:", r.min())
assert r.min() > -1e-9
for j, x in sol.basic_cols:
    assert abs(r[j]) < 1e-9 or x < 1e-9
print("KKT conditions hold.")
