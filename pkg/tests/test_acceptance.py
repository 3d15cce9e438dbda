"""Acceptance suite: eight end-to-end criteria on the built-in example.

Each test emits one ``ACCEPTANCE CRITERION n: PASS/FAIL`` line (collected in
the terminal summary).  Heavy artifacts (solves, long simulations) are
session fixtures shared across criteria; see conftest.py.
"""

import itertools
import math

import numpy as np
import pytest

import spavglp as sp
from spavglp.sim import _rk4

from conftest import record_criterion

TARGET_Z = np.array([1.07, -0.87])


def _avg_between(traj, t0, t1):
    mask = (traj.times >= t0 - 1e-12) & (traj.times <= t1 + 1e-12)
    t = traj.times[mask]
    return float(np.trapezoid(traj.cost[mask], t) / (t[-1] - t[0]))


# -- 1: outer LP value, degree monotonicity, runtime ------------------------

def test_criterion_1_outer_value(deg5_solution, deg7_solution, solve_times):
    v5, v7 = deg5_solution.outer_value, deg7_solution.outer_value
    in_range = -1.30 <= v5 <= -1.10
    monotone = v7 >= v5 - 0.05
    fast = solve_times[5] <= 600.0 and solve_times[7] <= 600.0
    record_criterion(
        1, in_range and monotone and fast,
        f"degree-5 value {v5:.4f} in [-1.30, -1.10]: {in_range}; "
        f"degree-7 value {v7:.4f} >= {v5:.4f} - 0.05: {monotone}; "
        f"solve times {solve_times[5]:.0f}s / {solve_times[7]:.0f}s <= 600s: {fast}")


# -- 2: SP long-run average and epsilon-consistency -------------------------

def test_criterion_2_sp_average(sp_runs):
    run01 = sp_runs(0.01, 100.0)
    avg01 = sp.long_run_average(run01, warmup=20.0)
    in_range = -1.23 <= avg01 <= -1.13
    run001 = sp_runs(0.001, 20.0)
    a = _avg_between(run001, 4.0, 20.0)
    b = _avg_between(run01, 4.0, 20.0)
    agree = abs(a - b) <= 0.02
    record_criterion(
        2, in_range and agree,
        f"eps=0.01 average {avg01:.4f} in [-1.23, -1.13]: {in_range}; "
        f"eps=0.001 vs 0.01 over [4, 20]: {a:.4f} vs {b:.4f} "
        f"(diff {abs(a - b):.4f} <= 0.02): {agree}")


# -- 3: period of the averaged slow cycle -----------------------------------

def test_criterion_3_period(averaged_traj):
    period = sp.estimate_period(averaged_traj)
    in_range = 3.01 <= period <= 3.31

    # anchor: uncontrolled slow subsystem z'' + 0.3 z' + 4 z = 0 has
    # damped period 2*pi/sqrt(4 - 0.0225) = 3.1504; the upward-crossing
    # estimator on the decaying signal lands within 0.01 of pi
    def rhs(z):
        return np.array([z[1], -4.0 * z[0] - 0.3 * z[1]])

    dt, n = 0.001, 20000
    zs = np.empty((n + 1, 2))
    z = np.array([1.0, 0.0])
    for k in range(n + 1):
        zs[k] = z
        z = _rk4(rhs, z, dt)
    lin = sp.Trajectory(times=np.arange(n + 1) * dt, states=zs,
                        state_labels=["z1", "z2"], cost=np.zeros(n + 1))
    anchor = sp.estimate_period(lin)
    anchored = abs(anchor - math.pi) <= 0.01
    record_criterion(
        3, in_range and anchored,
        f"averaged z1 period {period:.4f} in [3.01, 3.31]: {in_range}; "
        f"uncontrolled anchor {anchor:.4f} within 0.01 of pi: {anchored}")


# -- 4: support geometry and associated-orbit closure -----------------------

def test_criterion_4_support_geometry(example_problem,
                                      support_geometry_solution):
    sol = support_geometry_solution
    zs = [np.asarray(z) for z, _, _ in sol.z_groups]
    dists = [float(np.linalg.norm(z - TARGET_Z)) for z in zs]
    k = int(np.argmin(dists))
    near = dists[k] <= 0.15

    law = sp.FeedbackLaw(sol.certificate, example_problem)
    traj = sp.integrate_associated(example_problem, law, zs[k],
                                   np.zeros(2), tau_max=120.0, dtau=0.01)
    inside = not traj.violations and np.all(
        np.abs(traj.states) <= 1.0 + 1e-9)
    period = sp.estimate_period(traj)
    # compare the last two full periods of the settled orbit pointwise
    steps = int(round(period / 0.01))
    a = traj.states[-steps:]
    b = traj.states[-2 * steps:-steps]
    reclose = float(np.abs(a - b).max())
    closed = reclose <= 1e-3
    record_criterion(
        4, near and inside and closed,
        f"support z {np.round(zs[k], 3)} within 0.15 of (1.07, -0.87) "
        f"(dist {dists[k]:.3f}): {near}; orbit inside Y: {inside}; "
        f"re-closure {reclose:.2e} <= 1e-3 per period (T={period:.3f}): "
        f"{closed}")


# -- 5: improvement over the reduced problem --------------------------------

def test_criterion_5_beats_steady_state(sp_runs):
    avg = sp.long_run_average(sp_runs(0.01, 100.0), warmup=20.0)
    ok = avg <= -1.0
    record_criterion(
        5, ok,
        f"sp average {avg:.4f} <= -1.0 (reduced problem's best steady "
        f"state achieves 0): {ok}")


# -- 6: LP correctness against brute-force enumeration ----------------------

def _bfs_minimum(A, b, c):
    m, n = A.shape
    best = None
    for cols in itertools.combinations(range(n), m):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-10:
            continue
        x = np.linalg.solve(B, b)
        if x.min() >= -1e-10:
            val = float(c[list(cols)] @ x)
            best = val if best is None else min(best, val)
    return best


def _kkt_gap(A, b, c, sol):
    x = np.zeros(A.shape[1])
    for j, v in sol.basic_cols:
        x[j] += v
    r = c - sol.duals @ A
    return max(
        float(np.abs(A @ x - b).max()),           # primal feasibility
        float(max(0.0, -x.min())),                # nonnegativity
        float(max(0.0, -r.min())),                # dual feasibility
        float(np.abs(x * r).max()),               # complementary slackness
        abs(float(c @ x) - float(sol.duals @ b)), # duality gap
    )


def test_criterion_6_lp_against_enumeration():
    rng = np.random.default_rng(20260823)
    checked = worst_obj = worst_kkt = 0
    attempts = 0
    while checked < 500 and attempts < 3000:
        attempts += 1
        m = int(rng.integers(1, 6))
        n = int(rng.integers(m, 9))
        A = rng.normal(size=(m, n))
        x0 = np.where(rng.random(n) < 0.5, rng.random(n), 0.0)
        b = A @ x0
        c = rng.normal(size=n)
        lp = sp.LinearProgram(m, n, b, dense=A, costs=c)
        sol = sp.solve(lp)
        if sol.status is not sp.LpStatus.OPTIMAL:
            continue      # unbounded draws carry no BFS reference value
        ref = _bfs_minimum(A, b, c)
        if ref is None:
            continue
        checked += 1
        worst_obj = max(worst_obj, abs(sol.objective - ref))
        worst_kkt = max(worst_kkt, _kkt_gap(A, b, c, sol))
    ok = checked >= 500 and worst_obj <= 1e-8 and worst_kkt <= 1e-8
    record_criterion(
        6, ok,
        f"{checked} random LPs vs enumeration: max objective error "
        f"{worst_obj:.2e} <= 1e-8, max KKT residual {worst_kkt:.2e} <= 1e-8")


# -- 7: certificate residuals and closed-form feedback ----------------------

def test_criterion_7_certificate(example_problem, deg5_solution, deg5_law):
    res = sp.verify_solution(example_problem, sp.GridSpec(7, 9, 13),
                             sp.make_basis(2, 5), sp.make_basis(2, 5),
                             deg5_solution)
    feas = res["min_dual_feasibility"] >= -1e-6
    slack = res["max_abs_support_residual"] <= 1e-6

    # the example's Hamiltonian is quadratic in u, so the synthesized
    # feedback has the closed form u = clip(-5 b) with
    # b = (d_eta/d_y1 + d_zeta/d_z2 * y2, d_eta/d_y2 - d_zeta/d_z2 * y1)
    rng = np.random.default_rng(7)
    Y = rng.uniform(-1.0, 1.0, size=(500, 2))
    Z = rng.uniform([-2.5, -4.5], [2.5, 4.5], size=(500, 2))
    cert = deg5_solution.certificate
    omegas, _ = cert.omegas_batch(Z)
    gz = cert.grad_zeta_at(Z)
    ge = cert.grad_eta_at(omegas, Y)
    b = np.stack([ge[:, 0] + gz[:, 1] * Y[:, 1],
                  ge[:, 1] - gz[:, 1] * Y[:, 0]], axis=-1)
    u_closed = np.clip(-5.0 * b, -1.0, 1.0)
    u_law = deg5_law.feedback_batch(Y, Z, check=False)
    err = float(np.abs(u_law - u_closed).max())
    match = err <= 1e-4
    record_criterion(
        7, feas and slack and match,
        f"min dual feasibility {res['min_dual_feasibility']:.2e} >= -1e-6: "
        f"{feas}; support residual {res['max_abs_support_residual']:.2e} "
        f"<= 1e-6: {slack}; feedback vs clamp(-5b) at 500 points: "
        f"max err {err:.2e} <= 1e-4: {match}")


# -- 8: averaging fidelity ---------------------------------------------------

def test_criterion_8_averaging_fidelity(example_problem, deg5_solution,
                                        deg5_law, averaged_traj, sp_runs):
    z_star = np.asarray(deg5_solution.z_groups[0][0], dtype=float)
    basis = sp.make_basis(2, 5)

    def grad_moments(tau_max):
        traj = sp.integrate_associated(example_problem, deg5_law, z_star,
                                       np.zeros(2), tau_max=tau_max,
                                       dtau=0.05)
        F = example_problem.f_batch(traj.controls, traj.states, z_star)
        grads = basis.gradients_at(traj.states)         # (count, T, dim)
        vals = np.einsum("itm,tm->it", grads, F)
        m = np.trapezoid(vals, traj.times, axis=1) / traj.times[-1]
        return float(np.abs(m).max())

    m200 = grad_moments(200.0)
    m400 = grad_moments(400.0)
    small = m200 <= 5e-3
    ratio = m400 / m200 if m200 > 0 else 0.5
    halves = 0.5 / 3.0 <= ratio <= 0.5 * 3.0

    sups = []
    for eps, T in ((0.04, 50.0), (0.01, 100.0), (0.0025, 50.0)):
        run = sp_runs(eps, T)
        mask = run.times <= 50.0 + 1e-9
        t = run.times[mask]
        z_eps = run.states[mask][:, 2:]
        z_avg = np.stack([np.interp(t, averaged_traj.times,
                                    averaged_traj.states[:, i])
                          for i in range(2)], axis=-1)
        sups.append(float(np.linalg.norm(z_eps - z_avg, axis=1).max()))
    monotone = sups[0] > sups[1] > sups[2]
    record_criterion(
        8, small and halves and monotone,
        f"max |gradient moment| {m200:.2e} <= 5e-3 at horizon 200: {small}; "
        f"horizon-doubling ratio {ratio:.2f} in [1/6, 3/2]: {halves}; "
        f"sup|z_eps - z| over eps 0.04/0.01/0.0025 = "
        f"{sups[0]:.3f}/{sups[1]:.3f}/{sups[2]:.3f} decreasing: {monotone}")
