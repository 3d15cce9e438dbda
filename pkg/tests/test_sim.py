"""Integrators and trajectory utilities: analytic oracles and invariants.

Oracles used here:
  * fast decay y' = -y + c has solution c + (y0 - c) e^{-tau}
  * a sampled sine with period P has mean upward-crossing gap P
  * for the linear toy (f = -y + u, g = y - z) with a constant control c
    the averaged slow flow is z' = c - z, so z(t) -> c exponentially
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import spavglp as sp
from spavglp.errors import (NoPeriodDetected, ScheduleExhausted,
                            ViabilityViolation)


def _relax_problem():
    """f = -y + u, g = y - z, G = (y - z)^2; everything stays in [-1, 1]."""
    return sp.ControlProblem(
        dim_u=1, dim_y=1, dim_z=1,
        f=lambda u, y, z: -y + u,
        g=lambda u, y, z: y - z,
        G=lambda u, y, z: float((y[0] - z[0]) ** 2),
        u_box=sp.Box(np.array([-1.0]), np.array([1.0])),
        y_box=sp.Box(np.array([-1.0]), np.array([1.0])),
        z_box=sp.Box(np.array([-1.0]), np.array([1.0])),
        weakly_coupled=True, vectorized=False, name="relax")


def _sine_traj(period=3.0, t_max=30.0, n=3000, decay=0.0):
    t = np.linspace(0.0, t_max, n)
    x = np.exp(-decay * t) * np.sin(2.0 * np.pi * t / period)
    return sp.Trajectory(times=t, states=x[:, None], state_labels=("z1",),
                         cost=np.zeros(n))


# ---------------------------------------------------------------------------
# prefix averages and summaries

def test_prefix_average_linear():
    t = np.linspace(0.0, 4.0, 41)
    out = sp.prefix_average(t, t)
    np.testing.assert_allclose(out[1:], t[1:] / 2.0, atol=1e-12)
    assert out[0] == 0.0


@given(st.floats(-10.0, 10.0))
@settings(max_examples=20, deadline=None)
def test_prefix_average_constant(c):
    t = np.linspace(0.0, 1.0, 17)
    np.testing.assert_allclose(sp.prefix_average(t, np.full(17, c)), c,
                               atol=1e-12)


def test_prefix_average_length_mismatch():
    with pytest.raises(ValueError):
        sp.prefix_average(np.arange(3.0), np.arange(4.0))


def test_long_run_average_constant_and_warmup():
    t = np.linspace(0.0, 10.0, 101)
    traj = sp.Trajectory(times=t, states=t[:, None], state_labels=("z1",),
                         cost=np.where(t < 5.0, 100.0, 2.0))
    assert sp.long_run_average(traj, warmup=5.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        sp.long_run_average(traj, warmup=10.0)


# ---------------------------------------------------------------------------
# trajectory serialization

def test_csv_roundtrip(tmp_path):
    t = np.linspace(0.0, 1.0, 9)
    rng = np.random.default_rng(1)
    traj = sp.Trajectory(times=t, states=rng.normal(size=(9, 2)),
                         state_labels=("y1", "y2"), cost=rng.normal(size=9),
                         controls=rng.normal(size=(9, 2)),
                         control_labels=("u1", "u2"))
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    back = sp.Trajectory.from_csv(path)
    np.testing.assert_allclose(back.times, traj.times)
    np.testing.assert_allclose(back.states, traj.states)
    np.testing.assert_allclose(back.controls, traj.controls)
    np.testing.assert_allclose(back.cost, traj.cost)
    np.testing.assert_allclose(back.running_cost_avg, traj.running_cost_avg)
    assert back.state_labels == ("y1", "y2")
    assert back.control_labels == ("u1", "u2")


def test_column_lookup():
    t = np.linspace(0.0, 1.0, 5)
    traj = sp.Trajectory(times=t, states=t[:, None], state_labels=("y1",),
                         cost=np.zeros(5), controls=2 * t[:, None],
                         control_labels=("u1",))
    np.testing.assert_array_equal(traj.column("y1"), t)
    np.testing.assert_array_equal(traj.column("u1"), 2 * t)
    with pytest.raises(KeyError):
        traj.column("nope")


# ---------------------------------------------------------------------------
# associated (fast) system

def test_associated_decay_oracle(constant_law):
    p = _relax_problem()
    c = 0.5
    traj = sp.integrate_associated(p, constant_law(np.array([c])),
                                   z=np.zeros(1), y0=np.array([-0.8]),
                                   tau_max=5.0, dtau=0.01)
    exact = c + (-0.8 - c) * np.exp(-traj.times)
    np.testing.assert_allclose(traj.states[:, 0], exact, atol=1e-9)
    np.testing.assert_allclose(traj.controls, c)


def test_associated_guards(constant_law):
    p = _relax_problem()
    law = constant_law(np.zeros(1))
    with pytest.raises(ValueError):
        sp.integrate_associated(p, law, np.zeros(1), np.zeros(1),
                                tau_max=1.0, dtau=0.1)
    with pytest.raises(ValueError):
        sp.integrate_associated(p, law, np.array([5.0]), np.zeros(1),
                                tau_max=1.0, dtau=0.01)
    with pytest.raises(ValueError):
        sp.integrate_associated(p, law, np.zeros(1), np.array([5.0]),
                                tau_max=1.0, dtau=0.01)


def test_associated_viability_violation(constant_law):
    # f = +1 everywhere pushes y straight through the upper face
    p = sp.ControlProblem(
        dim_u=1, dim_y=1, dim_z=1,
        f=lambda u, y, z: np.ones(1),
        g=lambda u, y, z: np.zeros(1),
        G=lambda u, y, z: 0.0,
        u_box=sp.Box(np.array([-1.0]), np.array([1.0])),
        y_box=sp.Box(np.array([-1.0]), np.array([1.0])),
        z_box=sp.Box(np.array([-1.0]), np.array([1.0])),
        weakly_coupled=True, vectorized=False, name="escape")
    with pytest.raises(ViabilityViolation) as exc:
        sp.integrate_associated(p, constant_law(np.zeros(1)), np.zeros(1),
                                np.zeros(1), tau_max=5.0, dtau=0.01)
    assert exc.value.exit_time == pytest.approx(1.0, abs=0.05)


# ---------------------------------------------------------------------------
# period estimation

def test_estimate_period_sine():
    assert sp.estimate_period(_sine_traj(period=3.0)) == pytest.approx(
        3.0, abs=1e-3)


def test_estimate_period_damped_sine():
    # decay barely moves the upward crossings of the centered signal
    assert sp.estimate_period(_sine_traj(period=3.1504, decay=0.05)) == \
        pytest.approx(3.1504, abs=7e-3)


def test_estimate_period_needs_crossings():
    t = np.linspace(0.0, 1.0, 50)
    traj = sp.Trajectory(times=t, states=t[:, None], state_labels=("z1",),
                         cost=np.zeros(50))
    with pytest.raises(NoPeriodDetected):
        sp.estimate_period(traj)


# ---------------------------------------------------------------------------
# occupational measures

def test_occupational_measure_moments():
    t = np.linspace(0.0, 2.0, 201)
    traj = sp.Trajectory(times=t, states=t[:, None], state_labels=("y1",),
                         cost=np.zeros(201), controls=np.ones((201, 1)),
                         control_labels=("u1",))
    est = sp.occupational_measure(
        traj, [lambda s, u: s[:, 0], lambda s, u: s[:, 0] ** 2,
               lambda s, u: u[:, 0]])
    np.testing.assert_allclose(est.moments, [1.0, 4.0 / 3.0, 1.0], atol=1e-4)
    with pytest.raises(ValueError):
        sp.occupational_measure(traj, [lambda s, u: s[:, 0]], warmup=5.0)


def test_sp_occupational_measure_point_mass():
    # a trajectory pinned at one (u, y, z) point must reproduce the moments
    # of a unit point mass there, for every monomial
    u0, y0, z0 = np.array([0.3]), np.array([-0.2]), np.array([0.7])
    t = np.linspace(0.0, 1.0, 50)
    traj = sp.Trajectory(
        times=t, states=np.broadcast_to(np.concatenate([y0, z0]), (50, 2)).copy(),
        state_labels=("y1", "z1"), cost=np.zeros(50),
        controls=np.broadcast_to(u0, (50, 1)).copy(), control_labels=("u1",))

    class OnePoint:
        def mixture_measure(self):
            from spavglp.averaging import DiscreteMeasure
            return DiscreteMeasure(points=[(u0, y0, z0)],
                                   weights=np.array([1.0]))

    rep = sp.sp_occupational_measure(traj, OnePoint(), max_degree=3)
    assert rep.max_abs_diff <= 1e-12


# ---------------------------------------------------------------------------
# averaged system

def test_g_tilde_fixed_point(constant_law):
    p = _relax_problem()
    law = constant_law(np.array([0.4]))
    # associated run settles at y = 0.4, so the averaged drift is 0.4 - z
    val = sp.g_tilde(p, law, np.array([-0.2]))
    assert val[0] == pytest.approx(0.6, abs=1e-3)
    # memoized: second call returns the identical array
    assert sp.g_tilde(p, law, np.array([-0.2])) is val


def test_averaged_dynamics_matches_g_tilde(constant_law):
    p = _relax_problem()
    law = constant_law(np.array([0.4]))
    dyn = sp.AveragedDynamics(p, law, cell=0.02)
    z = np.array([-0.2])
    ref = sp.g_tilde(p, law, z)
    np.testing.assert_allclose(dyn.rhs(z), ref, atol=1e-3)
    assert dyn.batch_evals >= 1
    n = dyn.batch_evals
    dyn.rhs(z + 1e-4)          # same cell: no new batch
    assert dyn.batch_evals == n


def test_integrate_averaged_exponential(constant_law):
    p = _relax_problem()
    c = 0.4
    law = constant_law(np.array([c]))
    traj = sp.integrate_averaged(p, law, z0=np.array([-0.5]), t_max=6.0)
    exact = c + (-0.5 - c) * np.exp(-traj.times)
    np.testing.assert_allclose(traj.states[:, 0], exact, atol=5e-3)
    # with y pinned at c the averaged cost at z is (c - z)^2
    assert traj.cost[-1] == pytest.approx((c - traj.states[-1, 0]) ** 2,
                                          abs=5e-3)


def test_integrate_averaged_rejects_outside_z(constant_law):
    p = _relax_problem()
    with pytest.raises(ValueError):
        sp.integrate_averaged(p, constant_law(np.zeros(1)),
                              z0=np.array([5.0]), t_max=1.0)


# ---------------------------------------------------------------------------
# schedule

def test_schedule_params_defaults():
    s = sp.ScheduleParams(epsilon=0.01)
    assert s.delta == pytest.approx(max(math.sqrt(0.01), 0.1))
    assert s.dt == pytest.approx(min(0.01 / 20.0, 1e-3))
    assert s.delta / s.epsilon >= 10.0
    assert s.delta <= 0.5
    assert 0 < s.dt <= s.epsilon / 20.0 + 1e-15


@pytest.mark.parametrize("kwargs", [
    {"epsilon": 0.0},
    {"epsilon": -1.0},
    {"epsilon": 0.01, "delta": 0.05},       # delta/eps < 10
    {"epsilon": 0.1, "delta": 0.6},         # delta > 0.5
    {"epsilon": 0.01, "dt": 0.01},          # dt > eps/20
    {"epsilon": 0.01, "dt": 0.0},
])
def test_schedule_params_invalid(kwargs):
    with pytest.raises(ValueError):
        sp.ScheduleParams(**kwargs)


def test_schedule_control_piecewise_constant():
    p = _relax_problem()

    class EchoZ:
        """Feedback that returns the (frozen) slow argument."""
        problem = p

        def feedback_batch(self, Y, Z, check=False):
            return np.atleast_2d(Z).copy()

    t_grid = np.linspace(0.0, 10.0, 101)
    avg = sp.Trajectory(times=t_grid, states=(0.1 * t_grid)[:, None],
                        state_labels=("z1",), cost=np.zeros(101))
    params = sp.ScheduleParams(epsilon=0.01)
    law = EchoZ()
    y = np.zeros(1)
    d = params.delta
    for l in range(5):
        u_lo = sp.sp_schedule_control(law, avg, params, l * d, y)
        u_mid = sp.sp_schedule_control(law, avg, params, (l + 0.49) * d, y)
        np.testing.assert_allclose(u_lo, 0.1 * l * d, atol=1e-12)
        np.testing.assert_allclose(u_mid, u_lo)     # frozen inside [ld,(l+1)d)
    with pytest.raises(ValueError):
        sp.sp_schedule_control(law, avg, params, -1.0, y)
    with pytest.raises(ScheduleExhausted):
        sp.sp_schedule_control(law, avg, params, 99.0, y)


# ---------------------------------------------------------------------------
# singularly perturbed system

def test_integrate_sp_tracks_fixed_point(constant_law):
    p = _relax_problem()
    c = 0.4
    law = constant_law(np.array([c]))
    t_grid = np.linspace(0.0, 10.0, 11)
    avg = sp.Trajectory(times=t_grid, states=np.full((11, 1), c),
                        state_labels=("z1",), cost=np.zeros(11))
    params = sp.ScheduleParams(epsilon=0.02)
    traj = sp.integrate_sp(p, law, avg, params, y0=np.zeros(1),
                           z0=np.array([-0.5]), T=8.0)
    # fast layer: y -> c within O(eps); slow: z -> c like e^{-t}
    assert traj.states[-1, 0] == pytest.approx(c, abs=1e-3)
    exact_z = c + (-0.5 - c) * np.exp(-traj.times[-1])
    assert traj.states[-1, 1] == pytest.approx(exact_z, abs=2e-2)
    # long-run cost of G = (y-z)^2 tends to 0 as both settle at c
    assert sp.long_run_average(traj, warmup=4.0) <= 1e-2


def test_integrate_sp_guards(constant_law):
    p = _relax_problem()
    law = constant_law(np.zeros(1))
    t_grid = np.linspace(0.0, 2.0, 3)
    avg = sp.Trajectory(times=t_grid, states=np.zeros((3, 1)),
                        state_labels=("z1",), cost=np.zeros(3))
    params = sp.ScheduleParams(epsilon=0.02)
    with pytest.raises(ValueError):
        sp.integrate_sp(p, law, avg, params, np.array([9.0]), np.zeros(1), 1.0)
    with pytest.raises(ValueError):
        sp.integrate_sp(p, law, avg, params, np.zeros(1), np.array([9.0]), 1.0)
    with pytest.raises(ScheduleExhausted):
        sp.integrate_sp(p, law, avg, params, np.zeros(1), np.zeros(1), 50.0)
