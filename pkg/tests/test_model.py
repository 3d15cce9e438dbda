"""Boxes, problem registry, dynamics evaluation, contraction probe."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import spavglp as sp
from spavglp.errors import DomainViolation


@pytest.fixture
def box():
    return sp.Box(np.array([-1.0, 0.0]), np.array([1.0, 2.0]))


def test_box_contains_and_violation(box):
    assert box.contains([0.0, 1.0])
    assert box.contains([1.0 + 1e-10, 2.0])          # within tolerance
    assert not box.contains([1.1, 1.0])
    assert box.violation([0.0, 1.0]) <= 0.0
    assert box.violation([1.5, 1.0]) == pytest.approx(0.5)


def test_box_grid_and_clip(box):
    g = box.grid(3)
    assert g.shape == (9, 2)
    assert g[0] == pytest.approx([-1.0, 0.0])
    assert g[-1] == pytest.approx([1.0, 2.0])
    np.testing.assert_allclose(box.clip([5.0, -5.0]), [1.0, 0.0])


def test_box_sample_deterministic(box):
    a = box.sample(np.random.default_rng(42), 5)
    b = box.sample(np.random.default_rng(42), 5)
    np.testing.assert_array_equal(a, b)
    assert all(box.contains(x) for x in a)


def test_box_invalid():
    with pytest.raises(ValueError):
        sp.Box(np.array([1.0]), np.array([0.0]))


def test_registry_roundtrip():
    assert "gr-example" in sp.problem_keys()
    p = sp.get_problem("gr-example")
    assert p.name == "gr-example"
    with pytest.raises(KeyError):
        sp.get_problem("no-such-problem")


def test_example_dynamics_point_values(example_problem):
    # hand-computed: f = -y + u; g = (z2, -4 z1 - 0.3 z2 - y1 u2 + y2 u1);
    # G = 0.1 u1^2 + 0.1 u2^2 - z1^2
    f, g, G = sp.eval_dynamics(example_problem,
                               u=np.array([1.0, -1.0]),
                               y=np.array([1.0, 1.0]),
                               z=np.array([1.0, 0.0]))
    np.testing.assert_allclose(f, [0.0, -2.0])
    np.testing.assert_allclose(g, [0.0, -2.0])
    assert G == pytest.approx(-0.8)


def test_eval_dynamics_domain_checks(example_problem):
    with pytest.raises(DomainViolation):
        sp.eval_dynamics(example_problem, np.array([2.0, 0.0]),
                         np.zeros(2), np.zeros(2))
    with pytest.raises(DomainViolation):
        sp.eval_dynamics(example_problem, np.zeros(2),
                         np.zeros(2), np.array([0.0, 9.0]))


def test_batch_matches_pointwise(example_problem):
    rng = np.random.default_rng(3)
    U = example_problem.u_box.sample(rng, 6)
    Y = example_problem.y_box.sample(rng, 6)
    Z = example_problem.z_box.sample(rng, 6)
    F = example_problem.f_batch(U, Y, Z)
    g = example_problem.g_batch(U, Y, Z)
    C = example_problem.G_batch(U, Y, Z)
    for i in range(6):
        fi, gi, Gi = sp.eval_dynamics(example_problem, U[i], Y[i], Z[i])
        np.testing.assert_allclose(F[i], fi)
        np.testing.assert_allclose(g[i], gi)
        assert C[i] == pytest.approx(Gi)


def test_nonvectorized_batch_broadcast(toy_problem):
    U = np.zeros((4, 1, 1))
    Y = np.linspace(-1, 1, 3).reshape(1, 3, 1)
    Z = np.zeros((1, 1, 1))
    F = toy_problem.f_batch(U, Y, Z)
    assert F.shape == (4, 3, 1)
    np.testing.assert_allclose(F[0, :, 0], -Y[0, :, 0])
    C = toy_problem.G_batch(U, Y, Z)
    assert C.shape == (4, 3)
    np.testing.assert_allclose(C[2], Y[0, :, 0] ** 2)


def test_contraction_example(example_problem):
    rep = sp.check_contraction(example_problem, samples=200, seed=0)
    assert rep.fast_ok
    assert rep.fast_margin <= 1e-12


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_contraction_any_seed(seed):
    # f = -y + u is exactly one-sided Lipschitz with constant -1
    rep = sp.check_contraction(sp.get_problem("gr-example"), samples=50, seed=seed)
    assert rep.fast_ok
