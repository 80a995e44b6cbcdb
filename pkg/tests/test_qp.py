import json
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loadgan.autodiff import Value
from loadgan.autodiff.gradcheck import numerical_gradient, relative_error
from loadgan.errors import ConfigError, EmptyPolytopeError, NonConvergenceError
from loadgan.qp import (DegenerateDerivativeWarning, QpSolution, RampBoxPolytope, SolverConfig, build_polytope, jacobian, kkt_residuals,
                        oracle_project, project, projection, qp_backward)

from _util import paper_polytope, random_inputs, random_polytope, stable_active_set

M2 = build_polytope(0, 1, 0.5, 0, 10, 2)


# -- polytope ----------------------------------------------------------------

def test_paper_bounds():
    P = paper_polytope()
    assert P.lower == 0.0
    assert P.upper == pytest.approx(10.2582, abs=1e-12)
    assert P.G.shape == (4 * 15 - 2, 15)


def test_degenerate_box_admits_only_the_constant():
    P = build_polytope(1, 1, 0.5, 3.0, 3.0, 4)
    sol = project(np.array([-1.0, 2.0, 7.0, 3.5]), P)
    np.testing.assert_allclose(sol.z_star, 3.0, atol=1e-12)


def test_empty_box_rejected():
    with pytest.raises(EmptyPolytopeError):
        build_polytope(1, 0.5, 0.5, 4, 6, 15)


def test_negative_k3_rejected():
    with pytest.raises(ConfigError):
        build_polytope(0, 1, -0.1, 1, 2, 3)


def test_rows_follow_documented_layout():
    P = build_polytope(0.5, 2.0, 0.25, 1.0, 4.0, 3)
    z = np.array([1.0, 2.0, 3.0])
    # -z_i + k1 L, z_i - k2 U, z_i - 1.25 z_{i-1}, 0.75 z_{i-1} - z_i
    expected = np.array([-1, -2, -3, 1 - 8, 2 - 8, 3 - 8, 2 - 1.25, 3 - 2.5, 0.75 - 2, 1.5 - 3])
    expected[:3] += 0.5
    np.testing.assert_allclose(P.G @ z - P.h, expected)


def test_polytope_json_round_trip():
    P = paper_polytope()
    Q = RampBoxPolytope.from_json(P.to_json())
    assert Q == P
    assert json.loads(P.to_json()) == {"k1": 0.0, "k2": 1.39, "k3": 0.5, "L": 0.55, "U": 7.38, "m": 15}
    with pytest.raises(ConfigError):
        RampBoxPolytope.from_dict({**P.to_dict(), "extra": 1})


def test_constant_inside_box_is_feasible():
    rng = np.random.default_rng(0)
    for _ in range(50):
        P = random_polytope(rng, 6)
        c = rng.uniform(max(P.lower, 0), P.upper)
        assert P.contains(np.full(6, c))


# -- forward -------------------------------------------------------------------

def test_interior_point_is_fixed():
    P = paper_polytope()
    sol = project(np.full(15, 5.0), P)
    np.testing.assert_allclose(sol.z_star, 5.0, atol=1e-12)


def test_box_clamp_is_ramp_feasible():
    P = paper_polytope()
    sol = project(np.full(15, 20.0), P)
    np.testing.assert_allclose(sol.z_star, 10.2582, atol=1e-12)


def test_two_sample_ramp_example():
    a = np.array([1.0, 2.0])
    expected = np.array([16 / 13, 24 / 13])
    # single active row n = (-1.5, 1): closed-form half-space projection
    n = np.array([-1.5, 1.0])
    closed = a - (n @ a) / (n @ n) * n
    np.testing.assert_allclose(closed, expected, atol=1e-15)
    np.testing.assert_allclose(oracle_project(a, M2), expected, atol=1e-12)
    np.testing.assert_allclose(project(a, M2).z_star, expected, atol=1e-12)


def test_kkt_invariants_hold():
    rng = np.random.default_rng(1)
    cfg = SolverConfig()
    for m in (3, 15):
        P = random_polytope(rng, m)
        a = random_inputs(rng, P, 50)
        sol = project(a, P, cfg)
        primal, dual, comp, stat = kkt_residuals(sol.z_star, sol.duals, a, P)
        assert primal.max() <= cfg.feas_tol
        assert dual.max() <= cfg.feas_tol
        assert comp.max() <= cfg.comp_tol
        assert stat.max() <= cfg.stat_tol
        np.testing.assert_array_equal(sol.active_mask, sol.slack < cfg.active_tol)


def test_batch_matches_individual_solves():
    rng = np.random.default_rng(2)
    P = paper_polytope()
    a = random_inputs(rng, P, 8)
    batch = project(a, P).z_star
    for i in range(8):
        np.testing.assert_allclose(project(a[i], P).z_star, batch[i], atol=1e-12)


def test_zero_predecessor_forces_zeros():
    # k1*L = 0: once a sample hits 0 the ramp rows pin the rest of the window at 0
    P = build_polytope(0, 1, 0.5, 0.0, 5.0, 5)
    a = np.array([-3.0, -3.0, -3.0, -3.0, -3.0])
    np.testing.assert_allclose(project(a, P).z_star, 0.0, atol=1e-12)
    a = np.array([-3.0, 4.0, 4.0, 4.0, 4.0])
    z = project(a, P).z_star
    np.testing.assert_allclose(z, oracle_project(a, P), atol=1e-9)
    assert P.contains(z)


def test_zero_ramp_tolerance_forces_constant_window():
    P = build_polytope(0, 1, 0.0, 0.0, 10.0, 4)
    a = np.array([1.0, 2.0, 3.0, 6.0])
    np.testing.assert_allclose(project(a, P).z_star, 3.0, atol=1e-10)


def test_nonconvergence_reports_residuals():
    P = paper_polytope()
    a = np.full((2, 15), 20.0)
    a[:, ::2] = -5.0
    with pytest.raises(NonConvergenceError) as info:
        project(a, P, SolverConfig(max_iterations=1, polish=False))
    assert "primal_residual" in info.value.diagnostics
    json.dumps(info.value.diagnostics)


def test_diagnostics_serialize():
    sol = project(np.full((3, 15), 2.0), paper_polytope())
    stats = json.loads(sol.diagnostics_json())
    assert set(stats) >= {"iterations", "primal_residual", "stationarity"}


def test_rejects_wrong_length_and_nonfinite():
    P = paper_polytope()
    with pytest.raises(ConfigError):
        project(np.zeros(14), P)
    with pytest.raises(ConfigError):
        project(np.full(15, np.nan), P)


def test_empty_batch():
    assert project(np.zeros((0, 15)), paper_polytope()).z_star.shape == (0, 15)


# -- oracle --------------------------------------------------------------------

def test_oracle_fixed_point_and_refusal():
    P = build_polytope(0, 1, 0.5, 1, 10, 3)
    a = np.array([2.0, 2.5, 3.0])
    np.testing.assert_array_equal(oracle_project(a, P), a)
    with pytest.raises(ConfigError):
        oracle_project(np.zeros(9), build_polytope(0, 1, 0.5, 1, 10, 9))


def test_oracle_equivalence_small_sweep():
    rng = np.random.default_rng(3)
    for m in (2, 3, 4):
        for _ in range(5):
            P = random_polytope(rng, m)
            a = random_inputs(rng, P, 40)
            assert np.abs(project(a, P).z_star - oracle_project(a, P)).max() < 1e-6


# -- backward --------------------------------------------------------------------

def test_interior_jacobian_is_identity():
    P = paper_polytope()
    a = np.linspace(3, 4, 15)
    sol = project(a, P)
    g = np.random.default_rng(0).normal(size=15)
    np.testing.assert_allclose(qp_backward(sol, P, g), g, atol=1e-12)


def test_clamped_jacobian_is_zero():
    P = paper_polytope()
    sol = project(np.full(15, 30.0), P)
    assert np.all(sol.duals[15:30] > 1e-3)
    np.testing.assert_allclose(jacobian(sol, P), 0.0, atol=1e-12)


def test_two_sample_jacobian():
    a = np.array([1.0, 2.0])
    sol = project(a, M2)
    J = jacobian(sol, M2)
    n = np.array([-1.5, 1.0])
    np.testing.assert_allclose(J, np.eye(2) - np.outer(n, n) / (n @ n), atol=1e-12)
    h = 1e-6
    fd = np.column_stack([(project(a + h * e, M2).z_star - project(a - h * e, M2).z_star) / (2 * h)
                          for e in np.eye(2)])
    np.testing.assert_allclose(J, fd, atol=1e-8)
    np.testing.assert_allclose(J, [[0.30769, 0.46154], [0.46154, 0.69231]], atol=1e-5)


def test_backward_matches_finite_differences_paper_polytope():
    rng = np.random.default_rng(4)
    P = paper_polytope()
    checked = 0
    while checked < 20:
        a = random_inputs(rng, P, 1)[0]
        sol = project(a, P)
        if not stable_active_set(sol):
            continue
        g = rng.normal(size=15)
        num = numerical_gradient(lambda v: float(g @ project(v, P).z_star), a.copy(), 1e-6)
        assert relative_error(qp_backward(sol, P, g), num) < 1e-4
        checked += 1


def test_weakly_active_resolved_by_least_squares():
    # a exactly on the ramp boundary: tight row with zero multiplier
    a = np.array([2.0, 3.0])
    sol = project(a, M2)
    np.testing.assert_allclose(sol.z_star, a, atol=1e-12)
    assert sol.slack[4] < 1e-12 and sol.duals[4] == 0.0
    J = jacobian(sol, M2)
    # result is a convex combination of the two one-sided Jacobians I and I - nn^T/|n|^2
    n = np.array([-1.5, 1.0])
    N = np.outer(n, n) / (n @ n)
    t = (1.0 - J[0, 0]) / N[0, 0]
    assert 0.0 <= t <= 1.0
    np.testing.assert_allclose(J, np.eye(2) - t * N, atol=1e-12)


def test_dependent_tight_rows_warn_but_return_gradient():
    # corner at zero with k1*L = 0: three strongly active rows in R^2 plus a weak one
    P = M2
    z = np.zeros(2)
    duals = np.array([1.0, 1.0, 0.0, 0.0, 0.5, 0.0])
    sol = QpSolution(z, duals, P.slack(z) < 1e-6, P.slack(z))
    with pytest.warns(DegenerateDerivativeWarning):
        gin = qp_backward(sol, P, np.ones(2))
    np.testing.assert_allclose(gin, 0.0, atol=1e-12)


def test_projection_node_in_graph():
    P = paper_polytope()
    rng = np.random.default_rng(5)
    a0 = random_inputs(rng, P, 3)
    w = rng.normal(size=(3, 15))
    av = Value(a0.copy(), requires_grad=True)
    z, sol = projection(av, P)
    (z * w).sum().backward()
    np.testing.assert_allclose(av.grad, qp_backward(sol, P, w), atol=1e-14)


def test_projection_node_multiple_windows():
    P = build_polytope(0, 1, 0.5, 1, 5, 3)
    a = np.array([[1.0, 9.0, 2.0, 0.0, 3.0, 3.0]])
    z, _ = projection(Value(a), P, windows=2)
    np.testing.assert_allclose(z.data[0, :3], project(a[0, :3], P).z_star)
    np.testing.assert_allclose(z.data[0, 3:], project(a[0, 3:], P).z_star)


# -- properties ------------------------------------------------------------------

inputs = st.lists(st.floats(-20, 30), min_size=15, max_size=15)


@settings(max_examples=60, deadline=None)
@given(a=inputs)
def test_idempotence(a):
    P = paper_polytope()
    z = project(np.array(a), P).z_star
    np.testing.assert_allclose(project(z, P).z_star, z, atol=1e-8, rtol=0)


@settings(max_examples=60, deadline=None)
@given(a=inputs, b=inputs)
def test_non_expansive(a, b):
    P = paper_polytope()
    a, b = np.array(a), np.array(b)
    za, zb = project(np.vstack([a, b]), P).z_star
    assert np.linalg.norm(za - zb) <= np.linalg.norm(a - b) + 1e-9


@settings(max_examples=60, deadline=None)
@given(a=inputs)
def test_hard_feasibility(a):
    P = paper_polytope()
    z = project(np.array(a), P).z_star
    assert P.violations(z, 1e-8) == {"box_lower": 0, "box_upper": 0, "ramp_up": 0, "ramp_down": 0}


def test_solver_cost_grows_at_most_cubically():
    rng = np.random.default_rng(6)
    times = {}
    for m in (15, 30, 60):
        P = build_polytope(0, 1.39, 0.5, 0.55, 7.38, m)
        a = random_inputs(rng, P, 32)
        project(a, P)
        t0 = time.perf_counter()
        for _ in range(3):
            project(a, P)
        times[m] = (time.perf_counter() - t0) / 3
    # trend check with generous slack for timer noise
    assert times[60] / times[15] <= 2 * 4 ** 3
    assert times[30] / times[15] <= 2 * 2 ** 3


@pytest.mark.parametrize("scale", [1e-3, 1.0, 1e3, 1e6])
def test_extreme_input_scales_solve(scale):
    poly = paper_polytope()
    a = np.random.default_rng(11).normal(5.0, scale, (300, 15))
    sol = project(a, poly)
    assert poly.violations(sol.z_star, tol=1e-8) == {b: 0 for b in ("box_lower", "box_upper",
                                                                    "ramp_up", "ramp_down")}
    # the projection of a feasible point onto itself must come back unchanged
    np.testing.assert_allclose(project(sol.z_star, poly).z_star, sol.z_star, atol=1e-8, rtol=0)


def test_active_set_fallback_matches_oracle():
    from loadgan.qp.solver import _active_set_one

    rng = np.random.default_rng(12)
    for _ in range(200):
        poly = random_polytope(rng, int(rng.integers(1, 6)))
        a = random_inputs(rng, poly, 1)[0]
        z0 = np.full(poly.m, 0.5 * (poly.lower + poly.upper))
        z, lam = _active_set_one(a, poly.G, poly.h, z0, SolverConfig())
        np.testing.assert_allclose(z, oracle_project(a, poly), atol=1e-9, rtol=0)
        assert lam.min() >= 0
