import numpy as np
import pytest

from statewise import oracle, usl
from statewise.oracle import (
    DegenerateGradientError,
    GridSpec,
    InfeasibleGridError,
    PlanningSpanInput,
)


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(())
    with pytest.raises(ValueError):
        GridSpec(((1.0, 0.0, 10),))
    with pytest.raises(ValueError):
        GridSpec(((0.0, 1.0, 1),))
    with pytest.raises(ValueError):
        GridSpec(((0.0, 1.0, 10_000), (0.0, 1.0, 10_000)))


def test_grid_points_lexicographic():
    pts = GridSpec(((0.0, 1.0, 2), (0.0, 1.0, 3))).points()
    assert pts.shape == (6, 2)
    assert np.array_equal(pts[0], [0.0, 0.0])
    assert np.array_equal(pts[1], [0.0, 0.5])
    assert np.array_equal(pts[-1], [1.0, 1.0])


def test_grid_argmax_unconstrained_optimum_feasible():
    grid = GridSpec(((-1.0, 1.0, 201),))
    a, val = oracle.grid_constrained_argmax(
        lambda p: -p[:, 0] ** 2, lambda p: np.zeros(len(p)), 0.1, grid
    )
    assert a[0] == 0.0 and val == 0.0


def test_grid_argmax_active_constraint():
    # max a s.t. a^2 <= 0.1: optimum at sqrt(0.1) ~= 0.31623
    grid = GridSpec(((-1.0, 1.0, 2001),))
    a, _ = oracle.grid_constrained_argmax(
        lambda p: p[:, 0], lambda p: p[:, 0] ** 2, 0.1, grid
    )
    assert a[0] == pytest.approx(0.316, abs=1e-12)


def test_grid_argmax_infeasible():
    grid = GridSpec(((-1.0, 1.0, 11),))
    with pytest.raises(InfeasibleGridError):
        oracle.grid_constrained_argmax(
            lambda p: p[:, 0], lambda p: np.ones(len(p)), 0.1, grid
        )


def test_grid_argmax_ties_break_lexicographically():
    grid = GridSpec(((-1.0, 1.0, 5), (-1.0, 1.0, 5)))
    a, _ = oracle.grid_constrained_argmax(
        lambda p: np.zeros(len(p)), lambda p: np.zeros(len(p)), 1.0, grid
    )
    assert np.array_equal(a, [-1.0, -1.0])


def test_finite_diff_quadratic_exact():
    g = oracle.finite_diff_grad(lambda x: float(x[0] ** 2), np.array([3.0]), h=1e-6)
    assert g[0] == pytest.approx(6.0, abs=1e-6)


def test_finite_diff_constant_zero():
    g = oracle.finite_diff_grad(lambda x: 7.0, np.array([1.0, 2.0]))
    assert np.array_equal(g, np.zeros(2))


def test_qp_feasible_point_unchanged():
    mu = np.array([0.2, -0.1])
    out = oracle.qp_halfspace_project(mu, np.array([1.0, 0.0]), 0.0, 0.5)
    assert np.array_equal(out, mu)


def test_qp_known_instances():
    out = oracle.qp_halfspace_project(np.array([1.0, 0.0]), np.array([2.0, 0.0]), 0.0, 0.1)
    np.testing.assert_allclose(out, [0.05, 0.0], atol=1e-9)
    out = oracle.qp_halfspace_project(np.array([1.0]), np.array([1.0]), 0.5, 0.1)
    np.testing.assert_allclose(out, [-0.4], atol=1e-9)


def test_qp_degenerate_gradient_raises():
    with pytest.raises(DegenerateGradientError):
        oracle.qp_halfspace_project(np.array([1.0]), np.array([0.0]), 0.0, 0.1)


def test_planning_span_reference_values():
    assert oracle.planning_span(PlanningSpanInput(0.1, 1.0, 0.99)) == 229
    assert oracle.planning_span(PlanningSpanInput(0.5, 0.5, 0.9)) == 0  # delta == eps
    assert oracle.planning_span(PlanningSpanInput(0.5, 1.0, 0.5)) == 1


def test_planning_span_predicate_brackets_the_answer():
    inp = PlanningSpanInput(0.1, 1.0, 0.99)
    assert oracle.planning_span_holds(inp, 229)
    assert not oracle.planning_span_holds(inp, 230)


def test_planning_span_input_validation():
    with pytest.raises(ValueError):
        PlanningSpanInput(0.0, 1.0, 0.9)
    with pytest.raises(ValueError):
        PlanningSpanInput(0.5, 0.1, 0.9)  # delta > eps
    with pytest.raises(ValueError):
        PlanningSpanInput(0.1, 1.0, 1.0)


def test_rk4_matches_exact_linear_ode():
    # v' = 2 - v from v(0) = 0: v(t) = 2(1 - e^-t)
    final = oracle.rk4(lambda s: np.array([2.0 - s[0]]), np.array([0.0]), 0.05, 100)
    assert final[0] == pytest.approx(2.0 * (1.0 - np.exp(-0.05)), abs=1e-12)


def test_straightline_forward_rejects_bad_length():
    with pytest.raises(ValueError):
        oracle.straightline_forward((2, 1), "relu", "identity", np.zeros(5), np.zeros(2))


def test_unroll_vs_grid_from_grid_optimum():
    grid = GridSpec(((-1.0, 1.0, 401),))
    q = lambda p: -((p[:, 0] - 0.9) ** 2)
    qc = lambda p: p[:, 0] ** 2
    a_star, _ = oracle.grid_constrained_argmax(q, qc, 0.1, grid)
    report = oracle.unroll_vs_grid(q, qc, 0.1, usl.UslConfig(), a_star, grid)
    assert report.iterations == 0
    assert report.feasible
    assert report.action_gap == 0.0 and report.q_gap == 0.0


def test_unroll_vs_grid_flags_unreachable_start():
    # far start, tiny iteration budget: the correction cannot reach the set
    grid = GridSpec(((-1.0, 1.0, 401),))
    q = lambda p: p[:, 0]
    qc = lambda p: (p[:, 0] + 1.0) ** 2  # feasible near -1
    cfg = usl.UslConfig(k_max=2, eta=0.05)
    report = oracle.unroll_vs_grid(q, qc, 0.1, cfg, np.array([1.0]), grid)
    assert not report.feasible
    assert report.iterations == 2
