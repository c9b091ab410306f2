import copy

import numpy as np
import pytest

from impulsegame import (
    GridSpec,
    SolveOptions,
    builtin_problem,
    check_structural,
    growth_envelope_const,
    qvi_residual,
    solve,
)

from .test_solver import p1_node_spanning


@pytest.fixture
def p2_field():
    spec = builtin_problem("P2_adversarial_drift", {"alpha": 0.5, "beta": 0.1})
    grid = GridSpec((-3.0,), (3.0,), (61,), 50)  # dx = 0.1, dt = 0.02
    return spec, grid, solve(spec, grid)


class TestQviResidual:
    def test_p1_node_jumps_residual_vanishes(self, p1_grid):
        spec = p1_node_spanning(p1_grid)
        field = solve(spec, p1_grid)
        report = qvi_residual(field, spec, p1_grid)
        assert report.max_residual <= 1e-9

    def test_median_residual_halves_under_refinement(self):
        spec = builtin_problem("P2_adversarial_drift",
                               {"alpha": 0.5, "beta": 0.1})
        medians = []
        for nodes, steps in [(31, 25), (61, 50), (121, 100)]:
            grid = GridSpec((-3.0,), (3.0,), (nodes,), steps)
            field = solve(spec, grid)
            medians.append(qvi_residual(field, spec, grid).quantiles[50])
        assert medians[0] / medians[1] > 1.4
        assert medians[1] / medians[2] > 1.4

    def test_shifted_interior_flagged_at_last_level(self, p2_field):
        spec, grid, field = p2_field
        shifted = copy.copy(field)
        shifted.slices = [s + 1.0 for s in field.slices[:-1]]
        shifted.slices.append(field.slices[-1])
        base = qvi_residual(field, spec, grid)
        report = qvi_residual(shifted, spec, grid)
        # the forward time difference at level K-1 sees the 1-jump: O(1/dt)
        dt = grid.dt(spec.t0, spec.T)
        assert report.max_residual >= 0.5 / dt
        assert base.max_residual < 0.5 / dt

    def test_report_is_reproducible(self, p2_field):
        spec, grid, field = p2_field
        a = qvi_residual(field, spec, grid)
        b = qvi_residual(field, spec, grid)
        assert a.max_residual == b.max_residual
        assert a.quantiles == b.quantiles
        assert a.boundary_max_residual == b.boundary_max_residual

    def test_rows_collected_for_interior_nodes_only(self, p2_field):
        spec, grid, field = p2_field
        report = qvi_residual(field, spec, grid, collect_rows=True)
        assert len(report.rows) == report.interior_count
        nodes_per_level = {i for _, i, _ in report.rows}
        assert 0 not in nodes_per_level
        assert grid.n_nodes - 1 not in nodes_per_level

    def test_mismatched_field_rejected(self, p2_field, p1_spec):
        _, grid, field = p2_field
        with pytest.raises(ValueError, match="does not match"):
            qvi_residual(field, p1_spec, grid)

    def test_verifier_does_not_modify_the_field(self, p2_field):
        spec, grid, field = p2_field
        before = [s.copy() for s in field.slices]
        qvi_residual(field, spec, grid)
        check_structural(field, spec, grid)
        for a, b in zip(before, field.slices):
            np.testing.assert_array_equal(a, b)


class TestCheckStructural:
    @pytest.mark.parametrize("name,params", [
        ("P1_null_flow", {"alpha": 0.5}),
        ("P2_adversarial_drift", {"alpha": 0.5, "beta": 0.1}),
        ("P3_cash_management",
         {"kappa": 0.3, "k": 0.1, "mu": 0.2, "h": 1.0}),
    ])
    def test_solve_outputs_pass_all_checks(self, name, params):
        spec = builtin_problem(name, params)
        grid = GridSpec((-2.0,), (2.0,), (41,), 50)
        field = solve(spec, grid)
        report = check_structural(field, spec, grid)
        assert report.obstacle_passed
        assert report.growth_passed
        assert report.terminal_passed

    def test_single_obstacle_violation_is_listed(self, p2_field):
        spec, grid, field = p2_field
        broken = copy.copy(field)
        broken.slices = [s.copy() for s in field.slices]
        broken.slices[10][30] += 5.0  # now exceeds N[v] at that node
        report = check_structural(broken, spec, grid)
        assert not report.obstacle_passed
        assert {(k, i) for k, i, _ in report.obstacle_violations} == {(10, 30)}

    def test_scaled_field_fails_growth_with_witnesses(self, p2_field):
        spec, grid, field = p2_field
        scaled = copy.copy(field)
        scaled.slices = [1000.0 * s for s in field.slices]
        report = check_structural(scaled, spec, grid)
        assert not report.growth_passed
        assert len(report.growth_violations) > 0

    def test_envelope_constant_formula(self, p2_spec):
        horizon = p2_spec.T - p2_spec.t0
        expected = (p2_spec.growth_const
                    * np.exp(p2_spec.growth_const * horizon) * (1 + horizon))
        assert growth_envelope_const(p2_spec) == pytest.approx(expected)

    def test_terminal_gap_bound_scales_with_dt(self, p3_spec):
        gaps = []
        for steps in (25, 50):
            grid = GridSpec((-2.0,), (2.0,), (41,), steps)
            field = solve(p3_spec, grid)
            report = check_structural(field, p3_spec, grid)
            assert report.terminal_passed
            gaps.append(report.terminal_gap)
        assert gaps[0] / gaps[1] == pytest.approx(2.0, rel=0.3)
