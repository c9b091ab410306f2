import numpy as np
import pytest

from impulsegame import (
    GridSpec,
    apply_N,
    builtin_problem,
    impulse_fixed_point,
    max_jump_bound,
    terminal_value_G1,
)

from .conftest import node_index
from .test_model import make_custom


class TestMaxJumpBound:
    def test_half_alpha_at_origin(self):
        spec = make_custom(growth_const=1.0, alpha=0.5)
        assert max_jump_bound(spec, [0.0]) == 2

    def test_clamped_to_one(self):
        spec = make_custom(growth_const=1.0, alpha=2.0)
        assert max_jump_bound(spec, [0.0]) == 1

    def test_two_dimensional_state(self):
        spec = make_custom(state_dim=2, growth_const=2.0, alpha=0.5,
                           impulse_candidates=((1.0, 0.0),))
        assert max_jump_bound(spec, [3.0, 4.0]) == 24


@pytest.fixture
def p1_wide():
    # candidates {-2,-1,1,2} so the origin is one jump from the outer nodes
    return builtin_problem(
        "P1_null_flow",
        {"alpha": 0.5, "impulse_candidates": [-2.0, -1.0, 1.0, 2.0]})


class TestApplyN:
    def test_jump_to_origin_dominates(self, p1_wide, coarse_grid):
        slice_ = np.abs(coarse_grid.node_array()[:, 0])
        res = apply_N(slice_, 1.0, p1_wide, coarse_grid)
        assert res.values[node_index(coarse_grid, 2.0)] == 0.5

    def test_origin_reaches_nearest_neighbors(self, p1_wide, coarse_grid):
        slice_ = np.abs(coarse_grid.node_array()[:, 0])
        res = apply_N(slice_, 1.0, p1_wide, coarse_grid)
        assert res.values[node_index(coarse_grid, 0.0)] == 1.5

    def test_constant_zero_slice_gives_alpha(self, p1_wide, coarse_grid):
        res = apply_N(np.zeros(5), 1.0, p1_wide, coarse_grid)
        np.testing.assert_array_equal(res.values, 0.5)

    def test_monotone_in_slice(self, p1_wide, coarse_grid):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = rng.uniform(0.0, 2.0, 5)
            b = a + rng.uniform(0.0, 1.0, 5)
            va = apply_N(a, 1.0, p1_wide, coarse_grid).values
            vb = apply_N(b, 1.0, p1_wide, coarse_grid).values
            assert np.all(va <= vb)

    def test_bounded_below_by_min_plus_alpha(self, p1_wide, coarse_grid):
        rng = np.random.default_rng(4)
        s = rng.uniform(-1.0, 3.0, 5)
        res = apply_N(s, 1.0, p1_wide, coarse_grid)
        assert np.all(res.values >= np.min(s) + p1_wide.alpha - 1e-12)

    def test_tie_breaks_to_smallest_candidate_index(self, coarse_grid):
        # both candidates land on the same clamped target; index 0 wins
        spec = make_custom(impulse_candidates=((3.0,), (4.0,)),
                           growth_const=4.0)
        res = apply_N(np.zeros(5), 0.5, spec, coarse_grid)
        np.testing.assert_array_equal(res.best_candidate, 0)


class TestImpulseFixedPoint:
    def test_two_jump_chain_from_outer_node(self, coarse_grid):
        spec = builtin_problem(
            "P1_null_flow",
            {"alpha": 0.5, "impulse_candidates": [-1.0, 1.0]})
        slice_ = np.abs(coarse_grid.node_array()[:, 0])
        res = impulse_fixed_point(slice_, 1.0, spec, coarse_grid)
        i = node_index(coarse_grid, 2.0)
        assert res.values[i] == 1.0
        jumps = [spec.impulse_array()[c][0] for c in res.chains[i]]
        assert jumps == [-1.0, -1.0]

    def test_fixed_slice_is_unchanged(self, p1_wide, coarse_grid):
        # a constant slice already satisfies w <= N[w] (costs are positive)
        w = np.full(5, 0.7)
        res = impulse_fixed_point(w, 1.0, p1_wide, coarse_grid)
        np.testing.assert_array_equal(res.values, w)
        assert all(chain == () for chain in res.chains)
        assert res.iterations == 0

    def test_output_below_input_and_obstacle(self, p3_spec):
        grid = GridSpec((-2.5,), (2.5,), (101,), 10)
        slice_ = p3_spec.terminal_cost(grid.node_array())
        res = impulse_fixed_point(slice_, p3_spec.T, p3_spec, grid)
        assert np.all(res.values <= slice_ + 1e-15)
        after = apply_N(res.values, p3_spec.T, p3_spec, grid).values
        assert np.all(res.values <= after + 1e-12)

    def test_iterations_bounded_by_jump_cap(self, p3_spec):
        grid = GridSpec((-2.5,), (2.5,), (101,), 10)
        slice_ = p3_spec.terminal_cost(grid.node_array())
        res = impulse_fixed_point(slice_, p3_spec.T, p3_spec, grid)
        cap = max(max_jump_bound(p3_spec, x) for x in grid.node_array())
        assert res.iterations <= cap

    def test_chain_lengths_respect_node_bounds(self, p3_spec):
        grid = GridSpec((-2.5,), (2.5,), (101,), 10)
        slice_ = p3_spec.terminal_cost(grid.node_array())
        res = impulse_fixed_point(slice_, p3_spec.T, p3_spec, grid)
        for x, chain in zip(grid.node_array(), res.chains):
            assert len(chain) <= max_jump_bound(p3_spec, x)

    def test_cash_management_values_match_tuple_enumeration(self):
        # Frozen references from exhaustive enumeration of candidate-jump
        # tuples (clamped composition, cost 0.4 + 0.1|xi| per jump).
        spec = builtin_problem(
            "P3_cash_management",
            {"kappa": 0.4, "k": 0.1, "mu": 0.2, "h": 1.0})
        grid = GridSpec((-2.5,), (2.5,), (101,), 10)
        slice_ = spec.terminal_cost(grid.node_array())
        res = impulse_fixed_point(slice_, spec.T, spec, grid)
        expected = {-2.5: 1.05, -1.75: 0.85, -1.0: 0.5, -0.35: 0.35,
                    0.0: 0.0, 0.5: 0.45, 1.2: 0.7, 2.0: 0.6, 2.5: 1.05}
        for x, want in expected.items():
            got = res.values[node_index(grid, x)]
            assert got == pytest.approx(want, abs=1e-12), x


class TestTerminalValue:
    def test_p1_rich_candidates_closed_form(self, p1_grid):
        nodes = p1_grid.node_array()[:, 0]
        cands = [float(x) for x in nodes if x != 0.0]
        spec = builtin_problem(
            "P1_null_flow", {"alpha": 0.5, "impulse_candidates": cands})
        res = terminal_value_G1(spec, p1_grid)
        np.testing.assert_allclose(
            res.values, np.minimum(np.abs(nodes), 0.5), atol=1e-12)

    def test_expensive_interventions_leave_terminal_alone(self, coarse_grid):
        spec = make_custom(
            impulse_cost=lambda t, x, xi: np.full(x.shape[0], 10.0),
            alpha=10.0, growth_const=10.0)
        res = terminal_value_G1(spec, coarse_grid)
        np.testing.assert_array_equal(
            res.values, spec.terminal_cost(coarse_grid.node_array()))

    def test_p2_values_match_tuple_enumeration(self):
        # Frozen from exhaustive enumeration (cost 0.3 + 0.1|xi| per jump)
        spec = builtin_problem(
            "P2_adversarial_drift",
            {"alpha": 0.3, "beta": 0.1,
             "impulse_candidates": [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]})
        grid = GridSpec((-3.0,), (3.0,), (61,), 10)
        res = terminal_value_G1(spec, grid)
        assert res.values[node_index(grid, 2.0)] == pytest.approx(0.5, abs=1e-12)
        assert res.values[node_index(grid, -3.0)] == pytest.approx(0.9, abs=1e-12)

    def test_never_exceeds_terminal_cost(self, p2_spec):
        grid = GridSpec((-3.0,), (3.0,), (31,), 10)
        res = terminal_value_G1(p2_spec, grid)
        G = p2_spec.terminal_cost(grid.node_array())
        assert np.all(res.values <= G + 1e-15)
