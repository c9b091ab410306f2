"""Acceptance gate: twelve numbered criteria, one pass/fail line each.

Each test prints "[PASS] criterion N: ..." or "[FAIL] criterion N: ..."
before asserting, so the gate's outcome is readable from the run log even
under failure.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from impulsegame import (
    ControlPath,
    GridSpec,
    ImpulseSchedule,
    SolveOptions,
    backward_value,
    build_finite_game,
    builtin_problem,
    check_structural,
    divergence_check,
    enumerate_value,
    integrate,
    max_jump_bound,
    qvi_residual,
    restart_identity_check,
    seeded_corpus,
    solve,
    solve_transformed,
    terminal_value_G1,
)
from impulsegame.cli import play_policy

from .test_oracle import hand_game
from .test_solver import p1_node_spanning

BUILTIN_CASES = [
    ("P1_null_flow", {"alpha": 0.5}),
    ("P2_adversarial_drift", {"alpha": 0.5, "beta": 0.1}),
    ("P3_cash_management", {"kappa": 0.3, "k": 0.1, "mu": 0.2, "h": 1.0}),
]


def report(n, desc, ok):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {desc}")
    assert ok, f"criterion {n}: {desc}"


@pytest.fixture(scope="module")
def builtin_fields():
    """One solve per built-in problem on a shared 41-node, 50-step grid."""
    out = {}
    for name, params in BUILTIN_CASES:
        spec = builtin_problem(name, params)
        grid = GridSpec((-2.0,), (2.0,), (41,), 50)
        out[name] = (spec, grid, solve(spec, grid))
    return out


def test_criterion_01_closed_form_fixture():
    grid = GridSpec((-2.0,), (2.0,), (101,), 50)
    spec = p1_node_spanning(grid)
    field = solve(spec, grid)
    nodes = grid.node_array()[:, 0]
    exact = np.minimum(np.abs(nodes), 0.5)
    err = max(float(np.max(np.abs(s - exact))) for s in field.slices)
    ok = err <= 1e-9 and field.solve_seconds < 1.0
    report(1, f"closed-form error {err:.2e}, "
              f"runtime {field.solve_seconds:.2f}s", ok)


def test_criterion_02_oracle_equivalence():
    start = time.perf_counter()
    equal = True
    game = hand_game()
    bw = backward_value(game)
    equal &= bw[0, 1] == 0.4
    for s in range(game.n_states):
        equal &= enumerate_value(game, s) == bw[0, s]
    for g in seeded_corpus(12, seed=2024):
        v = backward_value(g)
        for s in range(g.n_states):
            equal &= enumerate_value(g, s) == v[0, s]
    elapsed = time.perf_counter() - start
    ok = equal and elapsed < 30.0
    report(2, f"hand game + 12-game corpus exact, {elapsed:.1f}s", ok)


def test_criterion_03_solver_vs_oracle():
    spec = builtin_problem(
        "P2_adversarial_drift",
        {"alpha": 0.5, "beta": 0.1, "T": 4.0,
         "impulse_candidates": [-1.0, 1.0]})
    grid = GridSpec((-3.0,), (3.0,), (7,), 4)
    game = build_finite_game(spec, grid, n_steps=4, control_samples=3)
    bw = backward_value(game)
    field = solve(spec, grid,
                  SolveOptions(control_samples=3, snap_to_nodes=True))
    diff = max(float(np.max(np.abs(field.slices[k] - bw[k])))
               for k in range(grid.time_steps + 1))
    report(3, f"matched coarse P2 solve vs backward recursion, "
              f"diff {diff:.2e}", diff <= 1e-12)


def test_criterion_04_restart_identity():
    worst = 0.0
    for name, params in BUILTIN_CASES:
        spec = builtin_problem(name, params)
        grid = GridSpec((-2.0,), (2.0,), (41,), 50)
        for split_k in (10, 25, 40):
            rep = restart_identity_check(spec, grid, SolveOptions(), split_k)
            worst = max(worst, rep.max_discrepancy)
    report(4, f"restart discrepancy {worst:.2e} over 3 problems x 3 splits",
           worst <= 1e-12)


def test_criterion_05_obstacle_inequality(builtin_fields):
    ok = True
    for spec, grid, field in builtin_fields.values():
        rep = check_structural(field, spec, grid)
        ok &= rep.obstacle_passed
    report(5, "v <= N[v] + 1e-12 at every node of every solve output", ok)


def test_criterion_06_growth_envelope(builtin_fields):
    violations = 0
    for spec, grid, field in builtin_fields.values():
        rep = check_structural(field, spec, grid)
        violations += len(rep.growth_violations)
    report(6, f"{violations} envelope violations across built-ins",
           violations == 0)


def test_criterion_07_terminal_limit():
    ok = True
    detail = []
    for name, params in BUILTIN_CASES[1:]:  # P2 and P3
        spec = builtin_problem(name, params)
        gaps = []
        for steps in (25, 50):
            grid = GridSpec((-2.0,), (2.0,), (41,), steps)
            field = solve(spec, grid)
            rep = check_structural(field, spec, grid)
            ok &= bool(rep.terminal_passed)
            gaps.append(rep.terminal_gap)
        ratio = gaps[0] / gaps[1]
        detail.append(f"{name} ratio {ratio:.2f}")
        ok &= 1.4 <= ratio <= 2.6  # halving dt halves the gap, +-30%
    report(7, "terminal gap within L*dt and halves with dt "
              f"({', '.join(detail)})", ok)


def test_criterion_08_transform_equivalence():
    worst = 0.0
    for name, params in BUILTIN_CASES:
        spec = builtin_problem(name, params)
        grid = GridSpec((-2.0,), (2.0,), (41,), 50)  # dt = 0.02
        direct = solve(spec, grid)
        mapped = solve_transformed(spec, grid)
        worst = max(worst, max(
            float(np.max(np.abs(a - b)))
            for a, b in zip(direct.slices, mapped.slices)))
    report(8, f"direct vs transformed max diff {worst:.2e}", worst <= 1e-8)


def test_criterion_09_residual_refinement():
    start = time.perf_counter()
    spec = builtin_problem("P2_adversarial_drift",
                           {"alpha": 0.5, "beta": 0.1})
    norms = []
    for nodes, steps in [(31, 25), (61, 50), (121, 100)]:
        grid = GridSpec((-3.0,), (3.0,), (nodes,), steps)
        field = solve(spec, grid)
        norms.append(qvi_residual(field, spec, grid).max_residual)
    factors = [norms[0] / norms[1], norms[1] / norms[2]]
    elapsed = time.perf_counter() - start
    ok = all(1.4 <= f <= 2.8 for f in factors) and elapsed < 120.0
    report(9, f"residual max-norms {[f'{n:.3f}' for n in norms]}, "
              f"refinement factors {[f'{f:.2f}' for f in factors]}, "
              f"{elapsed:.0f}s", ok)


def test_criterion_10_divergence_bound():
    passed = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        name, params = BUILTIN_CASES[seed % 3]
        spec = builtin_problem(name, params)
        cands = spec.impulse_array()[:, 0]
        n_jumps = int(rng.integers(0, 4))
        times = np.sort(rng.uniform(0.05, 0.95, n_jumps))
        values = [[float(rng.choice(cands))] for _ in range(n_jumps)]
        sched = ImpulseSchedule.from_lists(times, values)
        if spec.control_set.is_finite:
            control = ControlPath.constant(0.0, [0.0])
        else:
            control = ControlPath(
                (0.0, 0.5), ((float(rng.uniform(-1, 1)),),
                             (float(rng.uniform(-1, 1)),)))
        x0a = float(rng.uniform(-2.0, 2.0))
        x0b = x0a + float(rng.uniform(0.1, 1.0))
        a = integrate(spec, [x0a], control, sched, 0.05)
        b = integrate(spec, [x0b], control, sched, 0.05)
        passed += divergence_check(spec, a, b).passed
    report(10, f"{passed}/100 seeded trajectory pairs within the bound",
           passed == 100)


def test_criterion_11_terminal_monotonicity():
    violations = 0
    for name, params in BUILTIN_CASES:
        spec = builtin_problem(name, params)
        grid = GridSpec((-2.0,), (2.0,), (41,), 25)
        base = solve(spec, grid)
        G = spec.terminal_cost
        up = solve(replace(spec, terminal_cost=lambda x, G=G: G(x) + 0.1),
                   grid)
        down = solve(replace(spec, terminal_cost=lambda x, G=G: G(x) - 0.1),
                     grid)
        for b, u, d in zip(base.slices, up.slices, down.slices):
            violations += int(np.sum(u < b)) + int(np.sum(d > b))
    report(11, f"{violations} monotonicity violations under +-0.1 "
               "terminal shifts", violations == 0)


def test_criterion_12_jump_cap(builtin_fields):
    ok = True
    for spec, grid, field in builtin_fields.values():
        bounds = [max_jump_bound(spec, x) for x in grid.node_array()]
        for pol in field.policies:
            for bound, chain in zip(bounds, pol):
                ok &= len(chain) <= bound
    spec, grid, field = builtin_fields["P1_null_flow"]
    sched = play_policy(spec, field, [2.0], ControlPath.constant(0.0, [0.0]))
    ok &= sched.n_jumps <= max_jump_bound(spec, [2.0])
    report(12, "policy chains and played trajectories respect the jump cap",
           ok)
