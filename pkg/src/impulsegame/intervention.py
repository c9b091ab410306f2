"""Intervention operator on value slices and its bounded fixed point.

The single-jump operator maps a slice w to, at each node x,
min over candidate impulses xi of  w(x + g(t, x, xi)) + cost(t, x, xi),
with off-grid targets clamped to the box.  Because every intervention
costs at least alpha > 0, iterating w <- min(w, N[w]) terminates: each
strict improvement corresponds to one more jump in a chain whose length
is capped by growth_const * (1 + |x|) / alpha at the node.

The terminal slice of a solve is the capped fixed point applied to the
terminal cost itself (jumps at the final instant remain admissible; the
"no jump" option is the identity branch of the min).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grids import GridSpec
from .model import ProblemSpec

FP_TOL = 1e-12


def max_jump_bound(spec: ProblemSpec, x) -> int:
    """Largest chain length consistent with n * alpha <= C (1 + |x|).

    Clamped below at 1 so a single jump is always representable.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = math.floor(spec.growth_const * (1.0 + np.linalg.norm(x)) / spec.alpha)
    return max(1, n)


@dataclass
class InterventionResult:
    """Slice after one operator application plus per-node bookkeeping."""

    values: np.ndarray
    best_candidate: np.ndarray  # argmin candidate index per node
    clamped: int


def apply_N(values: np.ndarray, t: float, spec: ProblemSpec,
            grid: GridSpec, snap: bool = False) -> InterventionResult:
    """One application of the intervention operator to a flat slice.

    With no impulse candidates the operator is vacuous (+inf), so the
    min with the input slice is the slice itself.  Ties between
    candidates resolve to the smallest candidate index.
    """
    nodes = grid.node_array()
    cands = spec.impulse_array()
    n = grid.n_nodes
    if len(cands) == 0:
        return InterventionResult(np.full(n, np.inf), np.zeros(n, dtype=int), 0)
    matrix = np.empty((len(cands), n))
    clamped = 0
    for i, xi in enumerate(cands):
        targets = nodes + spec.jump_map(t, nodes, xi)
        vals, c = grid.transport(values, targets, snap=snap)
        matrix[i] = vals + spec.impulse_cost(t, nodes, xi)
        clamped += c
    best = np.argmin(matrix, axis=0)  # first minimum wins
    return InterventionResult(matrix[best, np.arange(n)], best, clamped)


@dataclass
class FixedPointResult:
    """Capped fixed point of w <- min(w, N[w]) with realized jump chains."""

    values: np.ndarray
    chains: list[tuple[int, ...]]  # candidate indices per node; () = continue
    iterations: int
    clamped: int


def impulse_fixed_point(values: np.ndarray, t: float, spec: ProblemSpec,
                        grid: GridSpec, fp_tol: float = FP_TOL,
                        snap: bool = False,
                        node_bounds: np.ndarray | None = None) -> FixedPointResult:
    """Iterate the intervention operator to its capped fixed point.

    Stops when no node improves by more than fp_tol or when the iteration
    count reaches the largest per-node jump bound.  An improvement at a
    node is accepted only if the resulting jump chain respects the bound
    at that node; chains at off-grid targets continue from the nearest
    node of the previous iterate.
    """
    nodes = grid.node_array()
    n = grid.n_nodes
    if node_bounds is None:
        node_bounds = np.array([max_jump_bound(spec, x) for x in nodes])
    max_iter = int(np.max(node_bounds))

    w = np.asarray(values, dtype=float).copy()
    chains: list[tuple[int, ...]] = [() for _ in range(n)]
    cands = spec.impulse_array()
    clamped = 0
    iterations = 0
    if len(cands) == 0:
        return FixedPointResult(w, chains, 0, 0)

    for _ in range(max_iter):
        res = apply_N(w, t, spec, grid, snap=snap)
        clamped += res.clamped
        improved = np.flatnonzero(res.values < w - fp_tol)
        if improved.size == 0:
            break
        iterations += 1
        prev_chains = list(chains)
        any_accepted = False
        for i in improved:
            xi = cands[res.best_candidate[i]]
            target = nodes[i] + spec.jump_map(t, nodes[i][None, :], xi)[0]
            tgt_idx, _ = grid.snap(target[None, :])
            tail = prev_chains[int(tgt_idx[0])]
            if 1 + len(tail) > node_bounds[i]:
                continue  # chain would exceed the jump cap at this node
            w[i] = res.values[i]
            chains[i] = (int(res.best_candidate[i]),) + tail
            any_accepted = True
        if not any_accepted:
            break
    return FixedPointResult(w, chains, iterations, clamped)


def terminal_value_G1(spec: ProblemSpec, grid: GridSpec,
                      fp_tol: float = FP_TOL,
                      snap: bool = False) -> FixedPointResult:
    """Effective terminal slice: capped intervention fixed point of the
    terminal cost sampled on the grid, evaluated at the final time."""
    nodes = grid.node_array()
    terminal = spec.terminal_cost(nodes)
    return impulse_fixed_point(terminal, spec.T, spec, grid,
                               fp_tol=fp_tol, snap=snap)
