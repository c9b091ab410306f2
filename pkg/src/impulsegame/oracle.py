"""Exact finite games and the brute-force inf-sup oracle.

A finite game lives on an explicit node set with tabulated transitions,
jumps, stage costs and terminal values, so there is no interpolation and
the backward recursion can be checked bit-for-bit against exhaustive
enumeration of non-anticipative minimizer strategies versus open-loop
maximizer control sequences.

Information order inside a step: the minimizer commits its jump chain
before the step's control is revealed (its decision may read only the
control prefix strictly before the step, plus the current state).  The
enumerated payoff is accumulated back-to-front along the realized path so
both routes perform identical float additions.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GuardExceededError
from .grids import GridSpec
from .intervention import max_jump_bound, terminal_value_G1
from .model import ProblemSpec

BUILD_GUARD = 10_000
ENUM_GUARD = 10_000_000


@dataclass
class FiniteGame:
    """Tabulated two-player impulse game on a finite node set.

    Impulse option 0 is always "none" (identity target, zero cost); the
    remaining options cost at least alpha_game.  chain_cap bounds the
    number of successive jumps the minimizer may make within one step.
    If terminal_composed is False, a final jump chain (using the last
    step's jump tables) is allowed before the terminal value applies.
    """

    n_steps: int
    state_coords: np.ndarray  # (S, m), for reference/serialization
    next_table: np.ndarray  # (n_steps, S, C) -> state index
    stage_table: np.ndarray  # (n_steps, S, C)
    jump_table: np.ndarray  # (n_steps, S, I) -> state index; option 0 = none
    jump_cost: np.ndarray  # (n_steps, S, I); cost 0 at option 0
    terminal: np.ndarray  # (S,)
    alpha_game: float
    chain_cap: int
    terminal_composed: bool = True

    def __post_init__(self):
        self.next_table = np.asarray(self.next_table, dtype=int)
        self.stage_table = np.asarray(self.stage_table, dtype=float)
        self.jump_table = np.asarray(self.jump_table, dtype=int)
        self.jump_cost = np.asarray(self.jump_cost, dtype=float)
        self.terminal = np.asarray(self.terminal, dtype=float)
        S = self.n_states
        if np.any(self.jump_table[:, :, 0] != np.arange(S)[None, :]):
            raise ValueError("impulse option 0 must be the identity (none)")
        if np.any(self.jump_cost[:, :, 0] != 0.0):
            raise ValueError("the none option must cost 0")
        if self.jump_cost.shape[2] > 1 and np.any(
                self.jump_cost[:, :, 1:] < self.alpha_game):
            raise ValueError("non-trivial impulse costs must be >= alpha_game")
        if self.alpha_game <= 0:
            raise ValueError("alpha_game must be > 0")
        if self.chain_cap < 1:
            raise ValueError("chain_cap must be >= 1")

    @property
    def n_states(self) -> int:
        return self.next_table.shape[1]

    @property
    def n_controls(self) -> int:
        return self.next_table.shape[2]

    @property
    def n_impulses(self) -> int:
        return self.jump_table.shape[2]

    # -- serialization ------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({
            "n_steps": self.n_steps,
            "state_coords": self.state_coords.tolist(),
            "next_table": self.next_table.tolist(),
            "stage_table": self.stage_table.tolist(),
            "jump_table": self.jump_table.tolist(),
            "jump_cost": self.jump_cost.tolist(),
            "terminal": self.terminal.tolist(),
            "alpha_game": self.alpha_game,
            "chain_cap": self.chain_cap,
            "terminal_composed": self.terminal_composed,
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "FiniteGame":
        d = json.loads(text)
        return cls(
            n_steps=d["n_steps"],
            state_coords=np.asarray(d["state_coords"], dtype=float),
            next_table=np.asarray(d["next_table"]),
            stage_table=np.asarray(d["stage_table"]),
            jump_table=np.asarray(d["jump_table"]),
            jump_cost=np.asarray(d["jump_cost"]),
            terminal=np.asarray(d["terminal"]),
            alpha_game=d["alpha_game"],
            chain_cap=d["chain_cap"],
            terminal_composed=d["terminal_composed"],
        )


def build_finite_game(spec: ProblemSpec, coarse_grid: GridSpec, n_steps: int,
                      control_samples: int, impulse_subset=None) -> FiniteGame:
    """Discretize a problem into an exact finite game.

    States are the grid nodes; the flow step and jump targets are snapped
    to the nearest node (ties to the lower index), so the game is exact
    rather than approximate.  The terminal table is the intervention-
    resolved terminal slice on the same nodes.
    """
    nodes = coarse_grid.node_array()
    S = len(nodes)
    controls = spec.control_set.candidates(
        control_samples if not spec.control_set.is_finite else None)
    if S * n_steps * len(controls) > BUILD_GUARD:
        raise GuardExceededError(
            f"finite-game build guard exceeded: {S} states x {n_steps} steps "
            f"x {len(controls)} controls > {BUILD_GUARD}")
    impulses = spec.impulse_array()
    if impulse_subset is not None:
        impulses = np.atleast_2d(np.asarray(impulse_subset, dtype=float))
    dt = (spec.T - spec.t0) / n_steps
    times = spec.t0 + dt * np.arange(n_steps)

    C = len(controls)
    I = len(impulses) + 1
    next_table = np.empty((n_steps, S, C), dtype=int)
    stage_table = np.empty((n_steps, S, C))
    jump_table = np.empty((n_steps, S, I), dtype=int)
    jump_cost = np.zeros((n_steps, S, I))
    for k, t in enumerate(times):
        t = float(t)
        for c, tau in enumerate(controls):
            targets = nodes + spec.dynamics(t, nodes, tau) * dt
            next_table[k, :, c], _ = coarse_grid.snap(targets)
            stage_table[k, :, c] = spec.running_cost(t, nodes, tau) * dt
        jump_table[k, :, 0] = np.arange(S)
        for i, xi in enumerate(impulses, start=1):
            targets = nodes + spec.jump_map(t, nodes, xi)
            jump_table[k, :, i], _ = coarse_grid.snap(targets)
            jump_cost[k, :, i] = spec.impulse_cost(t, nodes, xi)

    terminal = terminal_value_G1(spec, coarse_grid, snap=True).values
    cap = max(max_jump_bound(spec, x) for x in nodes)
    return FiniteGame(
        n_steps=n_steps,
        state_coords=nodes,
        next_table=next_table,
        stage_table=stage_table,
        jump_table=jump_table,
        jump_cost=jump_cost,
        terminal=terminal,
        alpha_game=spec.alpha,
        chain_cap=cap,
        terminal_composed=True,
    )


def _chain_expand(game: FiniteGame, k: int, w: np.ndarray) -> np.ndarray:
    """Exact min over jump chains of length <= chain_cap acting on w."""
    w = w.copy()
    S = game.n_states
    for _ in range(game.chain_cap):
        candidates = w[game.jump_table[k, :, 1:]] + game.jump_cost[k, :, 1:]
        if candidates.size == 0:
            break
        best = np.min(candidates, axis=1)
        if np.all(best >= w):
            break
        np.minimum(w, best, out=w)
    return w


def backward_value(game: FiniteGame) -> np.ndarray:
    """Backward recursion value, shape (n_steps + 1, n_states)."""
    S = game.n_states
    v = np.empty((game.n_steps + 1, S))
    term = game.terminal
    if not game.terminal_composed:
        term = _chain_expand(game, game.n_steps - 1, term)
    v[game.n_steps] = term
    for k in range(game.n_steps - 1, -1, -1):
        cont = np.max(game.stage_table[k] + v[k + 1][game.next_table[k]], axis=1)
        v[k] = _chain_expand(game, k, cont)
    return v


def _chains(game: FiniteGame, k: int, state: int):
    """All jump chains of length <= chain_cap starting at a state, as
    (tuple of option indices) with option 0 (none) encoded as ()."""
    out = [()]
    frontier = [((), state)]
    for _ in range(game.chain_cap):
        nxt = []
        for chain, s in frontier:
            for i in range(1, game.n_impulses):
                c2 = chain + (i,)
                nxt.append((c2, int(game.jump_table[k, s, i])))
                out.append(c2)
        frontier = nxt
    return out


def _play_chain(game: FiniteGame, k: int, state: int, chain):
    """Apply a jump chain; returns (post state, chronological cost list)."""
    costs = []
    s = state
    for i in chain:
        costs.append(float(game.jump_cost[k, s, i]))
        s = int(game.jump_table[k, s, i])
    return s, costs


def enumerate_value(game: FiniteGame, start_state: int) -> float:
    """Brute-force inf over strategy tables of sup over control sequences.

    A strategy table assigns, per step, a jump chain to every pair of
    (control prefix strictly before the step, reachable state).  Payoffs
    are accumulated from the terminal value backwards along each realized
    path so the additions associate exactly as in backward_value.
    """
    n, S, C = game.n_steps, game.n_states, game.n_controls
    cells = []  # (step, prefix) in enumeration order
    for k in range(n):
        for prefix in itertools.product(range(C), repeat=k):
            for s in range(S):
                cells.append((k, prefix, s))
    # Guard before materializing: every cell has the same chain count,
    # sum over lengths 0..cap of (real impulse options)^length.
    n_real = game.n_impulses - 1
    chains_per_cell = sum(n_real ** l for l in range(game.chain_cap + 1))
    n_strategies = chains_per_cell ** len(cells)
    if n_strategies * C ** n > ENUM_GUARD:
        raise GuardExceededError(
            f"enumeration guard exceeded: {n_strategies} strategies x "
            f"{C ** n} control sequences > {ENUM_GUARD}")
    chain_sets = [_chains(game, k, s) for (k, _, s) in cells]
    cell_index = {(k, prefix, s): j for j, (k, prefix, s) in enumerate(cells)}

    best = math.inf
    for decision in itertools.product(*chain_sets):
        worst = -math.inf
        for controls in itertools.product(range(C), repeat=n):
            cost_groups = []  # chronological (chain costs..., stage cost) per step
            s = start_state
            for k in range(n):
                chain = decision[cell_index[(k, controls[:k], s)]]
                s, chain_costs = _play_chain(game, k, s, chain)
                stage = float(game.stage_table[k, s, controls[k]])
                cost_groups.append(chain_costs + [stage])
                s = int(game.next_table[k, s, controls[k]])
            if game.terminal_composed:
                acc = float(game.terminal[s])
            else:
                acc = float(_chain_expand(game, n - 1, game.terminal)[s])
            for group in reversed(cost_groups):
                for c in reversed(group):
                    acc = c + acc
            worst = max(worst, acc)
        best = min(best, worst)
    return best


def seeded_corpus(n_games: int = 12, seed: int = 2024) -> list[FiniteGame]:
    """Small random games with dyadic tables (sums are exact in floats)."""
    rng = np.random.default_rng(seed)
    games = []
    for _ in range(n_games):
        S, C, n = 2, 2, 2
        n_imp = 2  # none + one real impulse
        next_table = rng.integers(0, S, size=(n, S, C))
        stage_table = rng.integers(0, 32, size=(n, S, C)) / 64.0
        jump_table = np.empty((n, S, n_imp), dtype=int)
        jump_table[:, :, 0] = np.arange(S)[None, :]
        jump_table[:, :, 1] = rng.integers(0, S, size=(n, S))
        jump_cost = np.zeros((n, S, n_imp))
        jump_cost[:, :, 1] = (16 + rng.integers(0, 48, size=(n, S))) / 64.0
        terminal = rng.integers(0, 64, size=S) / 64.0
        games.append(FiniteGame(
            n_steps=n,
            state_coords=np.arange(S, dtype=float)[:, None],
            next_table=next_table,
            stage_table=stage_table,
            jump_table=jump_table,
            jump_cost=jump_cost,
            terminal=terminal,
            alpha_game=0.25,
            chain_cap=1,
            terminal_composed=True,
        ))
    return games
