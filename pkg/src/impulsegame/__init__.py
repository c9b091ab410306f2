"""Numerical solver for finite-horizon minimax impulse-control games.

A maximizing player steers a deterministic flow with a measurable control;
a minimizing player intervenes through costly impulses.  The package
solves the backward dynamic-programming recursion for the lower value on
a space-time grid, certifies the output against the structural properties
of the value function (obstacle inequality, growth envelope, terminal
limit, restart identity), and cross-checks the recursion logic against a
brute-force enumeration oracle on exact finite games.
"""

from .errors import (
    BlowUpError,
    ConfigError,
    GuardExceededError,
    ImpulseGameError,
    ModelEvaluationError,
)
from .estimator import ImpulseGameSolver
from .grids import GridSpec
from .intervention import (
    apply_N,
    impulse_fixed_point,
    max_jump_bound,
    terminal_value_G1,
)
from .model import (
    BUILTIN_NAMES,
    ControlSet,
    ProblemSpec,
    ValidationReport,
    builtin_problem,
    validate_spec,
)
from .oracle import (
    FiniteGame,
    backward_value,
    build_finite_game,
    enumerate_value,
    seeded_corpus,
)
from .serialize import load_field, save_field
from .solver import (
    RestartReport,
    SolveOptions,
    ValueField,
    restart_identity_check,
    solve,
    solve_transformed,
)
from .trajectory import (
    ControlPath,
    DivergenceReport,
    ImpulseSchedule,
    TrajectoryRecord,
    divergence_check,
    integrate,
    payoff,
)
from .verifier import (
    ResidualReport,
    check_structural,
    growth_envelope_const,
    qvi_residual,
)

__all__ = [
    "BUILTIN_NAMES",
    "BlowUpError",
    "ConfigError",
    "ControlPath",
    "ControlSet",
    "DivergenceReport",
    "FiniteGame",
    "GridSpec",
    "GuardExceededError",
    "ImpulseGameError",
    "ImpulseGameSolver",
    "ImpulseSchedule",
    "ModelEvaluationError",
    "ProblemSpec",
    "ResidualReport",
    "RestartReport",
    "SolveOptions",
    "TrajectoryRecord",
    "ValidationReport",
    "ValueField",
    "apply_N",
    "backward_value",
    "build_finite_game",
    "builtin_problem",
    "check_structural",
    "divergence_check",
    "enumerate_value",
    "growth_envelope_const",
    "impulse_fixed_point",
    "integrate",
    "load_field",
    "max_jump_bound",
    "payoff",
    "qvi_residual",
    "restart_identity_check",
    "save_field",
    "seeded_corpus",
    "solve",
    "solve_transformed",
    "terminal_value_G1",
    "validate_spec",
]
