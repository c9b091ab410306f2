"""Scikit-learn style front end for the backward impulse-game solver.

`fit` runs the backward sweep for a configured problem and grid; `predict`
evaluates the fitted value surface at (t, x) query points, so the solver
composes with pipelines and model-selection utilities that expect the
estimator protocol.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .grids import GridSpec
from .model import ProblemSpec, builtin_problem, validate_spec
from .solver import SolveOptions, solve


class ImpulseGameSolver(BaseEstimator):
    """Estimator wrapper around the backward value-field solve.

    Parameters mirror the functional API: a built-in problem name (or a
    ready ProblemSpec via the `problem` parameter), grid geometry and
    solve options.  After `fit`, `value_field_` holds the solved field and
    `predict(X)` interpolates it at rows (t, x_1, ..., x_m).
    """

    def __init__(self, problem="P1_null_flow", problem_params=None,
                 lower=(-2.0,), upper=(2.0,), nodes=(101,), time_steps=50,
                 control_samples=3, use_transformed=False,
                 snap_to_nodes=False, validate=True, validation_budget=256):
        self.problem = problem
        self.problem_params = problem_params
        self.lower = lower
        self.upper = upper
        self.nodes = nodes
        self.time_steps = time_steps
        self.control_samples = control_samples
        self.use_transformed = use_transformed
        self.snap_to_nodes = snap_to_nodes
        self.validate = validate
        self.validation_budget = validation_budget

    def _build_spec(self) -> ProblemSpec:
        if isinstance(self.problem, ProblemSpec):
            return self.problem
        return builtin_problem(self.problem, dict(self.problem_params or {}))

    def fit(self, X=None, y=None):
        """Solve the configured problem; X and y are ignored."""
        spec = self._build_spec()
        if self.validate:
            report = validate_spec(spec, self.validation_budget)
            if not report.passed:
                failing = [c.name for c in report.checks if not c.passed]
                raise ValueError(f"model assumptions violated: {failing}")
            self.validation_report_ = report
        grid = GridSpec(tuple(self.lower), tuple(self.upper),
                        tuple(self.nodes), self.time_steps)
        options = SolveOptions(control_samples=self.control_samples,
                               use_transformed=self.use_transformed,
                               snap_to_nodes=self.snap_to_nodes)
        self.spec_ = spec
        self.grid_ = grid
        self.value_field_ = solve(spec, grid, options)
        return self

    def predict(self, X):
        """Value surface at query rows (t, x_1, ..., x_m)."""
        check_is_fitted(self, "value_field_")
        X = check_array(X, ensure_2d=True, dtype=float)
        if X.shape[1] != 1 + self.spec_.state_dim:
            raise ValueError(
                f"expected {1 + self.spec_.state_dim} columns (t, state), "
                f"got {X.shape[1]}")
        return np.array([
            self.value_field_.value_at(None, float(row[0]), row[1:])
            for row in X
        ])

    def policy_at(self, t: float, x):
        """Jump chain (as impulse vectors) the fitted policy takes at (t, x);
        an empty list means continue."""
        check_is_fitted(self, "value_field_")
        field = self.value_field_
        k = int(np.clip(np.searchsorted(field.times, t, side="right") - 1,
                        0, field.k_steps))
        idx, _ = self.grid_.snap(np.atleast_2d(np.asarray(x, dtype=float)))
        chain = field.policies[k][int(idx[0])]
        cands = self.spec_.impulse_array()
        return [cands[i] for i in chain]
