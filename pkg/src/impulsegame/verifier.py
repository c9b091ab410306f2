"""Certification of a solved value field against the variational system.

Two layers of checks:

* equation residual: at interior nodes, the max of the Hamiltonian branch
  (min over controls of -D_t v - D_x v . f - psi, with forward time
  differences and central space differences) and the obstacle branch
  (v - N[v]).  For a monotone consistent scheme this residual is the
  computable surrogate for the viscosity-solution property; smooth
  test-function machinery is not computable on a grid.
* structural bounds: the obstacle inequality v <= N[v], a linear-growth
  envelope derived from the model constants, and the terminal-limit gap
  between the last interior slice and the effective terminal slice.

Boundary-ring nodes are excluded from the equation residual (clamping
pollutes one-sided stencils) and reported separately.  The verifier never
modifies the field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import GridSpec
from .intervention import FP_TOL, apply_N, terminal_value_G1
from .model import ProblemSpec
from .solver import ValueField


@dataclass
class ResidualReport:
    """Equation-residual and structural-bound summary for one field."""

    max_residual: float = np.nan
    quantiles: dict = field(default_factory=dict)
    boundary_max_residual: float = np.nan
    interior_count: int = 0
    obstacle_violations: list = field(default_factory=list)
    growth_violations: list = field(default_factory=list)
    growth_envelope_const: float = np.nan
    lower_bound: float = np.nan
    terminal_gap: float = np.nan
    terminal_bound: float = np.nan
    clamp_count: int = 0
    obstacle_passed: bool = True
    growth_passed: bool = True
    terminal_passed: bool = True
    rows: list = field(default_factory=list)  # (level, node, residual) when collected

    def as_dict(self):
        return {
            "max_residual": float(self.max_residual),
            "quantiles": {f"p{k}": float(v) for k, v in self.quantiles.items()},
            "boundary_max_residual": float(self.boundary_max_residual),
            "interior_count": self.interior_count,
            "n_obstacle_violations": len(self.obstacle_violations),
            "n_growth_violations": len(self.growth_violations),
            "growth_envelope_const": float(self.growth_envelope_const),
            "lower_bound": float(self.lower_bound),
            "terminal_gap": float(self.terminal_gap),
            "terminal_bound": float(self.terminal_bound),
            "clamp_count": self.clamp_count,
            "obstacle_passed": self.obstacle_passed,
            "growth_passed": self.growth_passed,
            "terminal_passed": self.terminal_passed,
        }


def _interior_mask(grid: GridSpec) -> np.ndarray:
    mask = np.ones(grid.shape, dtype=bool)
    for axis in range(grid.dim):
        sl = [slice(None)] * grid.dim
        sl[axis] = 0
        mask[tuple(sl)] = False
        sl[axis] = -1
        mask[tuple(sl)] = False
    return mask.reshape(-1)


def _check_field(field_: ValueField, spec: ProblemSpec, grid: GridSpec):
    if field_.spec_fingerprint != spec.fingerprint():
        raise ValueError("field metadata does not match the problem")
    if len(field_.slices) != grid.time_steps + 1:
        raise ValueError("field slice count does not match the grid")
    if field_.slices[0].shape[0] != grid.n_nodes:
        raise ValueError("field slice size does not match the grid")


def qvi_residual(field_: ValueField, spec: ProblemSpec,
                 grid: GridSpec, collect_rows: bool = False) -> ResidualReport:
    """Per-node interior residual of the variational system.

    Time derivatives use the forward difference (v_{k+1} - v_k) / dt, space
    derivatives central differences; the control min runs over the same
    discretized control set as the solver and the obstacle uses the same
    intervention operator.
    """
    _check_field(field_, spec, grid)
    dt = grid.dt(spec.t0, spec.T)
    controls = spec.control_set.candidates(
        field_.options.control_samples if not spec.control_set.is_finite else None)
    nodes = grid.node_array()
    interior = _interior_mask(grid)
    axes_spacing = grid.spacing()

    all_interior = []
    all_boundary = []
    rows: list = []
    for k in range(field_.k_steps):
        t = float(field_.times[k])
        vk = field_.slices[k]
        dvdt = (field_.slices[k + 1] - vk) / dt
        shaped = vk.reshape(grid.shape)
        grads = np.gradient(shaped, *axes_spacing) if grid.dim > 1 else [
            np.gradient(shaped, axes_spacing[0])
        ]
        grads = [g.reshape(-1) for g in np.atleast_1d(grads)]
        ham = np.full(grid.n_nodes, np.inf)
        for tau in controls:
            f = spec.dynamics(t, nodes, tau)
            adv = sum(grads[j] * f[:, j] for j in range(grid.dim))
            expr = -dvdt - adv - spec.running_cost(t, nodes, tau)
            np.minimum(ham, expr, out=ham)
        obstacle = vk - apply_N(vk, t, spec, grid,
                                snap=field_.options.snap_to_nodes).values
        residual = np.maximum(ham, obstacle)
        all_interior.append(residual[interior])
        all_boundary.append(residual[~interior])
        if collect_rows:
            for i in np.flatnonzero(interior):
                rows.append((k, int(i), float(residual[i])))

    flat = np.abs(np.concatenate(all_interior))
    boundary = np.abs(np.concatenate(all_boundary)) if all_boundary else np.array([0.0])
    report = ResidualReport(
        max_residual=float(np.max(flat)),
        quantiles={q: float(np.quantile(flat, q / 100)) for q in (50, 90, 99)},
        boundary_max_residual=float(np.max(boundary)),
        interior_count=int(flat.size),
        clamp_count=field_.clamp_count,
        rows=rows,
    )
    return report


def growth_envelope_const(spec: ProblemSpec) -> float:
    """Linear-growth coefficient implied by the no-impulse strategy bound."""
    horizon = spec.T - spec.t0
    return spec.growth_const * np.exp(spec.growth_const * horizon) * (1.0 + horizon)


def check_structural(field_: ValueField, spec: ProblemSpec,
                     grid: GridSpec, fp_tol: float = FP_TOL) -> ResidualReport:
    """Obstacle inequality, growth envelope, and terminal-limit gap."""
    _check_field(field_, spec, grid)
    nodes = grid.node_array()
    dt = grid.dt(spec.t0, spec.T)
    controls = spec.control_set.candidates(
        field_.options.control_samples if not spec.control_set.is_finite else None)

    report = ResidualReport(clamp_count=field_.clamp_count)

    # (i) obstacle: v <= N[v] + fp_tol at every node of every slice
    for k, vk in enumerate(field_.slices):
        t = float(field_.times[k])
        gap = vk - apply_N(vk, t, spec, grid,
                           snap=field_.options.snap_to_nodes).values
        bad = np.flatnonzero(gap > fp_tol)
        for i in bad:
            report.obstacle_violations.append((k, int(i), float(gap[i])))
    report.obstacle_passed = not report.obstacle_violations

    # (ii) growth envelope from the model constants
    C_v = growth_envelope_const(spec)
    psi_min = min(
        float(np.min(spec.running_cost(float(t), nodes, tau)))
        for t in field_.times for tau in controls
    )
    lower = (spec.T - spec.t0) * min(psi_min, 0.0) + float(
        np.min(spec.terminal_cost(nodes)))
    upper_env = C_v * (1.0 + np.linalg.norm(nodes, axis=1))
    for k, vk in enumerate(field_.slices):
        bad = np.flatnonzero((vk < lower - 1e-9) | (vk > upper_env + 1e-9))
        for i in bad:
            report.growth_violations.append((k, int(i), float(vk[i])))
    report.growth_passed = not report.growth_violations
    report.growth_envelope_const = C_v
    report.lower_bound = lower

    # (iii) terminal limit: |v(t_{K-1}) - terminal slice| <= L_spec * dt
    term = field_.slices[-1]
    dq = 0.0
    shaped = term.reshape(grid.shape)
    for axis in range(grid.dim):
        d = np.abs(np.diff(shaped, axis=axis)) / grid.spacing()[axis]
        if d.size:
            dq = max(dq, float(np.max(d)))
    box_radius = max(np.max(np.abs(grid.lower)), np.max(np.abs(grid.upper)))
    L_spec = spec.growth_const * (1.0 + box_radius) * (1.0 + dq)
    gap = float(np.max(np.abs(field_.slices[-2] - term)))
    report.terminal_gap = gap
    report.terminal_bound = L_spec * dt
    report.terminal_passed = gap <= L_spec * dt + 1e-12
    return report
