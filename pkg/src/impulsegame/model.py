"""Game datum: dynamics, costs, control/impulse sets, and assumption checks.

The model is a two-player finite-horizon game on [t0, T].  A maximizing
player picks a measurable control path with values in a compact set; a
minimizing player intervenes through impulses that displace the state
through a jump map, each intervention costing at least alpha > 0.

All model callables are batched over states: they receive an (n, m) state
array and return (n, m) vectors (dynamics, jump map) or (n,) scalars
(running, impulse and terminal costs).  Control and impulse arguments are
single vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import ConfigError, ModelEvaluationError


class ControlSet:
    """Compact control set: either a finite candidate list or a box.

    A box is discretized by uniform per-axis sampling; the sample count
    can be overridden at solve time (a convergence knob).
    """

    def __init__(self, points=None, box_lower=None, box_upper=None, samples=None):
        if (points is None) == (box_lower is None):
            raise ValueError("give either a finite point list or box bounds")
        if points is not None:
            pts = np.atleast_2d(np.asarray(points, dtype=float))
            if pts.shape[0] < 1:
                raise ValueError("control set needs at least one point")
            self.points = pts
            self.box_lower = self.box_upper = self.samples = None
        else:
            self.points = None
            self.box_lower = np.atleast_1d(np.asarray(box_lower, dtype=float))
            self.box_upper = np.atleast_1d(np.asarray(box_upper, dtype=float))
            if np.any(self.box_lower > self.box_upper):
                raise ValueError("control box needs lower <= upper")
            self.samples = tuple(samples) if samples is not None else (3,) * len(self.box_lower)

    @classmethod
    def finite(cls, points):
        return cls(points=points)

    @classmethod
    def box(cls, lower, upper, samples=None):
        return cls(box_lower=lower, box_upper=upper, samples=samples)

    @property
    def is_finite(self) -> bool:
        return self.points is not None

    def candidates(self, samples_per_axis: int | None = None) -> np.ndarray:
        """Discretized control candidates, shape (n_candidates, ctrl_dim)."""
        if self.points is not None:
            return self.points
        counts = (
            (samples_per_axis,) * len(self.box_lower)
            if samples_per_axis is not None
            else self.samples
        )
        axes = [
            np.linspace(lo, hi, max(1, int(n)))
            for lo, hi, n in zip(self.box_lower, self.box_upper, counts)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)


@dataclass(frozen=True)
class ProblemSpec:
    """Complete datum of one impulse game.

    growth_const bounds |f| + |g|, |psi|, |G| and the impulse cost by
    growth_const * (1 + |x|); lipschitz_const bounds spatial difference
    quotients of f and g; alpha is the uniform lower bound on the impulse
    cost.  impulse_candidates is the finite discretization of the jump
    values (zero excluded: a zero jump is "no jump").
    """

    t0: float
    T: float
    state_dim: int
    dynamics: Callable
    jump_map: Callable
    running_cost: Callable
    impulse_cost: Callable
    terminal_cost: Callable
    control_set: ControlSet
    impulse_candidates: tuple[tuple[float, ...], ...]
    alpha: float
    growth_const: float
    lipschitz_const: float
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.t0 < self.T:
            raise ValueError("need 0 <= t0 < T")
        if self.state_dim < 1:
            raise ValueError("state_dim must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.growth_const < 0 or self.lipschitz_const < 0:
            raise ValueError("growth and Lipschitz constants must be >= 0")
        for xi in self.impulse_candidates:
            if len(xi) != self.state_dim:
                raise ValueError("impulse candidate dimension mismatch")
            if all(c == 0.0 for c in xi):
                raise ValueError("impulse candidates must be nonzero")

    def impulse_array(self) -> np.ndarray:
        if not self.impulse_candidates:
            return np.zeros((0, self.state_dim))
        return np.asarray(self.impulse_candidates, dtype=float)

    def fingerprint(self) -> str:
        import hashlib

        key = repr((self.name, sorted(self.params.items()), self.t0, self.T,
                    self.state_dim, self.impulse_candidates, self.alpha,
                    self.growth_const, self.lipschitz_const))
        return hashlib.sha256(key.encode()).hexdigest()[:16]


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst_ratio: float
    witnesses: list

    def as_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "worst_ratio": self.worst_ratio,
            "witnesses": [list(map(float, w)) for w in self.witnesses[:5]],
        }


@dataclass
class ValidationReport:
    """Per-assumption sampled check results plus the sampling seed."""

    checks: list[CheckResult]
    seed: int
    sample_budget: int
    sample_radius: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self):
        return {
            "passed": self.passed,
            "seed": self.seed,
            "sample_budget": self.sample_budget,
            "sample_radius": self.sample_radius,
            "checks": [c.as_dict() for c in self.checks],
        }


def _require_finite(name, arr, where):
    arr = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(np.atleast_1d(arr)))[0]
        raise ModelEvaluationError(
            f"model evaluation failure: {name} returned a non-finite value",
            witness=where,
        )
    return arr


def validate_spec(spec: ProblemSpec, sample_budget: int, seed: int = 0,
                  sample_radius: float = 5.0) -> ValidationReport:
    """Check the standing assumptions on a deterministic low-discrepancy sample.

    Four groups are checked: (1) growth and spatial Lipschitz bounds of the
    dynamics and jump map, (2) impulse-cost bounds (>= alpha and linear
    growth), (3) running-cost growth, (4) terminal-cost growth.  The Halton
    seed is recorded so the report is reproducible.
    """
    if sample_budget < 1:
        raise ValueError("sample_budget must be >= 1")
    m = spec.state_dim
    sampler = qmc.Halton(d=1 + 2 * m, scramble=True, seed=seed)
    u = sampler.random(sample_budget)
    ts = spec.t0 + u[:, 0] * (spec.T - spec.t0)
    xs = (2.0 * u[:, 1:1 + m] - 1.0) * sample_radius
    # Perturbation directions for difference quotients.
    dxs = (2.0 * u[:, 1 + m:] - 1.0) * 1e-3 * sample_radius
    dxs[np.all(dxs == 0.0, axis=1)] = 1e-6

    controls = spec.control_set.candidates()
    impulses = spec.impulse_array()
    slack = 1e-9

    fg_growth_worst, fg_lip_worst = 0.0, 0.0
    fg_witness, lip_witness = [], []
    cost_alpha_worst, cost_growth_worst = np.inf, 0.0
    cost_witness_a, cost_witness_g = [], []
    psi_worst, psi_witness = 0.0, []
    g_worst, g_witness = 0.0, []

    for t, x, dx in zip(ts, xs, dxs):
        X = x[None, :]
        X2 = (x + dx)[None, :]
        envelope = spec.growth_const * (1.0 + np.linalg.norm(x))
        fmax = 0.0
        for tau in controls:
            f = _require_finite("dynamics", spec.dynamics(t, X, tau), (t, *x))
            f2 = _require_finite("dynamics", spec.dynamics(t, X2, tau), (t, *x))
            fmax = max(fmax, float(np.linalg.norm(f)))
            psi = _require_finite("running_cost", spec.running_cost(t, X, tau), (t, *x))
            r = abs(float(psi[0])) / max(envelope, 1e-300)
            if r > psi_worst:
                psi_worst = r
                if r > 1.0:
                    psi_witness.append((t, *x))
            q = (float(np.linalg.norm(f - f2))
                 / max(np.linalg.norm(dx), 1e-300))
            if q > fg_lip_worst + 0 and q > spec.lipschitz_const + slack:
                lip_witness.append((t, *x))
            fg_lip_worst = max(fg_lip_worst, q)
        gmax = 0.0
        for xi in impulses:
            g = _require_finite("jump_map", spec.jump_map(t, X, xi), (t, *x))
            g2 = _require_finite("jump_map", spec.jump_map(t, X2, xi), (t, *x))
            gmax = max(gmax, float(np.linalg.norm(g)))
            q = (float(np.linalg.norm(g - g2))
                 / max(np.linalg.norm(dx), 1e-300))
            if q > spec.lipschitz_const + slack:
                lip_witness.append((t, *x))
            fg_lip_worst = max(fg_lip_worst, q)
            c = _require_finite("impulse_cost", spec.impulse_cost(t, X, xi), (t, *x))
            c0 = float(c[0])
            if c0 < cost_alpha_worst:
                cost_alpha_worst = c0
                if c0 < spec.alpha:
                    cost_witness_a.append((t, *x))
            r = abs(c0) / max(envelope, 1e-300)
            if r > cost_growth_worst:
                cost_growth_worst = r
                if r > 1.0:
                    cost_witness_g.append((t, *x))
        r = (fmax + gmax) / max(envelope, 1e-300)
        if r > fg_growth_worst:
            fg_growth_worst = r
            if r > 1.0:
                fg_witness.append((t, *x))
        G = _require_finite("terminal_cost", spec.terminal_cost(X), (t, *x))
        r = abs(float(G[0])) / max(envelope, 1e-300)
        if r > g_worst:
            g_worst = r
            if r > 1.0:
                g_witness.append((t, *x))

    checks = [
        CheckResult("dynamics_jump_growth", fg_growth_worst <= 1.0 + slack,
                    fg_growth_worst, fg_witness),
        CheckResult("dynamics_jump_lipschitz",
                    fg_lip_worst <= spec.lipschitz_const + slack,
                    fg_lip_worst, lip_witness),
        CheckResult("impulse_cost_alpha",
                    (not len(impulses)) or cost_alpha_worst >= spec.alpha,
                    cost_alpha_worst if len(impulses) else spec.alpha,
                    cost_witness_a),
        CheckResult("impulse_cost_growth", cost_growth_worst <= 1.0 + slack,
                    cost_growth_worst, cost_witness_g),
        CheckResult("running_cost_growth", psi_worst <= 1.0 + slack,
                    psi_worst, psi_witness),
        CheckResult("terminal_cost_growth", g_worst <= 1.0 + slack,
                    g_worst, g_witness),
    ]
    return ValidationReport(checks=checks, seed=seed,
                            sample_budget=sample_budget,
                            sample_radius=sample_radius)


# ---------------------------------------------------------------------------
# Built-in benchmark problems
# ---------------------------------------------------------------------------

BUILTIN_NAMES = ("P1_null_flow", "P2_adversarial_drift", "P3_cash_management")

_DEFAULT_CANDIDATES = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)


def _cand_tuple(params):
    cands = params.get("impulse_candidates", _DEFAULT_CANDIDATES)
    out = []
    for c in cands:
        if np.ndim(c) == 0:
            out.append((float(c),))
        else:
            out.append(tuple(float(v) for v in c))
    return tuple(out)


def _require(params, keys, name):
    for k in keys:
        if k not in params:
            raise ConfigError(f"builtin problem {name} requires parameter '{k}'")


def builtin_problem(name: str, params: dict) -> ProblemSpec:
    """Construct one of the shipped benchmark problems.

    P1_null_flow: zero drift and running cost, jumps displace by the
    impulse value at constant cost alpha, terminal cost |x|.
    P2_adversarial_drift: the maximizer steers with speed in [-1, 1],
    impulse cost alpha + beta * |xi|, terminal cost |x|.
    P3_cash_management: degenerate single control (pure impulse control),
    constant drift mu, holding cost h * |x|, intervention cost
    kappa + k * |xi|, terminal cost h * |x|.
    """
    params = dict(params)
    t0 = float(params.get("t0", 0.0))
    T = float(params.get("T", 1.0))
    cands = _cand_tuple(params)
    max_xi = max((abs(c[0]) for c in cands), default=0.0)

    if name == "P1_null_flow":
        _require(params, ("alpha",), name)
        alpha = float(params["alpha"])

        def f(t, x, tau):
            return np.zeros_like(x)

        def g(t, x, xi):
            return np.broadcast_to(np.asarray(xi, dtype=float), x.shape).copy()

        def psi(t, x, tau):
            return np.zeros(x.shape[0])

        def cost(t, x, xi):
            return np.full(x.shape[0], alpha)

        def G(x):
            return np.linalg.norm(x, axis=1)

        growth = max(max_xi, 1.0, alpha)
        return ProblemSpec(t0, T, 1, f, g, psi, cost, G,
                           ControlSet.finite([[0.0]]), cands,
                           alpha=alpha, growth_const=growth,
                           lipschitz_const=0.0, name=name, params=params)

    if name == "P2_adversarial_drift":
        _require(params, ("alpha",), name)
        alpha = float(params["alpha"])
        beta = float(params.get("beta", 0.0))

        def f(t, x, tau):
            return np.broadcast_to(np.asarray(tau, dtype=float), x.shape).copy()

        def g(t, x, xi):
            return np.broadcast_to(np.asarray(xi, dtype=float), x.shape).copy()

        def psi(t, x, tau):
            return np.zeros(x.shape[0])

        def cost(t, x, xi):
            return np.full(x.shape[0], alpha + beta * float(np.linalg.norm(xi)))

        def G(x):
            return np.linalg.norm(x, axis=1)

        growth = max(1.0 + max_xi, alpha + beta * max_xi, 1.0)
        return ProblemSpec(t0, T, 1, f, g, psi, cost, G,
                           ControlSet.box([-1.0], [1.0]), cands,
                           alpha=alpha, growth_const=growth,
                           lipschitz_const=0.0, name=name, params=params)

    if name == "P3_cash_management":
        _require(params, ("kappa", "k", "mu", "h"), name)
        kappa = float(params["kappa"])
        k = float(params["k"])
        mu = float(params["mu"])
        h = float(params["h"])

        def f(t, x, tau):
            return np.full_like(x, mu)

        def g(t, x, xi):
            return np.broadcast_to(np.asarray(xi, dtype=float), x.shape).copy()

        def psi(t, x, tau):
            return h * np.linalg.norm(x, axis=1)

        def cost(t, x, xi):
            return np.full(x.shape[0], kappa + k * float(np.linalg.norm(xi)))

        def G(x):
            return h * np.linalg.norm(x, axis=1)

        growth = max(abs(mu) + max_xi, h, kappa + k * max_xi, 1.0)
        return ProblemSpec(t0, T, 1, f, g, psi, cost, G,
                           ControlSet.finite([[0.0]]), cands,
                           alpha=kappa, growth_const=growth,
                           lipschitz_const=0.0, name=name, params=params)

    raise ConfigError(f"unknown builtin problem '{name}'; "
                      f"known: {', '.join(BUILTIN_NAMES)}")
