"""Batch front end: solve / simulate / verify / oracle subcommands.

Each subcommand reads one TOML config, writes its artifacts into an output
directory, and exits with a scriptable status: 0 on success, 2 on a config
error, 3 when a numerical check fails, 4 when a tractability guard is
exceeded.  Every run writes a manifest (config echo, package version,
seeds) sufficient to reproduce it.
"""

from __future__ import annotations

import csv
import os
import sys
from importlib.metadata import version as _pkg_version

import click
import numpy as np

from .errors import ConfigError, GuardExceededError, ImpulseGameError
from .grids import GridSpec
from .intervention import max_jump_bound
from .model import ControlSet, ProblemSpec, builtin_problem, validate_spec
from .oracle import FiniteGame, backward_value, enumerate_value, seeded_corpus
from .serialize import load_field, save_field, toml_dump, toml_load
from .solver import SolveOptions, ValueField, solve
from .trajectory import (
    ControlPath,
    ImpulseSchedule,
    integrate,
    record_to_csv,
)
from .verifier import check_structural, qvi_residual

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3
EXIT_GUARD = 4


# ---------------------------------------------------------------------------
# Config ingestion
# ---------------------------------------------------------------------------

def _custom_problem(section: dict) -> ProblemSpec:
    """Problem from coefficient tables: affine drift, additive jumps,
    |x|-proportional running and terminal costs, affine impulse cost."""
    try:
        dim = int(section.get("state_dim", 1))
        t0 = float(section.get("t0", 0.0))
        T = float(section.get("T", 1.0))
        A = np.asarray(section.get("drift_matrix",
                                   np.zeros((dim, dim))), dtype=float)
        b = np.asarray(section.get("drift_offset", np.zeros(dim)), dtype=float)
        B = np.asarray(section.get("control_matrix",
                                   np.eye(dim)), dtype=float)
        run_coef = float(section.get("running_coef", 0.0))
        run_const = float(section.get("running_const", 0.0))
        kappa = float(section["impulse_fixed_cost"])
        k_prop = float(section.get("impulse_prop_cost", 0.0))
        term_coef = float(section.get("terminal_coef", 1.0))
        term_const = float(section.get("terminal_const", 0.0))
        cands = section["impulse_candidates"]
        growth = float(section["growth_const"])
        lips = float(section.get("lipschitz_const",
                                 np.linalg.norm(A, 2) if A.size else 0.0))
        ctrl = section.get("controls")
        ctrl_box = section.get("control_box")
    except KeyError as exc:
        raise ConfigError(f"custom problem is missing field {exc}") from exc

    def f(t, x, tau):
        return x @ A.T + b + np.atleast_1d(np.asarray(tau, dtype=float)) @ B.T

    def g(t, x, xi):
        return np.broadcast_to(np.asarray(xi, dtype=float), x.shape).copy()

    def psi(t, x, tau):
        return run_coef * np.linalg.norm(x, axis=1) + run_const

    def cost(t, x, xi):
        return np.full(x.shape[0], kappa + k_prop * float(np.linalg.norm(xi)))

    def G(x):
        return term_coef * np.linalg.norm(x, axis=1) + term_const

    if ctrl is not None:
        control_set = ControlSet.finite(ctrl)
    elif ctrl_box is not None:
        control_set = ControlSet.box(ctrl_box[0], ctrl_box[1])
    else:
        control_set = ControlSet.finite([[0.0] * B.shape[1]])
    cand_tuples = tuple(
        (float(c),) if np.ndim(c) == 0 else tuple(float(v) for v in c)
        for c in cands
    )
    return ProblemSpec(t0, T, dim, f, g, psi, cost, G, control_set,
                       cand_tuples, alpha=kappa, growth_const=growth,
                       lipschitz_const=lips, name="custom", params={})


def load_problem(config: dict) -> ProblemSpec:
    section = config.get("problem")
    if not isinstance(section, dict):
        raise ConfigError("config needs a [problem] table")
    has_builtin = "builtin" in section
    has_custom = "custom" in section
    if has_builtin == has_custom:
        raise ConfigError(
            "[problem] needs exactly one of 'builtin' or [problem.custom]")
    if has_builtin:
        return builtin_problem(section["builtin"],
                               dict(section.get("params", {})))
    return _custom_problem(section["custom"])


def load_grid(config: dict) -> GridSpec:
    section = config.get("grid")
    if not isinstance(section, dict):
        raise ConfigError("config needs a [grid] table")
    try:
        grid = GridSpec(
            lower=tuple(float(v) for v in section["lower"]),
            upper=tuple(float(v) for v in section["upper"]),
            nodes=tuple(int(v) for v in section["nodes"]),
            time_steps=int(section["time_steps"]),
        )
    except KeyError as exc:
        raise ConfigError(f"grid table is missing field {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc
    return grid


def load_options(config: dict) -> SolveOptions:
    section = config.get("solve", {})
    try:
        return SolveOptions(
            control_samples=int(section.get("control_samples", 3)),
            use_transformed=bool(section.get("use_transformed", False)),
            fp_tol=float(section.get("fp_tol", 1e-12)),
            snap_to_nodes=bool(section.get("snap_to_nodes", False)),
        )
    except ValueError as exc:
        raise ConfigError(f"solve options: {exc}") from exc


def _read_config(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    return toml_load(path)


def _manifest_common(config: dict, seed: int) -> dict:
    return {
        "package_version": _pkg_version("impulsegame"),
        "seed": seed,
        "config": config,
    }


# ---------------------------------------------------------------------------
# Subcommand bodies (exception-raising; the click layer maps to exit codes)
# ---------------------------------------------------------------------------

def _validate_problem(spec: ProblemSpec, config: dict, seed: int):
    budget = int(config.get("solve", {}).get("validation_budget", 256))
    report = validate_spec(spec, budget, seed=seed)
    if not report.passed:
        failing = [c.name for c in report.checks if not c.passed]
        raise CheckFailure(f"model assumption checks failed: {failing}",
                           {"validation": report.as_dict()})
    return report


class CheckFailure(ImpulseGameError):
    """A numerical or structural check failed (exit code 3)."""

    def __init__(self, message, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


def run_solve(config: dict, out_dir: str, seed: int,
              no_verify: bool) -> dict:
    spec = load_problem(config)
    grid = load_grid(config)
    options = load_options(config)
    validation = _validate_problem(spec, config, seed)
    field = solve(spec, grid, options)
    extra = _manifest_common(config, seed)
    extra["validation_passed"] = validation.passed
    extra["verify_skipped"] = bool(no_verify)
    save_field(field, spec, out_dir, extra=extra)

    summary = {
        "n_levels": len(field.slices),
        "n_nodes": grid.n_nodes,
        "clamp_count": field.clamp_count,
        "solve_seconds": field.solve_seconds,
        "value_range": [float(min(np.min(s) for s in field.slices)),
                        float(max(np.max(s) for s in field.slices))],
    }
    if not no_verify:
        structural = check_structural(field, spec, grid, fp_tol=options.fp_tol)
        summary["obstacle_passed"] = structural.obstacle_passed
        summary["growth_passed"] = structural.growth_passed
        summary["terminal_passed"] = structural.terminal_passed
        summary["growth_envelope_const"] = structural.growth_envelope_const
        toml_dump({"summary": summary},
                  os.path.join(out_dir, "solve_report.toml"))
        if not (structural.obstacle_passed and structural.growth_passed
                and structural.terminal_passed):
            raise CheckFailure("structural checks failed on the solved field",
                               summary)
    else:
        toml_dump({"summary": summary},
                  os.path.join(out_dir, "solve_report.toml"))
    return summary


def _control_path(section: dict, spec: ProblemSpec) -> ControlPath:
    bps = section.get("control_breakpoints", [spec.t0])
    vals = section.get("control_values", [[0.0]])
    if len(bps) != len(vals):
        raise ConfigError("control breakpoints and values must align")
    return ControlPath(tuple(float(b) for b in bps),
                       tuple(tuple(np.atleast_1d(np.asarray(v, dtype=float)))
                             for v in vals))


def _schedule(section: dict) -> ImpulseSchedule:
    times = section.get("impulse_times", [])
    values = section.get("impulse_values", [])
    if len(times) != len(values):
        raise ConfigError("impulse times and values must align")
    try:
        return ImpulseSchedule.from_lists(times, values)
    except ValueError as exc:
        raise ConfigError(f"impulse schedule: {exc}") from exc


def play_policy(spec: ProblemSpec, field: ValueField, x0,
                control: ControlPath) -> ImpulseSchedule:
    """Forward pass of the fitted policy against a given control path.

    At each time level the chain stored at the nearest node is applied
    (before the level's flow step); the total number of jumps is capped by
    the bound at the initial state.
    """
    grid = field.grid
    cands = spec.impulse_array()
    cap = max_jump_bound(spec, x0)
    y = np.atleast_1d(np.asarray(x0, dtype=float))
    times, values = [], []
    used = 0
    for k in range(field.k_steps + 1):
        t = float(field.times[k])
        idx, _ = grid.snap(y[None, :])
        for ci in field.policies[k][int(idx[0])]:
            if used >= cap:
                break
            xi = cands[ci]
            y = y + spec.jump_map(t, y[None, :], xi)[0]
            times.append(t)
            values.append(xi)
            used += 1
        if k < field.k_steps:
            dt = float(field.times[k + 1] - field.times[k])
            tau = control.value_at(t)
            y = y + spec.dynamics(t, y[None, :], tau)[0] * dt
    return ImpulseSchedule.from_lists(times, values)


def run_simulate(config: dict, out_dir: str, seed: int) -> dict:
    spec = load_problem(config)
    section = config.get("simulate")
    if not isinstance(section, dict):
        raise ConfigError("config needs a [simulate] table")
    try:
        x0 = np.atleast_1d(np.asarray(section["x0"], dtype=float))
        dt = float(section.get("dt", 0.02))
    except KeyError as exc:
        raise ConfigError(f"simulate table is missing field {exc}") from exc
    control = _control_path(section, spec)

    os.makedirs(out_dir, exist_ok=True)
    report: dict = {}
    if section.get("play_policy", False):
        field_dir = section.get("field_dir")
        if not field_dir:
            raise ConfigError("policy playback needs simulate.field_dir")
        field = load_field(field_dir, spec)
        if field.spec_fingerprint != spec.fingerprint():
            raise ConfigError("field directory belongs to another problem")
        schedule = play_policy(spec, field, x0, control)
        dt = float(field.times[1] - field.times[0])
        report["value_at_start"] = field.value_at(spec, spec.t0, x0)
    else:
        schedule = _schedule(section)

    record = integrate(spec, x0, control, schedule, dt)
    record_to_csv(record,
                  os.path.join(out_dir, "trajectory.csv"),
                  os.path.join(out_dir, "jumps.csv"))
    report.update({
        "payoff": record.payoff,
        "running_cost": record.running_cost,
        "impulse_cost": record.impulse_cost,
        "terminal_cost": record.terminal_cost,
        "n_jumps": len(record.jumps),
        "jump_cap_at_x0": max_jump_bound(spec, x0),
    })
    manifest = _manifest_common(config, seed)
    manifest["report"] = report
    toml_dump(manifest, os.path.join(out_dir, "simulate_report.toml"))
    return report


def run_verify(config: dict, out_dir: str, seed: int) -> dict:
    spec = load_problem(config)
    section = config.get("verify", {})
    field_dir = section.get("field_dir", out_dir)
    field = load_field(field_dir, spec)
    grid = field.grid

    residual = qvi_residual(field, spec, grid, collect_rows=True)
    structural = check_structural(field, spec, grid,
                                  fp_tol=field.options.fp_tol)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "residuals.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "node", "residual"])
        for row in residual.rows:
            w.writerow([row[0], row[1], repr(row[2])])
    report = {
        "residual": residual.as_dict(),
        "structural": structural.as_dict(),
    }
    manifest = _manifest_common(config, seed)
    manifest.update(report)
    toml_dump(manifest, os.path.join(out_dir, "verify_report.toml"))
    if not (structural.obstacle_passed and structural.growth_passed
            and structural.terminal_passed):
        raise CheckFailure("structural checks failed", report)
    return report


def run_oracle(config: dict, out_dir: str, seed: int) -> dict:
    section = config.get("oracle", {})
    os.makedirs(out_dir, exist_ok=True)
    results = []
    failures = 0

    if section.get("corpus", True):
        n_games = int(section.get("corpus_games", 12))
        corpus_seed = int(section.get("corpus_seed", seed))
        for j, game in enumerate(seeded_corpus(n_games, seed=corpus_seed)):
            bw = backward_value(game)
            per_game_ok = True
            for s in range(game.n_states):
                if enumerate_value(game, s) != bw[0, s]:
                    per_game_ok = False
            results.append({"game": f"corpus_{j}", "equal": per_game_ok})
            failures += not per_game_ok

    game_path = section.get("game_json")
    if game_path:
        if not os.path.exists(game_path):
            raise ConfigError(f"game file not found: {game_path}")
        with open(game_path) as fh:
            game = FiniteGame.from_json(fh.read())
        bw = backward_value(game)
        ok = all(enumerate_value(game, s) == bw[0, s]
                 for s in range(game.n_states))
        results.append({"game": os.path.basename(game_path), "equal": ok})
        failures += not ok

    report = {
        "n_games": len(results),
        "n_failures": failures,
        "results": {r["game"]: r["equal"] for r in results},
    }
    manifest = _manifest_common(config, seed)
    manifest["report"] = report
    toml_dump(manifest, os.path.join(out_dir, "oracle_report.toml"))
    if failures:
        raise CheckFailure(f"{failures} oracle inequalities", report)
    return report


# ---------------------------------------------------------------------------
# Click layer
# ---------------------------------------------------------------------------

def _common(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(), help="TOML run configuration.")(fn)
    fn = click.option("--out", "out_dir", default="out", show_default=True,
                      type=click.Path(), help="Output directory.")(fn)
    fn = click.option("--seed", default=0, show_default=True, type=int,
                      help="Seed for all sampled randomness.")(fn)
    return fn


def _dispatch(body, config_path, out_dir, seed, **kwargs):
    try:
        config = _read_config(config_path)
        summary = body(config, out_dir, seed, **kwargs)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except GuardExceededError as exc:
        click.echo(f"guard exceeded: {exc}", err=True)
        sys.exit(EXIT_GUARD)
    except CheckFailure as exc:
        click.echo(f"check failed: {exc}", err=True)
        sys.exit(EXIT_CHECK)
    except ImpulseGameError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CHECK)
    for key, val in summary.items():
        if not isinstance(val, (dict, list)):
            click.echo(f"{key} = {val}")
    sys.exit(EXIT_OK)


@click.group()
def main():
    """Backward impulse-game solver: solve, simulate, verify, oracle."""


@main.command(name="solve")
@_common
@click.option("--no-verify", is_flag=True,
              help="Skip structural checks after the solve.")
def solve_cmd(config_path, out_dir, seed, no_verify):
    """Solve the configured problem and export the value field."""
    _dispatch(run_solve, config_path, out_dir, seed, no_verify=no_verify)


@main.command()
@_common
def simulate(config_path, out_dir, seed):
    """Integrate a trajectory (given schedule or policy playback)."""
    _dispatch(run_simulate, config_path, out_dir, seed)


@main.command()
@_common
def verify(config_path, out_dir, seed):
    """Residual and structural certification of a saved field."""
    _dispatch(run_verify, config_path, out_dir, seed)


@main.command()
@_common
def oracle(config_path, out_dir, seed):
    """Equality checks of the backward recursion against enumeration."""
    _dispatch(run_oracle, config_path, out_dir, seed)


if __name__ == "__main__":
    main()
