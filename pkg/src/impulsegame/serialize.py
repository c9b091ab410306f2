"""File formats: TOML configs/manifests/reports and CSV field exports.

Configs and reports share one serialization family (TOML, read with the
stdlib parser; written with a small emitter because the run artifacts only
need scalars, lists and nested tables).  Value fields export one CSV per
time slice plus a manifest sufficient to reproduce the run.
"""

from __future__ import annotations

import csv
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .errors import ConfigError
from .grids import GridSpec
from .solver import SolveOptions, ValueField


# ---------------------------------------------------------------------------
# Minimal TOML emitter
# ---------------------------------------------------------------------------

def _toml_scalar(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if f != f or f in (float("inf"), float("-inf")):
            return {float("inf"): "inf", float("-inf"): "-inf"}.get(f, "nan")
        s = repr(f)
        return s
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)} to TOML")


def toml_dumps(data: dict, _prefix: str = "") -> str:
    lines = []
    tables = []
    for key, val in data.items():
        if isinstance(val, dict):
            tables.append((key, val))
        else:
            lines.append(f"{key} = {_toml_scalar(val)}")
    out = "\n".join(lines)
    for key, val in tables:
        name = f"{_prefix}{key}"
        out += f"\n\n[{name}]\n" + toml_dumps(val, _prefix=f"{name}.")
    return out.strip() + "\n"


def toml_dump(data: dict, path):
    with open(path, "w") as fh:
        fh.write(toml_dumps(data))


def toml_load(path) -> dict:
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Value-field export / import
# ---------------------------------------------------------------------------

def _chain_str(chain, cands) -> str:
    return ";".join(repr(float(cands[i][0])) if cands.shape[1] == 1
                    else ",".join(repr(float(v)) for v in cands[i])
                    for i in chain)


def save_field(field: ValueField, spec, out_dir, config_echo: dict | None = None,
               extra: dict | None = None):
    """Write slice CSVs plus a manifest reproducing the run."""
    os.makedirs(out_dir, exist_ok=True)
    grid = field.grid
    nodes = grid.node_array()
    cands = spec.impulse_array()
    m = grid.dim
    for k, (vk, pol) in enumerate(zip(field.slices, field.policies)):
        path = os.path.join(out_dir, f"slice_{k:04d}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{j}" for j in range(m)] + ["value", "action", "jumps"])
            for i in range(grid.n_nodes):
                chain = pol[i]
                w.writerow([repr(float(v)) for v in nodes[i]]
                           + [repr(float(vk[i])),
                              "jump" if chain else "continue",
                              _chain_str(chain, cands) if chain else ""])
    manifest = {
        "grid": {
            "lower": list(grid.lower),
            "upper": list(grid.upper),
            "nodes": list(grid.nodes),
            "time_steps": grid.time_steps,
        },
        "options": {
            "control_samples": field.options.control_samples,
            "use_transformed": field.options.use_transformed,
            "fp_tol": field.options.fp_tol,
            "snap_to_nodes": field.options.snap_to_nodes,
        },
        "spec_fingerprint": field.spec_fingerprint,
        "clamp_count": field.clamp_count,
        "solve_seconds": field.solve_seconds,
        "times": [float(t) for t in field.times],
    }
    if config_echo:
        manifest["config"] = config_echo
    if extra:
        manifest.update(extra)
    toml_dump(manifest, os.path.join(out_dir, "manifest.toml"))


def load_field(out_dir, spec) -> ValueField:
    """Rebuild a ValueField from slice CSVs and the manifest."""
    manifest = toml_load(os.path.join(out_dir, "manifest.toml"))
    g = manifest["grid"]
    grid = GridSpec(tuple(g["lower"]), tuple(g["upper"]),
                    tuple(int(n) for n in g["nodes"]), int(g["time_steps"]))
    o = manifest["options"]
    options = SolveOptions(control_samples=int(o["control_samples"]),
                           use_transformed=bool(o["use_transformed"]),
                           fp_tol=float(o["fp_tol"]),
                           snap_to_nodes=bool(o["snap_to_nodes"]))
    cands = spec.impulse_array()
    slices, policies = [], []
    for k in range(grid.time_steps + 1):
        path = os.path.join(out_dir, f"slice_{k:04d}.csv")
        if not os.path.exists(path):
            raise ConfigError(f"field directory is missing {path}")
        vals = np.empty(grid.n_nodes)
        pol = []
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) != grid.n_nodes + 1:
            raise ConfigError(f"truncated slice file {path}")
        for i, row in enumerate(rows[1:]):
            vals[i] = float(row[grid.dim])
            jumps = row[grid.dim + 2]
            if jumps:
                chain = []
                for part in jumps.split(";"):
                    xi = np.array([float(v) for v in part.split(",")])
                    match = np.flatnonzero(
                        np.all(np.abs(cands - xi) <= 1e-12, axis=1))
                    if match.size == 0:
                        raise ConfigError(
                            f"jump {part} in {path} is not a candidate")
                    chain.append(int(match[0]))
                pol.append(tuple(chain))
            else:
                pol.append(())
        slices.append(vals)
        policies.append(pol)
    return ValueField(
        times=np.asarray(manifest["times"], dtype=float),
        slices=slices,
        policies=policies,
        grid=grid,
        options=options,
        spec_fingerprint=manifest["spec_fingerprint"],
        clamp_count=int(manifest["clamp_count"]),
        solve_seconds=float(manifest["solve_seconds"]),
    )
