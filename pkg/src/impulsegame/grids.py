"""Time-space discretization: grid geometry, interpolation, node snapping.

A value slice is a flat numpy array with one entry per grid node, ordered
like ``numpy.reshape(-1)`` on the grid shape (last axis fastest).  All
off-grid lookups clamp the query point onto the box; clamp events are
counted and surfaced so boundary bias stays visible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator


@dataclass(frozen=True)
class GridSpec:
    """Box discretization of the state space plus a uniform time grid.

    lower/upper/nodes are per-axis; time_steps is the number of backward
    steps, so a solve produces time_steps + 1 value slices.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    nodes: tuple[int, ...]
    time_steps: int

    def __post_init__(self):
        if not (len(self.lower) == len(self.upper) == len(self.nodes)):
            raise ValueError("lower, upper and nodes must have equal length")
        for lo, hi, n in zip(self.lower, self.upper, self.nodes):
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError("grid bounds must be finite")
            if not lo < hi:
                raise ValueError(f"grid bounds must satisfy lower < upper, got [{lo}, {hi}]")
            if n < 2:
                raise ValueError("each axis needs at least 2 nodes")
        if self.time_steps < 1:
            raise ValueError("time_steps must be >= 1")

    @property
    def dim(self) -> int:
        return len(self.nodes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.nodes)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.nodes))

    def dt(self, t0: float, T: float) -> float:
        return (T - t0) / self.time_steps

    def axes(self) -> list[np.ndarray]:
        return [
            np.linspace(lo, hi, n)
            for lo, hi, n in zip(self.lower, self.upper, self.nodes)
        ]

    def spacing(self) -> np.ndarray:
        return np.array(
            [(hi - lo) / (n - 1) for lo, hi, n in zip(self.lower, self.upper, self.nodes)]
        )

    def node_array(self) -> np.ndarray:
        """All grid nodes as an (n_nodes, dim) array in flat order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def clamp(self, points: np.ndarray) -> tuple[np.ndarray, int]:
        """Project points onto the box; returns (clamped, number clamped)."""
        points = np.atleast_2d(points)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        clamped = np.clip(points, lo, hi)
        n_clamped = int(np.sum(np.any(clamped != points, axis=1)))
        return clamped, n_clamped

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, int]:
        """Multilinear interpolation of a flat slice at query points.

        Off-box points are clamped to the boundary first.  Returns the
        interpolated values and the clamp count.
        """
        pts, n_clamped = self.clamp(points)
        if self.dim == 1:
            vals = np.interp(pts[:, 0], self.axes()[0], values)
        else:
            rgi = RegularGridInterpolator(self.axes(), values.reshape(self.shape))
            vals = rgi(pts)
        return vals, n_clamped

    def snap(self, points: np.ndarray) -> tuple[np.ndarray, int]:
        """Flat index of the nearest node per point, ties to the lower index.

        Nearest is taken per axis, which for a box grid is the max-norm
        nearest node.  Returns (indices, clamp count).
        """
        pts, n_clamped = self.clamp(points)
        axis_idx = []
        for j, ax in enumerate(self.axes()):
            d = np.abs(pts[:, j][:, None] - ax[None, :])
            axis_idx.append(np.argmin(d, axis=1))
        flat = np.ravel_multi_index(tuple(axis_idx), self.shape)
        return flat, n_clamped

    def transport(self, values: np.ndarray, points: np.ndarray,
                  snap: bool = False) -> tuple[np.ndarray, int]:
        """Evaluate a slice at transported points, either by interpolation
        or by nearest-node lookup (used when matching an exact finite game)."""
        if snap:
            idx, n_clamped = self.snap(points)
            return values[idx], n_clamped
        return self.interpolate(values, points)
