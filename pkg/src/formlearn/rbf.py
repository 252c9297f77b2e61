"""Gaussian RBF network on a regular grid.

Centers are the Cartesian product of per-axis evenly spaced points
(endpoints included); each unit responds with exp(-||x - xi||^2 / width).
Because the receptive fields decay fast, evaluation inside the simulation
loop uses only the units within a cutoff radius of the query point; the
dropped tail changes any weighted output by at most
n_units * exp(-cutoff^2 / width_max) * max|w|.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RbfGrid",
    "build_grid",
    "regressor",
    "localized_regressor",
    "nn_output",
    "mean_weights",
    "partition_zeta",
    "tail_bound",
]


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class RbfGrid:
    """Regular lattice of Gaussian units.

    axes:    per-axis center coordinates, shape (dim_q, per_dim).
    centers: all lattice points, shape (n_units, dim_q), axis-0 fastest
             to vary last (C-order Cartesian product).
    widths:  per-unit positive width, shape (n_units,).
    """

    dim_q: int
    per_dim: int
    bounds: np.ndarray
    axes: np.ndarray
    centers: np.ndarray
    widths: np.ndarray

    @property
    def n_units(self) -> int:
        return self.centers.shape[0]

    @property
    def spacing(self) -> np.ndarray:
        return (self.bounds[:, 1] - self.bounds[:, 0]) / (self.per_dim - 1)

    @property
    def uniform_width(self) -> float:
        return float(self.widths[0])


def build_grid(
    dim_q: int,
    per_dim: int,
    bounds,
    width,
    memory_cap: int = 200_000,
) -> RbfGrid:
    """Lay out per_dim^dim_q centers on the box `bounds` ([lo, hi] per axis).

    `width` may be a scalar (uniform) or a vector of per-unit widths.
    """
    if per_dim < 2:
        raise GridError("per_dim must be >= 2")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape != (dim_q, 2):
        raise GridError(f"bounds must be ({dim_q}, 2), got {bounds.shape}")
    if np.any(bounds[:, 0] >= bounds[:, 1]):
        raise GridError("each axis needs lo < hi")
    n_units = per_dim**dim_q
    if n_units > memory_cap:
        raise GridError(f"{per_dim}^{dim_q} = {n_units} units exceeds memory cap {memory_cap}")

    axes = np.stack([np.linspace(lo, hi, per_dim) for lo, hi in bounds])
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=1)

    widths = np.asarray(width, dtype=float)
    if widths.ndim == 0:
        widths = np.full(n_units, float(widths))
    if widths.shape != (n_units,):
        raise GridError("width must be scalar or one value per unit")
    if np.any(widths <= 0.0):
        raise GridError("widths must be positive")
    return RbfGrid(
        dim_q=dim_q, per_dim=per_dim, bounds=bounds, axes=axes, centers=centers, widths=widths
    )


def regressor(grid: RbfGrid, x) -> np.ndarray:
    """Full response vector: s_i = exp(-||x - xi_i||^2 / width_i)."""
    x = np.asarray(x, dtype=float)
    d2 = np.sum((grid.centers - x) ** 2, axis=1)
    return np.exp(-d2 / grid.widths)


def _axis_index_windows(grid: RbfGrid, x: np.ndarray, radius: float) -> list[np.ndarray]:
    """Per-axis lattice indices whose coordinate lies within `radius` of x."""
    windows = []
    for q in range(grid.dim_q):
        lo, hi = grid.bounds[q]
        h = (hi - lo) / (grid.per_dim - 1)
        i0 = max(0, int(np.ceil((x[q] - radius - lo) / h)))
        i1 = min(grid.per_dim - 1, int(np.floor((x[q] + radius - lo) / h)))
        windows.append(np.arange(i0, i1 + 1))
    return windows


def _candidate_indices(grid: RbfGrid, x: np.ndarray, radius: float) -> np.ndarray:
    """Flat indices of lattice points inside the axis-aligned box of
    half-width `radius` around x (superset of the ball)."""
    windows = _axis_index_windows(grid, x, radius)
    if any(w.size == 0 for w in windows):
        return np.empty(0, dtype=np.intp)
    idx = windows[0]
    for w in windows[1:]:
        idx = (idx[:, None] * grid.per_dim + w[None, :]).ravel()
    return idx


def localized_regressor(grid: RbfGrid, x, d_loc: float) -> tuple[np.ndarray, np.ndarray]:
    """Sparse response: (indices, values) of exactly the units whose center
    lies within d_loc of x.  The lattice structure makes the candidate
    lookup O(1) per axis; exact distances are then checked.
    """
    if d_loc <= 0.0:
        raise GridError("d_loc must be positive")
    x = np.asarray(x, dtype=float)
    cand = _candidate_indices(grid, x, d_loc)
    if cand.size == 0:
        return cand, np.empty(0)
    d2 = np.sum((grid.centers[cand] - x) ** 2, axis=1)
    keep = d2 <= d_loc * d_loc
    idx = cand[keep]
    return idx, np.exp(-d2[keep] / grid.widths[idx])


def tail_bound(grid: RbfGrid, d_loc: float, w_max: float) -> float:
    """Worst-case change to any weighted output when units beyond d_loc are
    dropped."""
    return grid.n_units * np.exp(-d_loc * d_loc / float(grid.widths.max())) * abs(w_max)


def nn_output(weights, s: np.ndarray) -> np.ndarray:
    """Stacked per-channel outputs w_k . s for a shared regressor s.

    `weights` has shape (n_channels, n_units).
    """
    weights = np.asarray(weights, dtype=float)
    if weights.shape[-1] != s.shape[0]:
        raise ValueError(f"weight length {weights.shape[-1]} != regressor length {s.shape[0]}")
    return weights @ s


def nn_output_sparse(weights, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """nn_output against a sparse (indices, values) regressor."""
    weights = np.asarray(weights, dtype=float)
    return weights[..., idx] @ vals


def mean_weights(times, history, t_a: float, t_b: float) -> np.ndarray:
    """Arithmetic average of logged weight samples with t_a <= t <= t_b.

    `history` is indexed by sample along axis 0.
    """
    if t_b <= t_a:
        raise ValueError("window must satisfy t_b > t_a")
    times = np.asarray(times, dtype=float)
    history = np.asarray(history, dtype=float)
    mask = (times >= t_a) & (times <= t_b)
    if not np.any(mask):
        raise ValueError(f"no logged samples inside window [{t_a}, {t_b}]")
    return history[mask].mean(axis=0)


def partition_zeta(grid: RbfGrid, samples, d_loc: float) -> tuple[np.ndarray, np.ndarray]:
    """Split unit indices into (near, far) of a trajectory sample set:
    near = centers within d_loc of ANY sample, far = the complement."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError("need at least one trajectory sample")
    near = np.zeros(grid.n_units, dtype=bool)
    for x in samples:
        idx, _ = localized_regressor(grid, x, d_loc)
        near[idx] = True
    return np.flatnonzero(near), np.flatnonzero(~near)
