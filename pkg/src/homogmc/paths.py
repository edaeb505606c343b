"""Brownian paths on uniform grids, Brownian rescaling, and occupation-measure
local time.

Local time uses the piecewise-constant path convention: each time step
deposits its full dt into the spatial bin of the left grid point.  That makes
the occupation identity  sum_j L(t, y_j) * dy = t  exact by construction,
which is the one identity the downstream integrals rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .rng import Stream, generator


@dataclass(frozen=True)
class PathGrid:
    """A Brownian path sampled on a uniform time grid, B_0 = 0."""

    times: np.ndarray
    values: np.ndarray
    seed: int
    level: int = 0  # number of dyadic refinements applied

    @property
    def t(self) -> float:
        return float(self.times[-1])

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1


def simulate_path(t: float, n_steps: int, seed: int) -> PathGrid:
    """One standard Brownian path on [0, t] with n_steps uniform steps."""
    if t <= 0.0 or n_steps < 1:
        raise ValueError("need t > 0 and n_steps >= 1")
    rng = generator(seed, Stream.PATH)
    dt = t / n_steps
    incr = rng.standard_normal(n_steps) * np.sqrt(dt)
    values = np.concatenate(([0.0], np.cumsum(incr)))
    return PathGrid(np.linspace(0.0, t, n_steps + 1), values, seed)


def simulate_path_values(t: float, n_steps: int, seed: int, n_paths: int) -> np.ndarray:
    """Batch of n_paths independent paths, shape (n_paths, n_steps + 1)."""
    rng = generator(seed, Stream.PATH)
    dt = t / n_steps
    incr = rng.standard_normal((n_paths, n_steps)) * np.sqrt(dt)
    values = np.empty((n_paths, n_steps + 1))
    values[:, 0] = 0.0
    np.cumsum(incr, axis=1, out=values[:, 1:])
    return values


def refine_path(path: PathGrid) -> PathGrid:
    """Halve the time step by Brownian-bridge midpoints; deterministic in
    (seed, level), so refinements of one path share its coarse skeleton."""
    rng = generator(path.seed, Stream.PATH_REFINE, path.level + 1)
    n = path.n_steps
    mid_mean = 0.5 * (path.values[:-1] + path.values[1:])
    mids = mid_mean + np.sqrt(path.dt / 4.0) * rng.standard_normal(n)
    values = np.empty(2 * n + 1)
    values[0::2] = path.values
    values[1::2] = mids
    times = np.linspace(0.0, path.t, 2 * n + 1)
    return PathGrid(times, values, path.seed, path.level + 1)


def rescale_path(path: PathGrid, eps: float, nu: float) -> PathGrid:
    """Exact Brownian rescaling s -> eps^(nu/2) * B_{s / eps^nu} on the
    induced grid; a pure coordinate change, no new randomness."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if nu == 0.0 or eps == 1.0:
        return path
    return replace(
        path,
        times=path.times * eps**nu,
        values=path.values * eps ** (nu / 2.0),
    )


@dataclass(frozen=True)
class LocalTimeGrid:
    """Occupation densities L(t_k, y_j) on uniform time and space grids.

    ``masses[k, j]`` is cumulative in k; units are time per unit space.
    """

    times: np.ndarray
    edges: np.ndarray
    masses: np.ndarray

    @property
    def dy(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def total_mass(self, k: int = -1) -> float:
        return float(self.masses[k].sum() * self.dy)


def _bin_indices(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    idx = np.floor((values - edges[0]) / (edges[1] - edges[0])).astype(np.int64)
    if idx.min() < 0 or idx.max() >= len(edges) - 1:
        raise ValueError("path leaves the local-time grid")
    return idx


def local_time_on_edges(path: PathGrid, edges: np.ndarray) -> LocalTimeGrid:
    """Bin the path's occupation measure on prescribed uniform bin edges."""
    dy = float(edges[1] - edges[0])
    n_bins = len(edges) - 1
    idx = _bin_indices(path.values[:-1], edges)
    counts = np.zeros((path.n_steps + 1, n_bins))
    np.add.at(counts, (np.arange(1, path.n_steps + 1), idx), 1.0)
    np.cumsum(counts, axis=0, out=counts)
    counts *= path.dt / dy
    return LocalTimeGrid(path.times.copy(), np.asarray(edges, dtype=float), counts)


def local_time(path: PathGrid, dy: float) -> LocalTimeGrid:
    """Occupation-measure local time with automatic bin range."""
    if dy <= 0.0:
        raise ValueError("dy must be positive")
    lo = np.floor((path.values.min() - 4.0 * dy) / dy) * dy
    n_bins = int(np.ceil((path.values.max() + 4.0 * dy - lo) / dy)) + 1
    edges = lo + dy * np.arange(n_bins + 1)
    return local_time_on_edges(path, edges)
