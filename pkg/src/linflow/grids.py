"""Uniform lattices over axis-aligned boxes in one or two dimensions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform, periodic-style lattice: node ``i`` on an axis sits at
    ``low + i * spacing`` with ``spacing = (high - low) / points``.

    Flattening is row-major: in 2D the first axis varies slowest, so node
    ``(i, j)`` has flat index ``i * points[1] + j``.
    """

    bounds: Tuple[Tuple[float, float], ...]
    points: Tuple[int, ...]
    spacing: Tuple[float, ...] = field(init=False)

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        points = tuple(int(p) for p in self.points)
        if len(bounds) != len(points):
            raise ValueError("bounds and points must have the same length")
        if len(bounds) not in (1, 2):
            raise ValueError(f"only 1D and 2D grids are supported, got dim={len(bounds)}")
        for (lo, hi), n in zip(bounds, points):
            if n < 2:
                raise ValueError(f"each axis needs at least 2 points, got {n}")
            if not lo < hi:
                raise ValueError(f"empty axis interval ({lo}, {hi})")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "spacing",
                           tuple((hi - lo) / n for (lo, hi), n in zip(bounds, points)))

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.points

    def axis(self, a: int) -> np.ndarray:
        lo, _ = self.bounds[a]
        return lo + np.arange(self.points[a]) * self.spacing[a]

    @property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(size, dim)`` in flattened order."""
        mesh = np.meshgrid(*(self.axis(a) for a in range(self.dim)), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def flat_index(self, multi_index: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(int(i) for i in multi_index), self.points))

    def multi_index(self, flat: int) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(int(flat), self.points))

    def contains(self, point: Sequence[float]) -> bool:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return all(lo <= p <= hi for p, (lo, hi) in zip(point, self.bounds))

    def nearest_index(self, point: Sequence[float]) -> int:
        """Flat index of the node closest to ``point`` (ties go to the lower node)."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.shape != (self.dim,):
            raise ValueError(f"expected a point of dimension {self.dim}")
        if not self.contains(point):
            raise ValueError(f"point {point.tolist()} lies outside the grid bounds {self.bounds}")
        idx = []
        for a in range(self.dim):
            lo, _ = self.bounds[a]
            r = (point[a] - lo) / self.spacing[a]
            i = int(np.ceil(r - 0.5))
            idx.append(min(max(i, 0), self.points[a] - 1))
        return self.flat_index(idx)


def make_grid(bounds, points) -> Grid:
    """Build a :class:`Grid` from ``[(low, high), ...]`` and per-axis point counts.

    >>> make_grid([(0.0, 2.0)], [1024]).spacing
    (0.001953125,)
    """
    if np.isscalar(points):
        points = [points]
    bounds = [tuple(b) for b in bounds]
    if any(int(p) <= 0 for p in points):
        raise ValueError("point counts must be positive")
    return Grid(tuple(bounds), tuple(int(p) for p in points))


@dataclass(frozen=True)
class ProbabilityVector:
    """Nonnegative probabilities over the flattened nodes of ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.shape[0] != self.grid.size:
            raise ValueError(f"{values.shape[0]} values for a grid of {self.grid.size} nodes")
        if values.min() < -1e-14:
            raise ValueError(f"negative probability {values.min():.3e}")
        if abs(values.sum() - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {values.sum():.15g}, not 1")
        object.__setattr__(self, "values", values)

    def clipped(self) -> np.ndarray:
        """Values with round-off negatives set to zero, for reporting."""
        return np.clip(self.values, 0.0, None)

    def as_grid_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)
