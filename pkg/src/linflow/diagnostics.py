"""Summary statistics of densities on a grid and trajectory error metrics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from linflow.grids import Grid, ProbabilityVector
from linflow.models import Trajectory


def _values(p) -> np.ndarray:
    return p.values if isinstance(p, ProbabilityVector) else np.asarray(p, dtype=float)


def mode(p, grid: Grid) -> np.ndarray:
    """Coordinates of the most probable node; ties go to the lowest flat index."""
    return grid.nodes[int(np.argmax(_values(p)))]


def mean(p, grid: Grid) -> np.ndarray:
    return _values(p) @ grid.nodes


def std_dev(p, grid: Grid) -> np.ndarray:
    values = _values(p)
    nodes = grid.nodes
    centred = nodes - values @ nodes
    return np.sqrt(np.maximum(values @ centred ** 2, 0.0))


def p_epsilon(p, grid: Grid, x_ref, eps: float) -> float:
    """Mass on nodes whose every coordinate lies strictly within ``eps`` of ``x_ref``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x_ref = np.atleast_1d(np.asarray(x_ref, dtype=float))
    inside = np.all(np.abs(grid.nodes - x_ref) < eps, axis=1)
    return float(np.clip(_values(p)[inside], 0.0, None).sum())


@dataclass
class SummaryStatistics:
    """Per-sample mode, mean, std and ``p_eps`` columns for a density history."""

    times: np.ndarray
    mode: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    p_epsilon: Dict[float, np.ndarray] = field(default_factory=dict)

    def columns(self) -> Tuple[list, np.ndarray]:
        dim = self.mode.shape[1]
        axes = ["x", "y", "z"][:dim]
        names = ["t"] + [f"mode_{a}" for a in axes] + [f"mean_{a}" for a in axes] \
            + [f"std_{a}" for a in axes] + [f"p_eps@{e:g}" for e in self.p_epsilon]
        data = np.column_stack([self.times, self.mode, self.mean, self.std]
                               + [self.p_epsilon[e] for e in self.p_epsilon])
        return names, data

    def mode_trajectory(self) -> Trajectory:
        return Trajectory(self.times, self.mode)

    def mean_trajectory(self) -> Trajectory:
        return Trajectory(self.times, self.mean)


def summarize(densities: np.ndarray, grid: Grid, times: Sequence[float],
              reference: np.ndarray = None, epsilons: Sequence[float] = ()) -> SummaryStatistics:
    """Vectorized statistics for a ``(T, nodes)`` density history.

    ``reference`` holds the reference state per time (``(T, dim)``); it is
    only needed when ``epsilons`` are requested.
    """
    densities = np.asarray(densities, dtype=float)
    nodes = grid.nodes
    modes = nodes[np.argmax(densities, axis=1)]
    means = densities @ nodes
    second = densities @ nodes ** 2
    stds = np.sqrt(np.maximum(second - means ** 2, 0.0))
    peps = {}
    if epsilons:
        if reference is None:
            raise ValueError("p_eps needs reference states")
        reference = np.asarray(reference, dtype=float).reshape(len(densities), grid.dim)
        clipped = np.clip(densities, 0.0, None)
        for eps in epsilons:
            peps[float(eps)] = np.array([
                clipped[k][np.all(np.abs(nodes - reference[k]) < eps, axis=1)].sum()
                for k in range(len(densities))])
    return SummaryStatistics(np.asarray(times, dtype=float), modes, means, stds, peps)


def trajectory_error(predicted: Trajectory, reference: Trajectory,
                     threshold: float) -> Tuple[float, float]:
    """RMSE over all samples and components, and the first time any component
    error exceeds ``threshold`` (``inf`` if it never does)."""
    if predicted.times.shape != reference.times.shape or \
            not np.allclose(predicted.times, reference.times, rtol=0, atol=1e-9):
        raise ValueError("trajectories are sampled at different times")
    if predicted.states.shape != reference.states.shape:
        raise ValueError("trajectories have different state dimensions")
    err = predicted.states - reference.states
    rmse = float(np.sqrt(np.mean(err ** 2)))
    over = np.any(np.abs(err) > threshold, axis=1)
    horizon = float(predicted.times[np.argmax(over)]) if np.any(over) else float("inf")
    return rmse, horizon
