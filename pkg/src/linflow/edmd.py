"""Extended DMD: least-squares finite-time Koopman matrices on monomial dictionaries."""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from linflow.carleman import MonomialBasis, enumerate_monomials
from linflow.errors import RankDeficiencyWarning
from linflow.models import Trajectory
from linflow.numerics import least_squares


@dataclass(frozen=True)
class SnapshotMatrix:
    """Row ``k`` of ``X`` is the dictionary at ``t_k``; of ``Y`` at ``t_k + delta``."""

    dictionary: MonomialBasis
    X: np.ndarray
    Y: np.ndarray
    delta: float

    def __post_init__(self):
        if self.X.shape != self.Y.shape:
            raise ValueError(f"X {self.X.shape} and Y {self.Y.shape} differ in shape")
        if self.X.ndim != 2 or self.X.shape[1] != self.dictionary.size:
            raise ValueError("snapshot columns must match the dictionary size")

    @property
    def pairs(self) -> int:
        return self.X.shape[0]

    def column_names(self):
        names = [";".join(str(e) for e in exps) for exps in self.dictionary.ordering]
        return [f"X[{n}]" for n in names] + [f"Y[{n}]" for n in names]

    def to_csv(self, path) -> None:
        """One row per snapshot pair: dictionary values of X, then of Y."""
        header = (f"# delta={self.delta!r} dim={self.dictionary.dim} "
                  f"degree={self.dictionary.max_total_degree}\n")
        rows = np.hstack([self.X, self.Y])
        with open(path, "w", newline="") as fh:
            fh.write(header)
            fh.write(",".join(self.column_names()) + "\n")
            for row in rows:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "SnapshotMatrix":
        text = Path(path).read_text().splitlines()
        meta = dict(re.findall(r"(\w+)=(\S+)", text[0]))
        dictionary = enumerate_monomials(int(meta["dim"]), int(meta["degree"]))
        data = np.loadtxt(text[2:], delimiter=",", ndmin=2)
        n = dictionary.size
        if data.shape[1] != 2 * n:
            raise ValueError(f"expected {2 * n} columns, found {data.shape[1]}")
        return cls(dictionary, data[:, :n], data[:, n:], float(meta["delta"]))


@dataclass(frozen=True)
class KoopmanMatrix:
    K: np.ndarray
    delta: float
    dictionary: MonomialBasis
    rank: int = -1
    residual: float = float("nan")

    def __post_init__(self):
        n = self.dictionary.size
        if self.K.shape != (n, n):
            raise ValueError(f"K has shape {self.K.shape}, dictionary size is {n}")

    def state_estimate(self, observables: Trajectory) -> Trajectory:
        return Trajectory(observables.times,
                          observables.states[:, list(self.dictionary.linear_indices)])


def build_snapshots(trajectory: Trajectory, dictionary: MonomialBasis,
                    delta: float) -> SnapshotMatrix:
    """Pair consecutive samples of a uniformly sampled trajectory."""
    dt = np.diff(trajectory.times)
    if dt.size == 0:
        raise ValueError("need at least two samples")
    if not np.allclose(dt, delta, rtol=1e-9, atol=1e-12):
        raise ValueError(f"trajectory is not uniformly sampled at delta={delta}")
    G = dictionary.evaluate(trajectory.states)
    return SnapshotMatrix(dictionary, G[:-1], G[1:], float(delta))


def fit_koopman(snapshots: SnapshotMatrix, regularization: float = 0.0) -> KoopmanMatrix:
    """Solve ``min_K ||X K^T - Y||_F`` (plus ``regularization * ||K||_F^2``).

    The fit goes through an SVD-based least-squares solver, never the normal
    equations, since monomial Gram matrices are badly conditioned.
    """
    X, Y = snapshots.X, snapshots.Y
    n = snapshots.dictionary.size
    if regularization < 0:
        raise ValueError("regularization must be nonnegative")
    if regularization > 0:
        X = np.vstack([X, np.sqrt(regularization) * np.eye(n)])
        Y = np.vstack([Y, np.zeros((n, n))])
    result = least_squares(X, Y)
    if result.rank < n:
        warnings.warn(f"snapshot matrix has numerical rank {result.rank} < dictionary "
                      f"size {n}; returning the minimum-norm fit",
                      RankDeficiencyWarning, stacklevel=2)
    K = result.solution.T
    residual = float(np.linalg.norm(snapshots.X @ K.T - snapshots.Y))
    return KoopmanMatrix(K, snapshots.delta, snapshots.dictionary, result.rank, residual)


def predict_recursive(koopman: KoopmanMatrix, x0, steps: int) -> Trajectory:
    """Observable trajectory ``g_{k+1} = K g_k`` with ``g_0`` the dictionary at ``x0``."""
    g = koopman.dictionary.evaluate(np.atleast_1d(np.asarray(x0, dtype=float)))
    out = np.empty((steps + 1, g.size))
    out[0] = g
    for k in range(steps):
        g = koopman.K @ g
        out[k + 1] = g
    return Trajectory(np.arange(steps + 1) * koopman.delta, out)
