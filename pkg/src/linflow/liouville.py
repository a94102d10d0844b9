"""Upwind / master-equation discretization of the Liouville equation.

Each node hops to its neighbour in the direction of the local flow, one
axis at a time, with rate ``|F_a| / spacing_a``. The resulting generator is
a Markov matrix (columns sum to zero) and, with forward-Euler time
stepping, is the first-order upwind finite-volume scheme.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from linflow.errors import CFLViolation
from linflow.grids import Grid, ProbabilityVector
from linflow.models import FlowField
from linflow.numerics import expm, expmv

log = logging.getLogger(__name__)

DENSE_LIMIT = 4096


@dataclass(frozen=True)
class SparseGenerator:
    """CME generator ``dp/dt = L p`` stored as CSC; ``L[i, j]`` is the rate j -> i."""

    grid: Grid
    matrix: scipy.sparse.csc_matrix

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def column_sum_residual(self) -> float:
        return float(np.max(np.abs(np.asarray(self.matrix.sum(axis=0)).ravel()), initial=0.0))

    def offdiagonal_min(self) -> float:
        off = self.matrix - scipy.sparse.diags(self.matrix.diagonal())
        off = off.tocoo()
        return float(off.data.min()) if off.nnz else 0.0

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def max_exit_rate(self) -> float:
        return float(np.max(-self.matrix.diagonal(), initial=0.0))

    def to_csv(self, path) -> None:
        """Coordinate list with header ``row,col,value`` in column-major order."""
        coo = self.matrix.tocsc().tocoo()
        order = np.lexsort((coo.row, coo.col))
        with open(path, "w", newline="") as fh:
            fh.write("row,col,value\n")
            for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{r},{c},{v:.17g}\n")

    @classmethod
    def from_csv(cls, path, grid: Grid) -> "SparseGenerator":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        rows = data[:, 0].astype(int)
        cols = data[:, 1].astype(int)
        n = grid.size
        mat = scipy.sparse.csc_matrix((data[:, 2], (rows, cols)), shape=(n, n))
        return cls(grid, mat)


def assemble_cme(grid: Grid, flow: FlowField) -> SparseGenerator:
    """Upwind random-walk generator on a 1D or 2D grid.

    Jumps that would leave the domain are dropped together with their
    diagonal share, so the walker stays confined and columns still sum to
    zero.
    """
    if flow.dim != grid.dim:
        raise ValueError(f"flow dim {flow.dim} != grid dim {grid.dim}")
    n = grid.size
    velocity = flow(grid.nodes)
    source = np.arange(n)
    multi = np.array(np.unravel_index(source, grid.shape))
    rows, cols, vals = [], [], []
    exit_rate = np.zeros(n)
    for a in range(grid.dim):
        F = velocity[:, a]
        rate = np.abs(F) / grid.spacing[a]
        step = np.sign(F).astype(int)
        dest = multi.copy()
        dest[a] = dest[a] + step
        keep = (rate > 0) & (dest[a] >= 0) & (dest[a] < grid.points[a])
        target = np.ravel_multi_index(tuple(d[keep] for d in dest), grid.shape) \
            if np.any(keep) else np.array([], dtype=int)
        rows.append(target)
        cols.append(source[keep])
        vals.append(rate[keep])
        exit_rate[keep] += rate[keep]
    rows.append(source)
    cols.append(source)
    vals.append(-exit_rate)
    mat = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsc()
    mat.eliminate_zeros()
    return SparseGenerator(grid, mat)


def assemble_cme_1d(grid: Grid, flow: FlowField) -> SparseGenerator:
    if grid.dim != 1:
        raise ValueError("assemble_cme_1d needs a 1D grid")
    return assemble_cme(grid, flow)


def assemble_cme_2d(grid: Grid, flow: FlowField) -> SparseGenerator:
    if grid.dim != 2:
        raise ValueError("assemble_cme_2d needs a 2D grid")
    return assemble_cme(grid, flow)


def cfl_timestep(L: SparseGenerator, safety: float = 0.9) -> float:
    """Largest forward-Euler step keeping the update monotone, times ``safety``."""
    rate = L.max_exit_rate()
    return np.inf if rate == 0 else safety / rate


def check_cfl(L: SparseGenerator, delta: float) -> None:
    if delta * L.max_exit_rate() > 1.0:
        raise CFLViolation(f"delta={delta:g} exceeds the CFL limit {1.0 / L.max_exit_rate():.6g}")


class CmePropagator:
    """Stepping ``p -> exp(delta L) p`` (dense or Krylov) or forward Euler."""

    def __init__(self, L: SparseGenerator, delta: float, method: str = "exponential",
                 expm_method: str = "auto", tol: float = 1e-10):
        if delta <= 0:
            raise ValueError("delta must be positive")
        if method not in ("exponential", "forward_euler"):
            raise ValueError(f"unknown CME method {method!r}")
        self.L = L
        self.delta = float(delta)
        self.method = method
        self.tol = tol
        self._U = None
        if method == "forward_euler":
            check_cfl(L, delta)
            self.expm_method = None
        else:
            if expm_method == "auto":
                expm_method = "dense" if L.dimension <= DENSE_LIMIT else "krylov"
            if expm_method not in ("dense", "krylov"):
                raise ValueError(f"unknown exponential method {expm_method!r}")
            self.expm_method = expm_method
            if expm_method == "dense":
                self._U = expm(self.delta * L.matrix.toarray())
        self._A = L.matrix.tocsr()

    def advance(self, p: np.ndarray) -> np.ndarray:
        if self.method == "forward_euler":
            return p + self.delta * (self._A @ p)
        if self._U is not None:
            return self._U @ p
        return expmv(self._A, p, self.delta, tol=self.tol)

    def run(self, p0: np.ndarray, steps: int) -> np.ndarray:
        out = np.empty((steps + 1, p0.shape[0]))
        out[0] = p0
        p = p0
        for s in range(steps):
            p = self.advance(p)
            out[s + 1] = p
        return out


def propagate_cme(L: SparseGenerator, p0, delta: float, steps: int,
                  method: str = "exponential", expm_method: str = "auto",
                  tol: float = 1e-10) -> np.ndarray:
    """Probability vectors at steps ``0..steps``, shape ``(steps + 1, nodes)``.

    ``method="exponential"`` applies ``exp(delta L)`` (dense up to 4096
    nodes, Krylov beyond); ``"forward_euler"`` applies ``I + delta L`` and
    rejects steps beyond the CFL limit.
    """
    values = p0.values if isinstance(p0, ProbabilityVector) else np.asarray(p0, dtype=float)
    return CmePropagator(L, delta, method, expm_method, tol).run(values, steps)


def _upwind_flux(rho: np.ndarray, F: np.ndarray, axis: int) -> np.ndarray:
    """Interface fluxes ``F+_i rho_i + F-_{i+1} rho_{i+1}`` between interior neighbours."""
    right = np.where(F > 0, F, 0.0) * rho
    left = np.where(F < 0, F, 0.0) * rho
    lo = [slice(None)] * rho.ndim
    hi = [slice(None)] * rho.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return right[tuple(lo)] + left[tuple(hi)]


def upwind_step(rho, grid: Grid, flow: FlowField, delta: float) -> np.ndarray:
    """One explicit first-order upwind flux-difference step with closed boundaries."""
    values = rho.values if isinstance(rho, ProbabilityVector) else np.asarray(rho, dtype=float)
    velocity = flow(grid.nodes)
    exit_rate = np.zeros(grid.size)
    for a in range(grid.dim):
        exit_rate += np.abs(velocity[:, a]) / grid.spacing[a]
    if delta * exit_rate.max(initial=0.0) > 1.0:
        raise CFLViolation(f"delta={delta:g} exceeds the upwind CFL limit")
    field = values.reshape(grid.shape)
    out = field.copy()
    for a in range(grid.dim):
        F = velocity[:, a].reshape(grid.shape)
        flux = _upwind_flux(field, F, a)
        pad = [(0, 0)] * grid.dim
        pad[a] = (1, 1)
        flux = np.pad(flux, pad)
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        out = out - (delta / grid.spacing[a]) * (flux[tuple(hi)] - flux[tuple(lo)])
    return out.reshape(-1)


def upwind_step_2d(rho, grid: Grid, flow: FlowField, delta: float) -> np.ndarray:
    if grid.dim != 2:
        raise ValueError("upwind_step_2d needs a 2D grid")
    return upwind_step(rho, grid, flow, delta)
