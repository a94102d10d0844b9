"""Koopman-von Neumann wave mechanics on a periodic grid.

The KvN Hamiltonian ``H = 1/2 sum_j (P_j F_j + F_j P_j)`` with spectral
momentum ``P_j = -i d/dx_j`` is Hermitian, so ``exp(-i H delta)`` is
unitary and ``|psi|**2`` stays a probability density.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from linflow.grids import Grid, ProbabilityVector
from linflow.models import FlowField
from linflow.numerics import expm, expmv, fft, ifft

log = logging.getLogger(__name__)

DENSE_LIMIT = 4096
NORM_TOL = 1e-12


def wavenumbers(grid: Grid, axis: int) -> np.ndarray:
    """Angular wavenumbers in FFT order with the Nyquist mode set to zero."""
    n = grid.points[axis]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=grid.spacing[axis])
    if n % 2 == 0:
        k[n // 2] = 0.0
    return k


class HermitianOperator:
    """Matrix-free Hermitian operator on the flattened grid.

    ``apply`` maps a flat complex vector to a flat complex vector. A dense
    matrix is built on demand (``dense_builder``) for grids of at most
    :data:`DENSE_LIMIT` nodes and cached together with propagators.
    """

    def __init__(self, grid: Grid, apply: Callable[[np.ndarray], np.ndarray],
                 dense_builder: Optional[Callable[[], np.ndarray]] = None,
                 name: str = "H"):
        self.grid = grid
        self._apply = apply
        self._dense_builder = dense_builder
        self._dense = None
        self._propagators = {}
        self.name = name

    @property
    def shape(self):
        return (self.grid.size, self.grid.size)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self._apply(np.asarray(v, dtype=complex))

    __call__ = apply

    def matvec(self, v):
        return self.apply(v)

    def dense(self) -> np.ndarray:
        if self._dense is None:
            self._dense = self._dense_builder() if self._dense_builder is not None \
                else self.columns()
        return self._dense

    def columns(self) -> np.ndarray:
        """Dense matrix obtained by applying the matrix-free operator to unit vectors."""
        n = self.grid.size
        return np.array([self.apply(e) for e in np.eye(n, dtype=complex)]).T

    def hermiticity_residual(self, samples: int = 4, seed: int = 0) -> float:
        """``max|H - H^dagger|`` of the matrix-free operator for small grids, else a
        randomized inner-product test. The dense builder is Hermitian by
        construction, so it is not the object checked here."""
        if self.grid.size <= DENSE_LIMIT:
            H = self.columns()
            return float(np.max(np.abs(H - H.conj().T)))
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(samples):
            u = rng.standard_normal(self.grid.size) + 1j * rng.standard_normal(self.grid.size)
            v = rng.standard_normal(self.grid.size) + 1j * rng.standard_normal(self.grid.size)
            u /= np.linalg.norm(u)
            v /= np.linalg.norm(v)
            worst = max(worst, abs(np.vdot(u, self.apply(v)) - np.vdot(self.apply(u), v)))
        return float(worst)

    def propagator(self, delta: float) -> np.ndarray:
        """Dense ``exp(-i H delta)``, cached per step size."""
        key = float(delta)
        if key not in self._propagators:
            self._propagators[key] = expm(-1j * delta * self.dense())
        return self._propagators[key]


def _axis_apply(values: np.ndarray, multiplier: np.ndarray, axis: int) -> np.ndarray:
    shape = [1] * values.ndim
    shape[axis] = -1
    return ifft(multiplier.reshape(shape) * fft(values, axis=axis), axis=axis)


def _dense_derivative_1d(grid: Grid, axis: int) -> np.ndarray:
    n = grid.points[axis]
    k = wavenumbers(grid, axis)
    D = ifft(k[:, None] * fft(np.eye(n, dtype=complex), axis=0), axis=0)
    return 0.5 * (D + D.conj().T)


def _embed(grid: Grid, axis: int, block: np.ndarray) -> np.ndarray:
    mats = [np.eye(p) for p in grid.points]
    mats[axis] = block
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def spectral_derivative(grid: Grid, axis: int) -> HermitianOperator:
    """Momentum operator ``-i d/dx_axis`` applied through the FFT."""
    if not 0 <= axis < grid.dim:
        raise ValueError(f"axis {axis} out of range for a {grid.dim}D grid")
    k = wavenumbers(grid, axis)

    def apply(v):
        return _axis_apply(v.reshape(grid.shape), k, axis).reshape(-1)

    return HermitianOperator(grid, apply,
                             lambda: _embed(grid, axis, _dense_derivative_1d(grid, axis)),
                             name=f"P{axis}")


def assemble_kvn_hamiltonian(grid: Grid, flow: FlowField) -> HermitianOperator:
    """Symmetrized KvN Hamiltonian ``1/2 sum_j (P_j F_j + F_j P_j)``.

    ``F_j`` acts as pointwise multiplication by the flow sampled at nodes.
    """
    if flow.dim != grid.dim:
        raise ValueError(f"flow dim {flow.dim} != grid dim {grid.dim}")
    velocity = flow(grid.nodes)
    fields = [velocity[:, j].copy() for j in range(grid.dim)]
    ks = [wavenumbers(grid, a) for a in range(grid.dim)]

    def apply(v):
        out = np.zeros(grid.size, dtype=complex)
        for a in range(grid.dim):
            F = fields[a]
            Pv = _axis_apply(v.reshape(grid.shape), ks[a], a).reshape(-1)
            PFv = _axis_apply((F * v).reshape(grid.shape), ks[a], a).reshape(-1)
            out += 0.5 * (PFv + F * Pv)
        return out

    def dense():
        H = np.zeros((grid.size, grid.size), dtype=complex)
        for a in range(grid.dim):
            P = _embed(grid, a, _dense_derivative_1d(grid, a))
            F = fields[a]
            H += 0.5 * (P * F[None, :] + F[:, None] * P)
        return H

    return HermitianOperator(grid, apply, dense, name=f"H_KvN[{flow.name}]")


@dataclass(frozen=True)
class Wavefunction:
    grid: Grid
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != self.grid.size:
            raise ValueError("amplitude count does not match the grid")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"wavefunction norm {norm!r} is not 1")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, grid: Grid, amplitudes) -> "Wavefunction":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(grid, amps / np.linalg.norm(amps))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def delta_initial(grid: Grid, point) -> Wavefunction:
    """All amplitude on the node nearest ``point``."""
    psi = np.zeros(grid.size, dtype=complex)
    psi[grid.nearest_index(np.atleast_1d(point))] = 1.0
    return Wavefunction(grid, psi)


def gaussian_initial(grid: Grid, center, support_points: int,
                     width: Optional[float] = None) -> Wavefunction:
    """Gaussian bump restricted to ``support_points`` nodes per axis.

    The support window is the block of nodes nearest ``center``; the
    profile is centred on the window midpoint so amplitudes are symmetric.
    ``width`` is the standard deviation of ``|psi|**2`` in grid cells and
    defaults to ``support_points / 10``, putting the window edges five
    standard deviations out so the truncation is smooth.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if not grid.contains(center):
        raise ValueError(f"center {center.tolist()} lies outside {grid.bounds}")
    if support_points < 1:
        raise ValueError("support_points must be >= 1")
    sigma_cells = support_points / 10.0 if width is None else float(width)
    profile = np.ones(grid.shape)
    for a in range(grid.dim):
        lo, _ = grid.bounds[a]
        c = (center[a] - lo) / grid.spacing[a]
        start = int(np.floor(c - (support_points - 1) / 2.0 + 0.5))
        stop = start + support_points
        if start < 0 or stop > grid.points[a]:
            raise ValueError("gaussian support does not fit inside the grid")
        idx = np.arange(grid.points[a])
        mid = 0.5 * (start + stop - 1)
        amp = np.where((idx >= start) & (idx < stop),
                       np.exp(-((idx - mid) ** 2) / (4.0 * sigma_cells ** 2)), 0.0)
        shape = [1] * grid.dim
        shape[a] = -1
        profile = profile * amp.reshape(shape)
    return Wavefunction.normalized(grid, profile.reshape(-1))


class KvnPropagator:
    """Repeated ``exp(-i H delta)`` steps with norm bookkeeping.

    ``method`` is ``"dense"``, ``"krylov"`` or ``"auto"`` (dense up to
    :data:`DENSE_LIMIT` nodes). ``max_norm_drift`` records the largest
    deviation of the norm from one seen before any renormalization.
    """

    def __init__(self, H: HermitianOperator, delta: float, method: str = "auto",
                 tol: float = 1e-10):
        if delta <= 0:
            raise ValueError("delta must be positive")
        if method == "auto":
            method = "dense" if H.grid.size <= DENSE_LIMIT else "krylov"
        if method not in ("dense", "krylov"):
            raise ValueError(f"unknown propagation method {method!r}")
        self.H = H
        self.delta = float(delta)
        self.method = method
        self.tol = tol
        self.max_norm_drift = 0.0
        self.renormalizations = 0
        self._U = H.propagator(delta) if method == "dense" else None
        self._generator = lambda v: -1j * H.apply(v)

    def advance(self, amplitudes: np.ndarray) -> np.ndarray:
        if self._U is not None:
            out = self._U @ amplitudes
        else:
            out = expmv(self._generator, amplitudes, self.delta, tol=self.tol)
        drift = abs(np.linalg.norm(out) - 1.0)
        self.max_norm_drift = max(self.max_norm_drift, drift)
        if drift > NORM_TOL:
            self.renormalizations += 1
            log.debug("renormalizing wavefunction, drift %.3e", drift)
            out = out / np.linalg.norm(out)
        return out

    def step(self, psi: Wavefunction) -> Wavefunction:
        return Wavefunction(psi.grid, self.advance(psi.amplitudes))

    def run(self, psi0: Wavefunction, steps: int, callback=None) -> np.ndarray:
        """Born densities at steps ``0..steps``, shape ``(steps + 1, nodes)``."""
        amps = psi0.amplitudes
        out = np.empty((steps + 1, psi0.grid.size))
        out[0] = np.abs(amps) ** 2
        for s in range(steps):
            amps = self.advance(amps)
            out[s + 1] = np.abs(amps) ** 2
            if callback is not None:
                callback(s + 1, amps)
        return out


def unitary_step(H: HermitianOperator, psi: Wavefunction, delta: float,
                 method: str = "auto", tol: float = 1e-10) -> Wavefunction:
    """One step ``psi -> exp(-i H delta) psi``; dense propagators are cached on ``H``."""
    return KvnPropagator(H, delta, method, tol).step(psi)


def born_density(psi: Wavefunction) -> ProbabilityVector:
    return ProbabilityVector(psi.grid, np.abs(psi.amplitudes) ** 2)
