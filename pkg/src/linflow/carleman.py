"""Carleman linearization over monomial observables.

A polynomial flow lifts to ``dg/dt = L g`` on the monomials
``g_alpha(x) = x**alpha``. The infinite hierarchy is closed by freezing the
highest-degree rows (``dg_alpha/dt = 0``) and dropping any coupling to a
monomial outside the basis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Dict, Sequence, Tuple

import numpy as np
import scipy.sparse

from linflow.errors import ObservableOverflow
from linflow.models import (OVERFLOW_THRESHOLD, FlowField, Trajectory, decay_flow,
                            integrate, vdp_flow)


@dataclass(frozen=True)
class MonomialBasis:
    """Monomials of total degree ``<= max_total_degree`` in graded order.

    Within one total degree, exponents are sorted so the first variable's
    power decreases: ``(2,0), (1,1), (0,2)``.
    """

    dim: int
    max_total_degree: int
    ordering: Tuple[Tuple[int, ...], ...] = field(init=False)
    _index: Dict[Tuple[int, ...], int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("monomial bases are implemented for dim 1 and 2")
        if self.max_total_degree < 0:
            raise ValueError("max_total_degree must be >= 0")
        if self.dim == 1:
            ordering = tuple((d,) for d in range(self.max_total_degree + 1))
        else:
            ordering = tuple((d - n, n) for d in range(self.max_total_degree + 1)
                             for n in range(d + 1))
        object.__setattr__(self, "ordering", ordering)
        object.__setattr__(self, "_index", {e: i for i, e in enumerate(ordering)})

    def __len__(self):
        return len(self.ordering)

    @property
    def size(self) -> int:
        return len(self.ordering)

    def index(self, exponents: Sequence[int]) -> int:
        return self._index[tuple(int(e) for e in exponents)]

    def __contains__(self, exponents) -> bool:
        return tuple(exponents) in self._index

    @property
    def linear_indices(self) -> Tuple[int, ...]:
        """Positions of ``x_1, ..., x_dim`` (the degree-one monomials)."""
        return tuple(self.index(tuple(int(a == b) for b in range(self.dim)))
                     for a in range(self.dim))

    @property
    def degrees(self) -> np.ndarray:
        return np.array([sum(e) for e in self.ordering])

    def evaluate(self, x) -> np.ndarray:
        """Monomial values at ``x``; shape ``(..., size)`` for states ``(..., dim)``."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        exps = np.array(self.ordering)
        with np.errstate(over="ignore", invalid="ignore"):
            return np.prod(x[..., None, :] ** exps, axis=-1)


def enumerate_monomials(dim: int, max_total_degree: int) -> MonomialBasis:
    basis = MonomialBasis(dim, int(max_total_degree))
    assert basis.size == comb(max_total_degree + dim, dim)
    return basis


@dataclass(frozen=True)
class CarlemanSystem:
    basis: MonomialBasis
    generator: scipy.sparse.csr_matrix
    closure_tag: str

    def __post_init__(self):
        n = self.basis.size
        if self.generator.shape != (n, n):
            raise ValueError(f"generator shape {self.generator.shape} != basis size {n}")

    def initial_observables(self, x0) -> np.ndarray:
        return self.basis.evaluate(np.atleast_1d(np.asarray(x0, dtype=float)))

    def state_estimate(self, observables: Trajectory) -> Trajectory:
        """Project an observable trajectory onto its degree-one coordinates."""
        return Trajectory(observables.times,
                          observables.states[:, list(self.basis.linear_indices)])


def lift_polynomial(flow: FlowField, max_total_degree: int, closure_degree: int,
                    closure_tag: str = "zero-derivative") -> CarlemanSystem:
    """Carleman generator of a polynomial ``flow`` on a graded monomial basis.

    ``d/dt x**a = sum_j a_j x**(a - e_j) F_j(x)``; each polynomial term of
    ``F_j`` contributes one coupling. Rows of total degree
    ``>= closure_degree`` are zeroed and couplings that leave the basis are
    dropped.
    """
    basis = enumerate_monomials(flow.dim, max_total_degree)
    rows, cols, vals = [], [], []
    for r, alpha in enumerate(basis.ordering):
        if sum(alpha) >= closure_degree:
            continue
        for j in range(flow.dim):
            if alpha[j] == 0:
                continue
            for coef, beta in flow.terms[j]:
                target = tuple(alpha[a] - (a == j) + beta[a] for a in range(flow.dim))
                if target not in basis:
                    continue
                rows.append(r)
                cols.append(basis.index(target))
                vals.append(alpha[j] * coef)
    n = basis.size
    L = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    L.sum_duplicates()
    L.eliminate_zeros()
    return CarlemanSystem(basis, L, closure_tag)


def lift_decay(truncation_order: int) -> CarlemanSystem:
    """``dg_k/dt = -k g_{k+1}`` for ``k < order`` with ``dg_order/dt = 0``."""
    if truncation_order < 1:
        raise ValueError("truncation order must be >= 1")
    return lift_polynomial(decay_flow(), truncation_order, truncation_order,
                           closure_tag=f"truncate@{truncation_order}")


def lift_vdp(max_total_degree: int, mu: float) -> CarlemanSystem:
    """Van der Pol lifting on ``x**m y**n`` with ``m + n <= max_total_degree``.

    Rows with ``m + n >= max_total_degree - 1`` are frozen, which is exactly
    where ``g_{m+2,n}`` would leave the basis.
    """
    if max_total_degree < 3:
        raise ValueError("max_total_degree must be >= 3")
    return lift_polynomial(vdp_flow(mu), max_total_degree, max_total_degree - 1,
                           closure_tag=f"freeze m+n>={max_total_degree - 1}")


def propagate_linear(system: CarlemanSystem, x0, times, tol: float = 1e-10,
                     overflow_threshold: float = OVERFLOW_THRESHOLD) -> Trajectory:
    """Integrate ``dg/dt = L g`` from the monomials of ``x0``.

    Returns the observable trajectory; use
    :meth:`CarlemanSystem.state_estimate` for the state. Raises
    :class:`ObservableOverflow` with the first offending time if any
    observable reaches ``overflow_threshold``.
    """
    g0 = system.initial_observables(x0)
    times = np.asarray(times, dtype=float)
    if not np.all(np.isfinite(g0)) or np.max(np.abs(g0)) >= overflow_threshold:
        raise ObservableOverflow("initial observables overflow", float(times[0]), None)
    L = system.generator
    return integrate(lambda g: L @ g, g0, times, rtol=tol, atol=tol,
                     overflow_threshold=overflow_threshold)


def carleman_error_bound(n: int, t: float) -> float:
    """Truncation error bound ``t**n / (1 - t)`` for the decay model, ``0 <= t < 1``."""
    if not 0 <= t < 1:
        raise ValueError(f"bound is only defined for 0 <= t < 1, got t={t}")
    return t ** n / (1.0 - t)


def invariant_observable(x):
    """``exp(-1/x)``, which decays as ``exp(-t)`` along the decay flow."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("invariant observable needs x > 0")
    out = np.exp(-1.0 / x)
    return float(out) if out.ndim == 0 else out


def invariant_inverse(g):
    """Inverse of :func:`invariant_observable`: ``-1 / log(g)`` for ``0 < g < 1``."""
    g = np.asarray(g, dtype=float)
    if np.any((g <= 0) | (g >= 1)):
        raise ValueError("invariant inverse needs 0 < g < 1")
    out = -1.0 / np.log(g)
    return float(out) if out.ndim == 0 else out


def solve_via_invariant(x0: float, t):
    """Exact decay solution through the one-dimensional invariant subspace:
    lift ``x0``, decay the observable linearly by ``exp(-t)``, map back.

    For very small ``x0`` the lifted value underflows and the inverse
    rejects it.
    """
    if not x0 > 0:
        raise ValueError(f"x0 must be strictly positive, got {x0}")
    t = np.asarray(t, dtype=float)
    return invariant_inverse(np.exp(-t) * invariant_observable(x0))
