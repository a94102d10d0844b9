"""Benchmark flows, closed-form solutions and the adaptive reference integrator."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from linflow.errors import ObservableOverflow, StiffnessError

Term = Tuple[float, Tuple[int, ...]]


@dataclass(frozen=True)
class FlowField:
    """Polynomial vector field ``F: R^dim -> R^dim``.

    ``terms[j]`` lists ``(coefficient, exponents)`` pairs whose sum is the
    j-th velocity component. ``evaluator``, when given, is a hand-written
    fast path that must agree with the term expansion.
    """

    dim: int
    terms: Tuple[Tuple[Term, ...], ...]
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "flow"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if len(self.terms) != self.dim:
            raise ValueError("need one term list per output component")
        for component in self.terms:
            for _, exps in component:
                if len(exps) != self.dim or any(int(e) != e or e < 0 for e in exps):
                    raise ValueError(f"bad exponent multi-index {exps}")

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.dim:
            raise ValueError(f"state has dimension {x.shape[-1]}, expected {self.dim}")
        return x

    def expand(self, x) -> np.ndarray:
        """Evaluate by summing the polynomial terms; shape ``(..., dim)``."""
        x = self._points(x)
        out = np.zeros(x.shape, dtype=float)
        for j, component in enumerate(self.terms):
            acc = np.zeros(x.shape[:-1])
            for coef, exps in component:
                mono = np.ones(x.shape[:-1])
                for a, e in enumerate(exps):
                    if e:
                        mono = mono * x[..., a] ** e
                acc = acc + coef * mono
            out[..., j] = acc
        return out

    def __call__(self, x) -> np.ndarray:
        x = self._points(x)
        if self.evaluator is None:
            return self.expand(x)
        return np.asarray(self.evaluator(x), dtype=float)

    def component(self, j: int, x) -> np.ndarray:
        return self(x)[..., j]

    @property
    def max_degree(self) -> int:
        return max((sum(e) for comp in self.terms for _, e in comp), default=0)


def decay_flow() -> FlowField:
    """The scalar flow ``dx/dt = -x**2``."""
    return FlowField(
        dim=1,
        terms=(((-1.0, (2,)),),),
        evaluator=lambda x: -x ** 2,
        name="decay",
    )


def vdp_flow(mu: float) -> FlowField:
    """Van der Pol oscillator ``x' = y, y' = -x + mu (1 - x**2) y``."""
    mu = float(mu)

    def evaluate(s):
        x, y = s[..., 0], s[..., 1]
        return np.stack([y, -x + mu * (1.0 - x * x) * y], axis=-1)

    terms = (
        ((1.0, (0, 1)),),
        ((-1.0, (1, 0)), (mu, (0, 1)), (-mu, (2, 1))),
    )
    return FlowField(dim=2, terms=terms, evaluator=evaluate, name=f"vdp(mu={mu:g})")


def linear_flow(rate: float) -> FlowField:
    """``dx/dt = rate * x``; handy as an exactly solvable test flow."""
    rate = float(rate)
    return FlowField(dim=1, terms=(((rate, (1,)),),), evaluator=lambda x: rate * x,
                     name=f"linear({rate:g})")


def constant_flow(velocity: Sequence[float]) -> FlowField:
    """Spatially uniform flow; used for transport checks."""
    v = tuple(float(c) for c in velocity)
    dim = len(v)
    zero = (0,) * dim
    terms = tuple(((c, zero),) if c != 0.0 else () for c in v)
    return FlowField(dim=dim, terms=terms,
                     evaluator=lambda s: np.broadcast_to(np.asarray(v), s.shape).copy(),
                     name=f"constant{v}")


def analytic_decay_solution(x0: float, t):
    """Closed-form solution ``x0 / (1 + x0 t)`` of ``dx/dt = -x**2``."""
    if not x0 > 0:
        raise ValueError(f"x0 must be strictly positive, got {x0}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    out = x0 / (1.0 + x0 * t)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Trajectory:
    """States sampled at strictly increasing times; ``states`` is ``(T, dim)``."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        states = np.asarray(self.states)
        if states.ndim == 1:
            states = states[:, None]
        if states.shape[0] != times.shape[0]:
            raise ValueError(f"{times.shape[0]} times but {states.shape[0]} states")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self):
        return self.times.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def component(self, i: int) -> np.ndarray:
        return self.states[:, i]


OVERFLOW_THRESHOLD = 1e250


def integrate(rhs, y0, times, rtol=1e-10, atol=1e-10, method="DOP853",
              overflow_threshold=None) -> Trajectory:
    """Adaptive embedded Runge-Kutta integration sampled at ``times``.

    When ``overflow_threshold`` is set, integration stops as soon as any
    component reaches it in magnitude and :class:`ObservableOverflow` is
    raised carrying the samples obtained so far.
    """
    times = np.asarray(times, dtype=float).reshape(-1)
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if not (0 < rtol < 1 and 0 < atol < 1):
        raise ValueError("tolerances must lie in (0, 1)")
    if times.size == 0:
        raise ValueError("need at least one sample time")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    if times.size == 1:
        return Trajectory(times, y0[None, :].copy())

    events = None
    if overflow_threshold is not None:
        log_cap = np.log10(overflow_threshold)

        def blowup(t, y):
            peak = np.max(np.abs(y))
            return (np.log10(peak) if peak > 0 else -300.0) - log_cap

        blowup.terminal = True
        blowup.direction = 1
        events = blowup

    sol = solve_ivp(lambda t, y: rhs(y), (times[0], times[-1]), y0, method=method,
                    t_eval=times, rtol=rtol, atol=atol, events=events)
    states = sol.y.T
    if sol.status == -1:
        failed_at = sol.t[-1] if sol.t.size else times[0]
        raise StiffnessError(f"integration failed near t={failed_at:.6g}: {sol.message}",
                             time=failed_at)
    finite = np.all(np.isfinite(states), axis=1)
    if sol.status == 1 or not np.all(finite):
        t_hit = float(sol.t_events[0][0]) if (events is not None and sol.t_events[0].size) \
            else float(sol.t[np.argmin(finite)])
        keep = int(np.argmin(finite)) if not np.all(finite) else states.shape[0]
        partial = Trajectory(sol.t[:keep], states[:keep]) if keep else None
        raise ObservableOverflow(f"observables overflowed at t={t_hit:.6g}", t_hit, partial)
    return Trajectory(sol.t, states)


def reference_trajectory(flow: FlowField, x0, times, abs_tol=1e-10, rel_tol=1e-10,
                         method="DOP853") -> Trajectory:
    """High-accuracy solution of ``dx/dt = F(x)`` sampled at ``times``."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (flow.dim,):
        raise ValueError(f"x0 has shape {x0.shape}, flow has dim {flow.dim}")
    return integrate(lambda y: flow(y), x0, times, rtol=rel_tol, atol=abs_tol, method=method)


def vdp_limit_cycle_point(mu: float, start=(2.0, 0.0), warmup: float = 100.0,
                          tol: float = 1e-10) -> np.ndarray:
    """End point of a ``warmup``-long run from ``start``: a point on the limit cycle."""
    traj = reference_trajectory(vdp_flow(mu), start, [0.0, warmup], tol, tol)
    return traj.states[-1].copy()
