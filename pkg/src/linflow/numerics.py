"""Shared numerical kernels.

Dense matrix exponential (Pade scaling and squaring), Krylov exponential
action, minimum-norm least squares and thin FFT wrappers. Every kernel is
deterministic: no randomized estimators and a fixed reduction order.
"""
from __future__ import annotations

import math
from typing import Callable, NamedTuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse

from linflow.errors import KrylovConvergenceError

__all__ = ["expm", "expmv", "least_squares", "LstsqResult", "fft", "ifft"]

# Pade coefficients b_0..b_m and the 1-norm bounds theta_m for which the
# degree-m approximant meets unit round-off backward error (Higham 2005).
_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_low(A, m, ident):
    b = _PADE[m]
    A2 = A @ A
    powers = [ident, A2]
    for _ in range(2, m // 2 + 1):
        powers.append(powers[-1] @ A2)
    U = sum(b[2 * k + 1] * powers[k] for k in range(m // 2 + 1))
    V = sum(b[2 * k] * powers[k] for k in range(m // 2 + 1))
    return A @ U, V


def _pade13(A, ident):
    b = _PADE[13]
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    return U, V


def expm(A):
    """Matrix exponential by scaling and squaring with Pade approximants.

    The approximant degree (3, 5, 7, 9 or 13) and the number of squarings
    are chosen from the 1-norm of ``A`` so that the backward error of the
    approximant stays at unit round-off.

    Parameters
    ----------
    A : (n, n) array_like
        Real or complex square matrix.

    Returns
    -------
    ndarray
        ``exp(A)`` with the dtype of ``A`` promoted to inexact.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expm expects a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("expm input contains non-finite entries")
    if not np.issubdtype(A.dtype, np.inexact):
        A = A.astype(float)
    n = A.shape[0]
    if n == 0:
        return A.copy()
    ident = np.eye(n, dtype=A.dtype)
    norm1 = np.linalg.norm(A, 1)
    if norm1 == 0.0:
        return ident

    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            U, V = _pade_low(A, m, ident)
            return scipy.linalg.solve(V - U, V + U)

    s = max(0, int(math.ceil(math.log2(norm1 / _THETA[13]))))
    As = A / (2.0 ** s)
    U, V = _pade13(As, ident)
    R = scipy.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


Operator = Union[np.ndarray, scipy.sparse.spmatrix, Callable[[np.ndarray], np.ndarray]]


def _as_matvec(A):
    if callable(A) and not hasattr(A, "shape"):
        return A
    if hasattr(A, "matvec"):
        return A.matvec
    return lambda v: A @ v


def expmv(A: Operator, v, t: float = 1.0, tol: float = 1e-10,
          krylov_dim: int = 30, max_substeps: int = 100_000):
    """Approximate ``exp(t A) v`` with restarted Arnoldi projections.

    The interval ``[0, t]`` is covered by substeps. On each substep an
    Arnoldi basis of dimension ``krylov_dim`` is built from the current
    vector, the small projected exponential is evaluated with :func:`expm`,
    and the substep length is shrunk until the a-posteriori error estimate
    drops below ``tol * ||v||`` prorated over the interval.

    ``A`` may be a dense array, a scipy sparse matrix, a ``LinearOperator``
    or a plain callable ``v -> A v``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    matvec = _as_matvec(A)
    v = np.asarray(v)
    n = v.shape[0]
    scale = np.linalg.norm(v)
    if scale == 0.0 or t == 0.0:
        return v.astype(np.result_type(v.dtype, float), copy=True)
    sign = 1.0 if t > 0 else -1.0
    t_total = abs(t)
    m_max = max(1, min(krylov_dim, n))
    probe = matvec(v / scale)
    dtype = np.result_type(v.dtype, probe.dtype, float)
    w = v.astype(dtype, copy=True)
    if not np.any(probe):
        return w  # v is in the kernel: exp(tA) v = v exactly

    t_done = 0.0
    tau = t_total
    substeps = 0
    while t_done < t_total:
        substeps += 1
        if substeps > max_substeps:
            raise KrylovConvergenceError(
                f"expmv did not finish after {max_substeps} substeps (t_done={t_done:.3g})")
        beta = np.linalg.norm(w)
        if beta == 0.0:
            return w
        V = np.zeros((m_max + 1, n), dtype=dtype)
        H = np.zeros((m_max + 1, m_max), dtype=dtype)
        V[0] = w / beta
        m = m_max
        breakdown = False
        for j in range(m_max):
            z = sign * matvec(V[j])
            for i in range(j + 1):
                H[i, j] = np.vdot(V[i], z)
                z = z - H[i, j] * V[i]
            # second pass keeps the basis orthogonal for non-normal A
            for i in range(j + 1):
                c = np.vdot(V[i], z)
                H[i, j] += c
                z = z - c * V[i]
            h = np.linalg.norm(z)
            hnorm = np.linalg.norm(H[: j + 1, j])
            if h <= 1e-13 * max(hnorm, 1e-300):
                m = j + 1
                breakdown = True
                break
            H[j + 1, j] = h
            V[j + 1] = z / h

        if breakdown:
            tau = t_total - t_done
            E = expm(tau * H[:m, :m])
            w = beta * (E[:, 0] @ V[:m])
            t_done = t_total
            continue

        h_next = H[m, m - 1].real
        remaining = t_total - t_done
        tau = min(tau, remaining)
        while True:
            aug = np.zeros((m + 1, m + 1), dtype=H.dtype)
            aug[:m, :m] = tau * H[:m, :m]
            aug[m, m - 1] = 1.0
            E = expm(aug)
            err = beta * abs(h_next) * tau * abs(E[m, 0])
            allowed = tol * scale * tau / t_total
            if err <= allowed:
                break
            shrink = 0.9 * (allowed / err) ** (1.0 / m)
            tau *= min(0.5, max(0.1, shrink))
            if tau < 1e-14 * t_total:
                raise KrylovConvergenceError("expmv substep underflow")
        w = beta * (E[:m, 0] @ V[:m])
        t_done = t_total if tau == remaining else t_done + tau
        grow = 0.9 * (allowed / max(err, 1e-300)) ** (1.0 / m)
        tau = tau * min(2.0, max(1.0, grow))
    return w


class LstsqResult(NamedTuple):
    solution: np.ndarray
    rank: int
    residual: float


def least_squares(A, B, rcond=None) -> LstsqResult:
    """Minimum-norm solution of ``min ||A X - B||_F`` via SVD (LAPACK gelsd).

    Rank deficiency is not an error: the numerical rank is returned so the
    caller can decide how loudly to report it.
    """
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"row mismatch: A has {A.shape[0]} rows, B has {B.shape[0]}")
    X, _, rank, _ = scipy.linalg.lstsq(A, B, cond=rcond, lapack_driver="gelsd")
    residual = float(np.linalg.norm(A @ X - B))
    return LstsqResult(X, int(rank), residual)


def fft(v, axis=-1):
    """Unnormalized forward DFT along ``axis``."""
    return np.fft.fft(v, axis=axis)


def ifft(v, axis=-1):
    """Inverse DFT along ``axis`` with the 1/N factor."""
    return np.fft.ifft(v, axis=axis)
