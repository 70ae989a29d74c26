"""Projected, preconditioned descent with Armijo backtracking.

Free variables are the interior nodes; optional lower/upper bound fields turn
the iteration into a box-constrained (projected) method, and an optional
retraction maps trial points back onto a constraint set (e.g. a Nehari
branch). Preconditioners are tried in order until one yields a descent
direction, so a possibly indefinite Newton matrix can be offered ahead of a
safe SPD fallback.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

ARMIJO_C = 1e-4
SHRINK = 0.5
MAX_BACKTRACKS = 60


class RetractionFailed(ValueError):
    """Trial point has no image on the constraint set."""


@dataclass
class DescentResult:
    u: np.ndarray
    f: float
    residual: float
    iterations: int
    converged: bool
    message: str
    trace: list = field(default_factory=list)


def _solve(H: sp.spmatrix, rhs: np.ndarray) -> np.ndarray | None:
    try:
        with np.errstate(all="ignore"):
            d = spla.spsolve(sp.csc_matrix(H), rhs)
    except (RuntimeError, ValueError):
        return None
    if not np.all(np.isfinite(d)):
        return None
    return np.atleast_1d(d)


def projected_descent(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    precond: Callable[[np.ndarray], Sequence[sp.spmatrix]],
    u0: np.ndarray,
    free: np.ndarray,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
    retract: Callable[[np.ndarray], np.ndarray] | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-12,
    max_iter: int = 500,
    diverged: Callable[[np.ndarray, float], bool] | None = None,
    stage: int = 0,
    res_ref: float | None = None,
    fdiff: Callable[[np.ndarray, np.ndarray], float] | None = None,
) -> DescentResult:
    """Minimize ``f`` over the free nodes, keeping ``lower <= u <= upper``.

    Convergence: max-norm of the projected gradient below
    ``max(rtol * res_ref, atol)`` where ``res_ref`` defaults to the initial
    projected gradient. Every accepted step satisfies the Armijo condition, so
    recorded energies are nonincreasing. When ``fdiff(u, v)`` (an accurate
    f(v) - f(u)) is supplied, the Armijo test uses it, which keeps the line
    search meaningful after the energy has converged to rounding level.
    """
    n = len(u0)
    lo = np.full(n, -np.inf) if lower is None else np.asarray(lower, float)
    hi = np.full(n, np.inf) if upper is None else np.asarray(upper, float)
    if np.any(lo[free] > hi[free]):
        raise ValueError("lower bound exceeds upper bound")
    pinned = free & (hi - lo <= 0)
    var = free & ~pinned

    def project(v):
        w = v.copy()
        w[var] = np.clip(w[var], lo[var], hi[var])
        w[pinned] = lo[pinned]
        w[~free] = u0[~free]
        return w

    u = project(u0)
    if retract is not None:
        u = retract(u)
    fu = f(u)
    trace = []

    def projected_gradient(u, g):
        tol = 1e-12 * (1.0 + np.abs(u))
        at_lo = var & (u - lo <= tol) & (g > 0)
        at_hi = var & (hi - u <= tol) & (g < 0)
        act = at_lo | at_hi
        pg = np.where(var & ~act, g, 0.0)
        return pg, act

    g = grad(u)
    pg, act = projected_gradient(u, g)
    res = float(np.max(np.abs(pg), initial=0.0))
    ref = res if res_ref is None else res_ref
    tol = max(rtol * ref, atol)
    trace.append((fu, res, "descent", stage))
    message = "max_iter"
    converged = res <= tol
    it = 0
    while not converged and it < max_iter:
        it += 1
        F = var & ~act
        idx = np.flatnonzero(F)
        d = np.zeros(n)
        found = False
        for H in precond(u):
            H = sp.csr_matrix(H)
            dF = _solve(H[idx][:, idx], -g[idx])
            if dF is not None and float(g[idx] @ dF) < 0:
                d[idx] = dF
                found = True
                break
        if not found:
            d[idx] = -g[idx]
        alpha = 1.0
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            trial = project(u + alpha * d)
            try:
                if retract is not None:
                    trial = retract(trial)
                diff = f(trial) - fu if fdiff is None else fdiff(u, trial)
            except RetractionFailed:
                alpha *= SHRINK
                continue
            dec = float(g @ (trial - u))
            if dec >= 0:
                dec = alpha * float(g @ d)
            if np.isfinite(diff) and diff <= ARMIJO_C * dec and diff <= 0:
                accepted = True
                break
            alpha *= SHRINK
        if not accepted:
            message = "stagnated"
            break
        u, fu = trial, fu + diff
        g = grad(u)
        pg, act = projected_gradient(u, g)
        res = float(np.max(np.abs(pg), initial=0.0))
        trace.append((fu, res, "descent", stage))
        if diverged is not None and diverged(u, fu):
            message = "diverged"
            break
        converged = res <= tol
    if converged:
        message = "converged"
    return DescentResult(u, fu, res, it, converged, message, trace)
