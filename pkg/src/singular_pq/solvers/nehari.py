"""Minimization of the energy on the two Nehari branches."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..discretization import DiscreteSpace, check_field, norms_profile
from ..fibering import RootAbsentError, classify, project
from ..problem import (
    ProblemSpec,
    RegularizationSchedule,
    convex_hessian,
    energy,
    energy_difference,
    gradient_weak,
    nehari_derivatives,
    power_hessian_diag,
)
from .common import bump, default_schedule, stage_rtol
from .descent import RetractionFailed, _solve, projected_descent
from .reports import SolverReport
from .singular import solve_singular

BRANCHES = ("plus", "minus")


def nehari_projection(spec: ProblemSpec, space: DiscreteSpace, u: np.ndarray, branch: str) -> np.ndarray:
    """t*u with t the branch root of the fibering equation (raises RootAbsentError)."""
    prof = norms_profile(spec, space, u)
    if prof.is_zero:
        raise RootAbsentError("zero field has no Nehari scaling")
    return project(prof, spec, branch) * u


def default_init(spec: ProblemSpec, space: DiscreteSpace, schedule=None, u_singular=None) -> np.ndarray:
    """Singular solution plus a small positive bump."""
    if u_singular is None:
        u_singular = solve_singular(spec, space, schedule).field
    return u_singular + 0.1 * max(float(u_singular.max()), 1e-3) * bump(space)


def full_hessian(spec, space, u, eps):
    return convex_hessian(spec, space, u, eps) - sp.diags(power_hessian_diag(spec, space, u))


def minimize_nehari(spec: ProblemSpec, space: DiscreteSpace, branch: str, init: np.ndarray | None = None,
                    schedule: RegularizationSchedule | None = None, rtol: float = 1e-8, atol: float = 1e-12,
                    max_iter: int = 400, newton_steps: int = 30, u_singular: np.ndarray | None = None) -> SolverReport:
    """Minimize I_lambda over the plus or minus Nehari branch.

    Each trial point is clamped to the nonnegative cone and rescaled onto the
    branch by the exact fibering root, so the iterates never leave the branch.
    Descent stages run along the regularization schedule; a Newton polish on
    the full Hessian (trace phase ``newton``) tightens the weak residual when
    the descent stalls short of the tolerance.
    """
    if branch not in BRANCHES:
        raise ValueError("branch must be 'plus' or 'minus'")
    schedule = default_schedule(schedule)
    u0 = default_init(spec, space, schedule, u_singular) if init is None else np.maximum(np.asarray(init, float), 0)
    check_field(space, u0)
    u0 = u0.copy()
    u0[space.boundary_mask] = 0.0
    cls = classify(norms_profile(spec, space, u0), spec)
    if not cls.lambda_threshold_ok:
        raise RootAbsentError("lambda too large: the initial ray meets no Nehari point")

    def retract(v):
        try:
            return nehari_projection(spec, space, v, branch)
        except (RootAbsentError, ValueError) as exc:
            raise RetractionFailed(str(exc)) from exc

    free = space.interior
    lower = np.zeros(space.n_nodes)
    u = retract(u0)
    trace, iters, ref, out = [], 0, None, None
    for i, eps in enumerate(schedule.eps_values):
        if branch == "plus":
            def precond(v, eps=eps):
                return [full_hessian(spec, space, v, eps), convex_hessian(spec, space, v, eps)]
        else:
            def precond(v, eps=eps):
                return [convex_hessian(spec, space, v, eps)]
        out = projected_descent(
            lambda v, eps=eps: energy(spec, space, v, eps),
            lambda v, eps=eps: gradient_weak(spec, space, v, eps),
            precond, u, free, lower=lower, retract=retract, rtol=stage_rtol(i, schedule, rtol), atol=atol,
            max_iter=max_iter, stage=i, res_ref=ref,
            fdiff=lambda a, b, eps=eps: energy_difference(spec, space, a, b, eps),
        )
        if ref is None:
            ref = out.trace[0][1]
        u = out.u
        trace += out.trace
        iters += out.iterations
    eps = schedule.terminal_eps
    tol = max(rtol * ref, atol)
    res, converged, message = out.residual, out.converged, out.message
    stage = len(schedule.eps_values) - 1

    def residual_of(v):
        g = gradient_weak(spec, space, v, eps)
        return float(np.max(np.abs(g[free & ~((v <= 0) & (g > 0))]), initial=0.0)), g

    if not converged and newton_steps > 0:
        res, g = residual_of(u)
        idx = np.flatnonzero(free)
        for _ in range(newton_steps):
            H = full_hessian(spec, space, u, eps).tocsr()
            d = _solve(H[idx][:, idx], -g[idx])
            if d is None:
                break
            step, improved = 1.0, False
            for _ in range(20):
                trial = u.copy()
                trial[idx] = np.maximum(u[idx] + step * d, 0.0)
                try:
                    trial = retract(trial)
                except RetractionFailed:
                    step *= 0.5
                    continue
                r_new, g_new = residual_of(trial)
                if r_new < res:
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
            u, res, g = trial, r_new, g_new
            iters += 1
            trace.append((energy(spec, space, u, eps), res, "newton", stage))
            if res <= tol:
                converged, message = True, "converged (newton polish)"
                break
    j1, j2 = nehari_derivatives(spec, space, u)
    verdict = classify(norms_profile(spec, space, u), spec).verdict
    want = "N_plus" if branch == "plus" else "N_minus"
    if converged and verdict != want:
        converged, message = False, f"branch mismatch: ended in {verdict}"
    e = energy(spec, space, u, eps)
    return SolverReport(
        field=u, energy=e, residual_norm=res, nehari_first=j1, nehari_second=j2, iterations=iters,
        eps_reg_final=eps, converged=converged, trace=trace, message=message, tolerance=tol,
        extras={"branch": branch, "verdict": verdict, "exact_energy": energy(spec, space, u, 0.0),
                "energy_negative": bool(e < 0)},
    )
