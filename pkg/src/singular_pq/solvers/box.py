"""Sub/supersolution checks, box-constrained minimization and the lambda sweep."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..discretization import DiscreteSpace, check_field
from ..problem import ProblemSpec, RegularizationSchedule, convex_hessian, energy, energy_difference, gradient_weak
from .common import default_schedule, stage_rtol
from .descent import projected_descent
from .eigen import barrier_phi_hat
from .nehari import full_hessian
from .reports import SolverReport
from .singular import lower_barrier_constant, solve_singular


@dataclass(frozen=True)
class ComparisonVerdict:
    ok: bool
    worst_node: int
    worst_violation: float

    def __bool__(self):
        return self.ok


def compare_fields(u_sub: np.ndarray, u_super: np.ndarray, tol: float = 1e-6) -> ComparisonVerdict:
    """u_sub <= u_super + tol at every node; reports the node with the largest excess."""
    u_sub, u_super = np.asarray(u_sub, float), np.asarray(u_super, float)
    if u_sub.shape != u_super.shape:
        raise ValueError("fields differ in length")
    excess = u_sub - u_super
    i = int(np.argmax(excess))
    return ComparisonVerdict(bool(excess[i] <= tol), i, float(excess[i]))


def weak_pairings(spec, space, u, eps_reg=1e-10, lam=None) -> np.ndarray:
    """Residual tested against every interior hat function."""
    return gradient_weak(spec, space, u, eps_reg, lam)[space.interior]


def is_subsolution(spec, space, u, tol=1e-9, eps_reg=1e-10, lam=None) -> bool:
    return bool(np.all(weak_pairings(spec, space, u, eps_reg, lam) <= tol))


def is_supersolution(spec, space, u, tol=1e-9, eps_reg=1e-10, lam=None) -> bool:
    return bool(np.all(weak_pairings(spec, space, u, eps_reg, lam) >= -tol))


def _box_solve(spec, space, u0, lower, upper, schedule, rtol, atol, max_iter, diverged=None):
    trace, iters, ref, out = [], 0, None, None
    u = u0
    for i, eps in enumerate(schedule.eps_values):
        out = projected_descent(
            lambda v, eps=eps: energy(spec, space, v, eps),
            lambda v, eps=eps: gradient_weak(spec, space, v, eps),
            lambda v, eps=eps: [full_hessian(spec, space, v, eps), convex_hessian(spec, space, v, eps)],
            u, space.interior, lower=lower, upper=upper, rtol=stage_rtol(i, schedule, rtol), atol=atol,
            max_iter=max_iter, stage=i, res_ref=ref,
            fdiff=lambda a, b, eps=eps: energy_difference(spec, space, a, b, eps), diverged=diverged,
        )
        if ref is None:
            ref = out.trace[0][1]
        u = out.u
        trace += out.trace
        iters += out.iterations
        if out.message == "diverged":
            break
    return out, trace, iters, max(rtol * ref, atol)


def solve_between(spec: ProblemSpec, space: DiscreteSpace, sub: np.ndarray, sup: np.ndarray,
                  schedule: RegularizationSchedule | None = None, rtol: float = 1e-8, atol: float = 1e-12,
                  max_iter: int = 300, check_ordered_pair: bool = True, pair_tol: float = 1e-9) -> SolverReport:
    """Minimize I_lambda over the box {sub <= u <= sup}, starting from sub."""
    schedule = default_schedule(schedule)
    check_field(space, sub)
    check_field(space, sup)
    if np.any(sub > sup):
        i = int(np.argmax(sub - sup))
        raise ValueError(f"box violated: sub exceeds super at node {i}")
    if check_ordered_pair:
        eps = schedule.terminal_eps
        if not is_subsolution(spec, space, sub, pair_tol, eps):
            raise ValueError("lower field is not a discrete subsolution")
        if not is_supersolution(spec, space, sup, pair_tol, eps):
            raise ValueError("upper field is not a discrete supersolution")
    out, trace, iters, tol = _box_solve(spec, space, np.asarray(sub, float).copy(), sub, sup, schedule,
                                        rtol, atol, max_iter)
    u = out.u
    return SolverReport(
        field=u, energy=out.f, residual_norm=out.residual, nehari_first=None, nehari_second=None,
        iterations=iters, eps_reg_final=schedule.terminal_eps, converged=out.converged, trace=trace,
        message=out.message, tolerance=tol,
        extras={"energy_sub": energy(spec, space, sub, schedule.terminal_eps)},
    )


@dataclass
class SweepResult:
    rows: list
    bracket: tuple
    downward_closed: bool
    nonempty: bool
    top_failed: bool
    extras: dict = field(default_factory=dict)

    def as_dict(self):
        return {"rows": self.rows, "bracket": list(self.bracket), "downward_closed": self.downward_closed,
                "nonempty": self.nonempty, "top_failed": self.top_failed, "extras": self.extras}


def solve_at_lambda(spec: ProblemSpec, space: DiscreteSpace, schedule=None, phi_hat=None, rtol=1e-8,
                    atol=1e-12, max_iter=300, blowup=1e3):
    """Local minimizer of I_lambda above the singular solution, or a recorded failure.

    Descent starts at the singular solution (a subsolution) and is confined
    to fields above it. Without a solution the iterates escape: the run is
    stopped once max(u) exceeds ``blowup`` times its start, or the budget ends.
    """
    schedule = default_schedule(schedule)
    sing = solve_singular(spec, space, schedule)
    row = {"lambda": spec.lam, "converged": False, "energy": float("nan"), "barrier_eps": float("nan"),
           "max_u": float("nan"), "iterations": 0, "message": ""}
    if not sing.converged:
        row["message"] = f"singular solve failed: {sing.message}"
        return row, None
    ul = sing.field
    cap = blowup * max(1.0, float(ul.max()))
    out, trace, iters, tol = _box_solve(
        spec, space, ul.copy(), ul, None, schedule, rtol, atol, max_iter,
        diverged=lambda v, f: float(v.max()) > cap or not np.isfinite(f),
    )
    row.update(converged=bool(out.converged), energy=float(out.f), max_u=float(out.u.max()),
               iterations=int(iters), message=out.message)
    if out.converged and phi_hat is not None:
        row["barrier_eps"] = lower_barrier_constant(out.u, phi_hat, space)
    return row, out.u if out.converged else None


def sweep_lambda(spec: ProblemSpec, space: DiscreteSpace, lambda_grid, schedule=None, threads: int = 1,
                 phi_hat=None, **kw) -> SweepResult:
    """Solve along an increasing lambda grid and bracket the largest solvable lambda."""
    grid = np.asarray(lambda_grid, float)
    if grid.ndim != 1 or len(grid) == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("lambda grid must be increasing and positive")
    if phi_hat is None:
        phi_hat = barrier_phi_hat(spec, space).field

    def one(lam):
        return solve_at_lambda(spec.with_lambda(float(lam)), space, schedule, phi_hat, **kw)[0]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(one, grid))
    else:
        rows = [one(lam) for lam in grid]
    ok = [r["converged"] for r in rows]
    first_fail = next((i for i, s in enumerate(ok) if not s), None)
    downward_closed = first_fail is None or not any(ok[first_fail:])
    last_ok = max((i for i, s in enumerate(ok) if s), default=None)
    lo = float(grid[last_ok]) if last_ok is not None else 0.0
    hi = float(grid[first_fail]) if first_fail is not None else float("inf")
    return SweepResult(rows=rows, bracket=(lo, hi), downward_closed=bool(downward_closed),
                       nonempty=last_ok is not None, top_failed=not ok[-1])
