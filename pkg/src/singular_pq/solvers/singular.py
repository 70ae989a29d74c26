"""The purely singular problem and its positive lower barrier."""

from __future__ import annotations

import numpy as np

from ..discretization import DiscreteSpace, check_field
from ..problem import ProblemSpec, RegularizationSchedule, convex_hessian, energy, energy_difference, gradient_weak
from .common import bump, default_schedule, stage_rtol
from .descent import projected_descent
from .reports import SolverReport


def solve_singular(spec: ProblemSpec, space: DiscreteSpace, schedule: RegularizationSchedule | None = None,
                   init: np.ndarray | None = None, rtol: float = 1e-8, atol: float = 1e-12,
                   max_iter: int = 300) -> SolverReport:
    """Minimize the energy without the r-power term over nonnegative fields.

    The functional is strictly convex on the nonnegative cone, so the Newton
    matrix (gradient stiffness plus the singular diagonal) is SPD and the
    descent below is a damped Newton method.
    """
    schedule = default_schedule(schedule)
    if schedule.terminal_eps > 1e-8:
        raise ValueError("singular solve needs terminal_eps <= 1e-8")
    start = 0.1 * bump(space)
    u = start.copy() if init is None else np.maximum(np.asarray(init, float), 0.0)
    check_field(space, u)
    u[space.boundary_mask] = 0.0
    free = space.interior
    lower = np.zeros(space.n_nodes)
    # the stopping scale is the residual of the fixed default start, so the
    # final accuracy does not depend on how rough the initial guess is
    ref = float(np.max(np.abs(gradient_weak(spec, space, start, schedule.eps_values[0],
                                            include_power=False))))
    trace, iters = [], 0
    res = None
    for i, eps in enumerate(schedule.eps_values):
        out = projected_descent(
            lambda v: energy(spec, space, v, eps, include_power=False),
            lambda v: gradient_weak(spec, space, v, eps, include_power=False),
            lambda v: [convex_hessian(spec, space, v, eps)],
            u, free, lower=lower, rtol=stage_rtol(i, schedule, rtol), atol=atol,
            max_iter=max_iter, stage=i, res_ref=ref,
            fdiff=lambda a, b: energy_difference(spec, space, a, b, eps, include_power=False),
        )
        u, res = out.u, out
        trace += out.trace
        iters += out.iterations
    return SolverReport(
        field=u, energy=res.f, residual_norm=res.residual, nehari_first=None, nehari_second=None,
        iterations=iters, eps_reg_final=schedule.terminal_eps, converged=res.converged, trace=trace,
        message=res.message, tolerance=max(rtol * ref, atol),
        extras={"exact_energy": energy(spec, space, u, 0.0, include_power=False)},
    )


def lower_barrier_constant(u_singular: np.ndarray, phi_hat: np.ndarray, space: DiscreteSpace | None = None) -> float:
    """Largest eps with u >= eps*phi_hat at every interior node."""
    u = np.asarray(u_singular, float)
    phi = np.asarray(phi_hat, float)
    if u.shape != phi.shape:
        raise ValueError("fields differ in length")
    mask = space.interior if space is not None else phi > 0
    if np.any(phi[mask] <= 0):
        raise ValueError("phi_hat must be positive at every interior node")
    ratio = u[mask] / phi[mask]
    eps = float(ratio.min())
    if not eps > 0:
        node = int(np.flatnonzero(mask)[np.argmin(ratio)])
        raise ValueError(f"nonpositive barrier ratio {eps} at node {node}")
    return eps
