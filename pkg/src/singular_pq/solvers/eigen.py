"""First eigenpair of -beta Delta_q and the positive barrier solution phi_hat."""

from __future__ import annotations

import numpy as np

from ..discretization import (
    DiscreteSpace,
    gradient_power,
    gradient_power_difference,
    power_difference,
    stiffness_hessian,
)
from ..problem import ProblemSpec, _flux, operator_residual
from .common import bump
from .descent import projected_descent
from .reports import EigenPair, SolverError


def _q_parts(space: DiscreteSpace, u: np.ndarray, q: float):
    g = space.gradients(u)
    mag = np.sqrt((g**2).sum(axis=1))
    B = float(space.elem_weight @ mag**q)
    dB = q * _flux(space, g, mag, q)
    N = float(space.node_weight @ np.abs(u) ** q)
    dN = q * space.node_weight * np.abs(u) ** (q - 1) * np.sign(u)
    return B, dB, N, dN


def rayleigh_q(spec: ProblemSpec, space: DiscreteSpace, u: np.ndarray) -> float:
    B, _, N, _ = _q_parts(space, u, spec.q)
    return spec.beta * B / N


def eigen_q(spec: ProblemSpec, space: DiscreteSpace, rtol: float = 1e-13, max_outer: int = 200,
            inner_rtol: float = 1e-10) -> EigenPair:
    """First eigenpair of -beta Delta_q by nonlinear inverse iteration.

    Each step solves -beta Delta_q w = |u|^(q-2) u (a convex minimization,
    done by damped Newton) and renormalizes w in L^q. The Rayleigh quotient
    decreases monotonically to lambda_1(q, beta).
    """
    if not spec.beta > 0:
        raise ValueError("eigenvalue of -beta Delta_q needs beta > 0")
    q, beta = spec.q, spec.beta
    m = space.node_weight
    free = space.interior
    lower = np.zeros(space.n_nodes)

    def normalize(u):
        return u / float(m @ np.abs(u) ** q) ** (1.0 / q)

    u = normalize(bump(space))
    lam = rayleigh_q(spec, space, u)
    iters = 0
    for _ in range(max_outer):
        src = m * np.abs(u) ** (q - 1)

        def f(w):
            return beta * gradient_power(space, w, q) / q - float(src @ w)

        def grad(w):
            out = beta * _flux(space, space.gradients(w), np.sqrt((space.gradients(w) ** 2).sum(axis=1)), q) - src
            out[space.boundary_mask] = 0.0
            return out

        def fdiff(a, b):
            return beta * gradient_power_difference(space, a, b, q) / q - float(src @ (b - a))

        out = projected_descent(f, grad, lambda w: [stiffness_hessian(space, w, q, beta)],
                                lam ** (-1.0 / (q - 1)) * u, free, lower=lower, rtol=inner_rtol,
                                atol=1e-300, max_iter=200, fdiff=fdiff)
        iters += 1
        u = normalize(out.u)
        new = rayleigh_q(spec, space, u)
        done = abs(lam - new) <= rtol * new
        lam = new
        if done:
            break
    B, dB, N, dN = _q_parts(space, u, q)
    resid = (beta * dB - lam * dN)[free] / q
    return EigenPair(value=lam, field=u, positive=bool(np.all(u[free] > 0)),
                     residual_norm=float(np.max(np.abs(resid))), iterations=iters)


def barrier_phi_hat(spec: ProblemSpec, space: DiscreteSpace, lambda_hat: float | None = None,
                    eig: EigenPair | None = None, rtol: float = 1e-10, atol: float = 1e-13,
                    max_iter: int = 500) -> EigenPair:
    """Positive solution of -Delta_p phi - beta Delta_q phi = lambda_hat phi^(q-1).

    Computed as the global minimizer of A/p + beta B/q - (lambda_hat/q) int |phi|^q,
    which is nontrivial exactly when lambda_hat exceeds the first q-eigenvalue.
    Defaults to lambda_hat = 2 lambda_1(q, beta).
    """
    eig = eigen_q(spec, space) if eig is None else eig
    lam1 = eig.value
    lambda_hat = 2.0 * lam1 if lambda_hat is None else float(lambda_hat)
    if not lambda_hat > lam1:
        raise ValueError(f"lambda_hat = {lambda_hat} must exceed lambda_1(q, beta) = {lam1}")
    p, q, beta = spec.p, spec.q, spec.beta
    w = space.node_weight

    def f(u):
        g = space.gradients(u)
        mag = np.sqrt((g**2).sum(axis=1))
        return float(space.elem_weight @ mag**p / p + beta * (space.elem_weight @ mag**q) / q
                     - lambda_hat / q * (w @ np.abs(u) ** q))

    def grad(u):
        out = operator_residual(spec, space, u) - lambda_hat * w * np.abs(u) ** (q - 1) * np.sign(u)
        out[space.boundary_mask] = 0.0
        return out

    def fdiff(a, b):
        return (gradient_power_difference(space, a, b, p) / p
                + beta * gradient_power_difference(space, a, b, q) / q
                - lambda_hat / q * float(w @ power_difference(np.abs(a), np.abs(b) - np.abs(a), q)))

    def precond(u):
        return [stiffness_hessian(space, u, p) + stiffness_hessian(space, u, q, beta)]

    # best multiple of the eigenfunction as the starting point
    phi1 = eig.field
    g = space.gradients(phi1)
    A1 = float(space.elem_weight @ np.sqrt((g**2).sum(axis=1)) ** p)
    t = ((lambda_hat - lam1) / A1) ** (1.0 / (p - q))
    out = projected_descent(f, grad, precond, t * phi1, space.interior, lower=np.zeros(space.n_nodes),
                            rtol=rtol, atol=atol, max_iter=max_iter, fdiff=fdiff)
    if not out.converged:
        raise SolverError(f"barrier solve did not converge ({out.message}, residual {out.residual:.3e})")
    phi = out.u
    return EigenPair(value=lambda_hat, field=phi, positive=bool(np.all(phi[space.interior] > 0)),
                     residual_norm=out.residual, iterations=out.iterations)
