"""Problem data, the energy functional and its weak-form gradient.

The energy of a nodal field u is

    I(u) = A/p + beta*B/q - lambda/(1-delta) * S_eps(u) - D/r

with A, B the gradient power integrals, D = int |u|^r and S_eps the (optionally
regularized) singular integral int ((u_+ + eps)^(1-delta) - eps^(1-delta)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .discretization import (
    DiscreteSpace,
    DomainDescriptor,
    FiberingProfile,
    check_field,
    gradient_power_difference,
    norms_profile,
    power_difference,
    stiffness_hessian,
)


class SpecError(ValueError):
    """Raised when problem parameters violate the standing hypotheses."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def spec_violations(n, p, q, beta, lam, delta, r, domain=None) -> list[str]:
    """Every violated hypothesis, as human readable constraint names."""
    out = []
    if not (isinstance(n, (int, np.integer)) and n >= 2):
        out.append("n must be an integer >= 2")
    if not n > p:
        out.append("requires n > p")
    if not 1 < q < p:
        out.append("requires 1 < q < p")
    if not p < r:
        out.append("requires p < r")
    if n > p and r > n * p / (n - p) * (1 + 1e-14):
        out.append("requires r <= p* = n p/(n - p)")
    if not 0 < delta < 1:
        out.append("requires 0 < delta < 1 (delta = 1 is unsupported)")
    if not lam > 0:
        out.append("requires lambda > 0")
    if not beta > 0:
        out.append("requires beta > 0")
    if domain is not None and domain.kind == "radial-ball" and domain.n != n:
        out.append("radial ball dimension must equal n")
    return out


@dataclass(frozen=True)
class ProblemSpec:
    n: int = 3
    p: float = 2.0
    q: float = 1.5
    beta: float = 1.0
    lam: float = 0.1
    delta: float = 0.5
    r: float = 4.0
    domain: DomainDescriptor = field(default_factory=DomainDescriptor)

    def __post_init__(self):
        bad = spec_violations(self.n, self.p, self.q, self.beta, self.lam, self.delta, self.r,
                              self.domain)
        if bad:
            raise SpecError(bad)

    @property
    def p_star(self) -> float:
        return self.n * self.p / (self.n - self.p)

    @property
    def critical(self) -> bool:
        return math.isclose(self.r, self.p_star, rel_tol=1e-12)

    def with_lambda(self, lam: float) -> "ProblemSpec":
        return replace(self, lam=lam)

    def with_(self, **kw) -> "ProblemSpec":
        return replace(self, **kw)


@dataclass(frozen=True)
class RegularizationSchedule:
    eps_values: tuple = tuple(10.0 ** -k for k in range(2, 11))

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_values)
        if not eps:
            raise ValueError("regularization schedule is empty")
        if any(e <= 0 for e in eps):
            raise ValueError("regularization values must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("regularization values must be strictly decreasing")
        object.__setattr__(self, "eps_values", eps)

    @property
    def terminal_eps(self) -> float:
        return self.eps_values[-1]

    @classmethod
    def geometric(cls, start=1e-2, stop=1e-10, factor=10.0):
        vals = [start]
        while vals[-1] / factor >= stop * (1 - 1e-12):
            vals.append(vals[-1] / factor)
        return cls(tuple(vals))


def regularize_singular(t, delta: float, eps_reg: float):
    """Smoothed u^(-delta): (t_+ + eps)^(-delta)."""
    return (np.maximum(t, 0.0) + eps_reg) ** (-delta)


def singular_integral(spec: ProblemSpec, space: DiscreteSpace, u: np.ndarray, eps_reg: float) -> float:
    up = np.maximum(u, 0.0)
    a = 1.0 - spec.delta
    if eps_reg > 0:
        vals = (up + eps_reg) ** a - eps_reg**a
    else:
        vals = up**a
    return float(space.node_weight @ vals)


def energy(spec: ProblemSpec, space: DiscreteSpace, u: np.ndarray, eps_reg: float = 0.0,
           lam: float | None = None, include_power: bool = True) -> float:
    """I_lambda(u); with ``include_power=False`` the purely singular functional."""
    check_field(space, u)
    if eps_reg < 0:
        raise ValueError("eps_reg must be nonnegative")
    lam = spec.lam if lam is None else lam
    g = space.gradients(u)
    mag = np.sqrt((g**2).sum(axis=1))
    val = (space.elem_weight @ mag**spec.p) / spec.p + spec.beta * (space.elem_weight @ mag**spec.q) / spec.q
    val -= lam / (1.0 - spec.delta) * singular_integral(spec, space, u, eps_reg)
    if include_power:
        val -= (space.node_weight @ np.abs(u) ** spec.r) / spec.r
    return float(val)


def energy_difference(spec: ProblemSpec, space: DiscreteSpace, u: np.ndarray, v: np.ndarray,
                      eps_reg: float = 0.0, lam: float | None = None, include_power: bool = True) -> float:
    """energy(v) - energy(u), assembled term by term so that tiny steps are resolved."""
    check_field(space, u)
    check_field(space, v)
    lam = spec.lam if lam is None else lam
    w = space.node_weight
    a = 1.0 - spec.delta
    val = (gradient_power_difference(space, u, v, spec.p) / spec.p
           + spec.beta * gradient_power_difference(space, u, v, spec.q) / spec.q)
    up, vp = np.maximum(u, 0.0), np.maximum(v, 0.0)
    val -= lam / a * float(w @ power_difference(up + eps_reg, vp - up, a))
    if include_power:
        au, av = np.abs(u), np.abs(v)
        val -= float(w @ power_difference(au, av - au, spec.r)) / spec.r
    return float(val)


def singular_energy(spec, space, u, eps_reg=0.0, lam=None) -> float:
    return energy(spec, space, u, eps_reg, lam, include_power=False)


def _flux(space: DiscreteSpace, g: np.ndarray, mag: np.ndarray, s: float) -> np.ndarray:
    """sum_d G_d^T (w |g|^(s-2) g_d), i.e. the gradient of (1/s) int |grad u|^s."""
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(mag > 0, mag ** (s - 2.0), 0.0) * space.elem_weight
    out = np.zeros(space.n_nodes)
    for d, G in enumerate(space.grad_ops):
        out += G.T @ (fac * g[:, d])
    return out


def operator_residual(spec: ProblemSpec, space: DiscreteSpace, u: np.ndarray) -> np.ndarray:
    """Nodal values of the (p,q)-Laplacian part: int (|grad u|^(p-2) + beta |grad u|^(q-2)) grad u . grad phi_i."""
    g = space.gradients(u)
    mag = np.sqrt((g**2).sum(axis=1))
    return _flux(space, g, mag, spec.p) + spec.beta * _flux(space, g, mag, spec.q)


def gradient_weak(spec: ProblemSpec, space: DiscreteSpace, u: np.ndarray, eps_reg: float,
                  lam: float | None = None, include_power: bool = True) -> np.ndarray:
    """Weak residual tested against every nodal hat function.

    Exactly the gradient of ``energy(..., eps_reg)`` with respect to the nodal
    values. Boundary entries are zeroed.
    """
    if not eps_reg > 0:
        raise ValueError("eps_reg must be positive (the unregularized gradient is undefined at u = 0)")
    check_field(space, u)
    lam = spec.lam if lam is None else lam
    res = operator_residual(spec, space, u)
    sing = np.where(u >= 0, regularize_singular(u, spec.delta, eps_reg), 0.0)
    res -= lam * space.node_weight * sing
    if include_power:
        res -= space.node_weight * np.abs(u) ** (spec.r - 2.0) * u
    res[space.boundary_mask] = 0.0
    return res


def convex_hessian(spec: ProblemSpec, space: DiscreteSpace, u: np.ndarray, eps_reg: float,
                   lam: float | None = None) -> sp.csr_matrix:
    """Hessian of the convex part of the energy (everything but the -|u|^r/r term)."""
    lam = spec.lam if lam is None else lam
    K = stiffness_hessian(space, u, spec.p) + stiffness_hessian(space, u, spec.q, spec.beta)
    up = np.maximum(u, 0.0)
    diag = lam * spec.delta * space.node_weight * (up + eps_reg) ** (-spec.delta - 1.0)
    return sp.csr_matrix(K + sp.diags(diag))


def power_hessian_diag(spec: ProblemSpec, space: DiscreteSpace, u: np.ndarray) -> np.ndarray:
    """Diagonal Hessian of int |u|^r / r (lumped)."""
    return (spec.r - 1.0) * space.node_weight * np.abs(u) ** (spec.r - 2.0)


def nehari_derivatives(spec: ProblemSpec, space: DiscreteSpace, u: np.ndarray,
                       lam: float | None = None) -> tuple[float, float]:
    """(J'(1), J''(1)) of the fibering map t -> I(t u)."""
    prof = norms_profile(spec, space, u)
    if prof.is_zero:
        raise ValueError("Nehari derivatives are undefined at the zero field")
    return nehari_from_profile(prof, spec, lam)


def nehari_from_profile(prof: FiberingProfile, spec: ProblemSpec, lam: float | None = None):
    lam = spec.lam if lam is None else lam
    A, B, C, D = prof.as_tuple()
    j1 = A + spec.beta * B - lam * C - D
    j2 = (spec.p - 1) * A + spec.beta * (spec.q - 1) * B + lam * spec.delta * C - (spec.r - 1) * D
    return j1, j2


def nehari_energy(prof: FiberingProfile, spec: ProblemSpec, lam: float | None = None) -> float:
    """Energy of a Nehari member expressed without the r-term."""
    lam = spec.lam if lam is None else lam
    A, B, C, _ = prof.as_tuple()
    r = spec.r
    return ((1 / spec.p - 1 / r) * A + spec.beta * (1 / spec.q - 1 / r) * B
            - lam * (1 / (1 - spec.delta) - 1 / r) * C)
