"""Finite-element solver and verification suite for the singular (p,q)-Laplacian problem

    -Delta_p u - beta Delta_q u = lambda u^(-delta) + u^(r-1),  u > 0 in Omega,  u = 0 on the boundary.
"""

from .discretization import (
    DiscreteSpace,
    DomainDescriptor,
    FiberingProfile,
    build_space,
    interpolate,
    norms_profile,
)
from .problem import (
    ProblemSpec,
    RegularizationSchedule,
    SpecError,
    energy,
    gradient_weak,
    nehari_derivatives,
    regularize_singular,
)
from .fibering import (
    NehariClassification,
    classify,
    e_lambda,
    fibering_eval,
    find_roots,
    find_tmax,
    lambda_star,
    lower_bound_constants,
)

__all__ = [
    "DiscreteSpace",
    "DomainDescriptor",
    "FiberingProfile",
    "NehariClassification",
    "ProblemSpec",
    "RegularizationSchedule",
    "SpecError",
    "build_space",
    "classify",
    "e_lambda",
    "energy",
    "fibering_eval",
    "find_roots",
    "find_tmax",
    "gradient_weak",
    "interpolate",
    "lambda_star",
    "lower_bound_constants",
    "nehari_derivatives",
    "norms_profile",
    "regularize_singular",
]
