"""Solvers: singular problem, eigenpairs, Nehari branches, box minimization and sweeps."""

from .box import (
    ComparisonVerdict,
    SweepResult,
    compare_fields,
    is_subsolution,
    is_supersolution,
    solve_at_lambda,
    solve_between,
    sweep_lambda,
)
from .descent import DescentResult, projected_descent
from .eigen import barrier_phi_hat, eigen_q, rayleigh_q
from .nehari import minimize_nehari, nehari_projection
from .reports import EigenPair, SolverError, SolverReport
from .singular import lower_barrier_constant, solve_singular

__all__ = [
    "ComparisonVerdict",
    "DescentResult",
    "EigenPair",
    "SolverError",
    "SolverReport",
    "SweepResult",
    "barrier_phi_hat",
    "compare_fields",
    "eigen_q",
    "is_subsolution",
    "is_supersolution",
    "lower_barrier_constant",
    "minimize_nehari",
    "nehari_projection",
    "projected_descent",
    "rayleigh_q",
    "solve_at_lambda",
    "solve_between",
    "solve_singular",
    "sweep_lambda",
]
