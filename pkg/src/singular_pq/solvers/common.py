"""Helpers shared by the solvers: initial guesses and stage tolerances."""

from __future__ import annotations

import numpy as np

from ..discretization import DiscreteSpace, interpolate
from ..problem import RegularizationSchedule

STAGE_RTOL = 1e-4


def bump(space: DiscreteSpace) -> np.ndarray:
    """Positive field vanishing on the boundary with unit maximum."""
    L = space.domain.size
    if space.kind == "interval":
        return interpolate(space, lambda x: 4.0 * x * (L - x) / L**2)
    if space.kind == "square":
        return interpolate(space, lambda x, y: 16.0 * x * (L - x) * y * (L - y) / L**4)
    return interpolate(space, lambda r: 1.0 - (r / L) ** 2)


def random_positive(space: DiscreteSpace, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Random nonnegative conforming field: a bump times a positive random profile."""
    u = bump(space) * rng.uniform(0.2, 1.0, space.n_nodes) * scale
    u[space.boundary_mask] = 0.0
    return u


def default_schedule(schedule) -> RegularizationSchedule:
    return RegularizationSchedule() if schedule is None else schedule


def stage_rtol(i: int, schedule: RegularizationSchedule, rtol: float) -> float:
    return rtol if i == len(schedule.eps_values) - 1 else max(rtol, STAGE_RTOL)
