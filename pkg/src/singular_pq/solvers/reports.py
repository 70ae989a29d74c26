"""Result containers shared by the solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SolverError(RuntimeError):
    """A solve did not converge; the partial report is attached."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class SolverReport:
    field: np.ndarray
    energy: float
    residual_norm: float
    nehari_first: float | None
    nehari_second: float | None
    iterations: int
    eps_reg_final: float
    converged: bool
    trace: list = field(default_factory=list)
    message: str = ""
    tolerance: float = 0.0
    extras: dict = field(default_factory=dict)

    def descent_energies(self) -> np.ndarray:
        """Energies of the trace entries produced by monotone (descent) phases, per stage."""
        return [np.array([e for e, _, ph, st in self.trace if ph == "descent" and st == s])
                for s in sorted({st for *_, st in self.trace})]

    def as_dict(self) -> dict:
        return {
            "energy": self.energy,
            "residual_norm": self.residual_norm,
            "nehari_first": self.nehari_first,
            "nehari_second": self.nehari_second,
            "iterations": self.iterations,
            "eps_reg_final": self.eps_reg_final,
            "converged": self.converged,
            "tolerance": self.tolerance,
            "message": self.message,
            "extras": self.extras,
        }


@dataclass
class EigenPair:
    value: float
    field: np.ndarray
    positive: bool
    residual_norm: float = 0.0
    iterations: int = 0

    def as_dict(self) -> dict:
        return {"value": self.value, "positive": self.positive,
                "residual_norm": self.residual_norm, "iterations": self.iterations}
