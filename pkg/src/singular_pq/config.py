"""Experiment configuration: flat TOML sections [problem], [mesh], [run]."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import tomli

from .discretization import DomainDescriptor
from .problem import ProblemSpec, RegularizationSchedule, spec_violations

COMMANDS = ("solve", "fibering", "sweep", "verify", "bubble")

PROBLEM_KEYS = {"n", "p", "q", "beta", "lambda", "lambda_factor", "delta", "r"}
MESH_KEYS = {"kind", "resolution", "size"}
RUN_DEFAULTS = {
    "command": None,
    "seed": 0,
    "output_dir": "out",
    "rtol": 1e-8,
    "atol": 1e-12,
    "eps_start": 1e-2,
    "eps_stop": 1e-10,
    "eps_factor": 10.0,
    "max_iter": 400,
    "branch": "both",
    "field": "",
    "lambda_grid": [],
    "lambda_min_factor": 1e-3,
    "lambda_max_factor": 1e3,
    "n_lambda": 20,
    "bubble_eps": [2.0**-k for k in range(6, 14)],
    "mu": 0.25,
    "rho": 1.2,
    "l_values": [1.2, 1.6],
    "gap_eps": 1e-3,
    "n_directions": 50,
}
MESH_DEFAULTS = {"kind": "radial-ball", "resolution": 256, "size": 1.0}
PROBLEM_DEFAULTS = {"n": 3, "p": 2.0, "q": 1.5, "beta": 1.0, "delta": 0.5, "r": 4.0}


class ConfigError(ValueError):
    """Every problem found in a configuration document."""

    def __init__(self, violations, line: int | None = None):
        self.violations = list(violations)
        self.line = line
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class ExperimentConfig:
    spec: ProblemSpec
    lambda_factor: float | None
    mesh_kind: str
    resolution: int
    command: str | None
    seed: int
    output_dir: str
    schedule: RegularizationSchedule
    params: dict = field(default_factory=dict)

    def header(self) -> dict:
        """Fully defaulted configuration, echoed at the top of every report."""
        s = self.spec
        return {
            "problem": {"n": s.n, "p": s.p, "q": s.q, "beta": s.beta, "lambda": s.lam,
                        "lambda_factor": self.lambda_factor, "delta": s.delta, "r": s.r, "p_star": s.p_star},
            "mesh": {"kind": self.mesh_kind, "resolution": self.resolution, "size": s.domain.size},
            "run": {"command": self.command, "seed": self.seed, "output_dir": self.output_dir,
                    "eps_values": list(self.schedule.eps_values), **self.params},
        }


def _number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_types(section, data, defaults, errors):
    for k, v in data.items():
        if k in defaults and defaults[k] is not None:
            d = defaults[k]
            if isinstance(d, list):
                if not (isinstance(v, list) and all(_number(x) for x in v)):
                    errors.append(f"[{section}] {k} must be an array of numbers")
            elif isinstance(d, str):
                if not isinstance(v, str):
                    errors.append(f"[{section}] {k} must be a string")
            elif isinstance(d, int) and not isinstance(d, bool) and k in {"seed", "max_iter", "n_lambda",
                                                                          "n_directions", "resolution", "n"}:
                if not (isinstance(v, int) and not isinstance(v, bool)):
                    errors.append(f"[{section}] {k} must be an integer")
            elif not _number(v):
                errors.append(f"[{section}] {k} must be a number")


def load_config(text: str) -> ExperimentConfig:
    """Parse and validate a configuration; raises ConfigError listing every violation."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        line = int(m.group(1)) if m else None
        raise ConfigError([f"parse error at line {line}: {exc}"], line) from None
    errors = []
    for sec in doc:
        if sec not in ("problem", "mesh", "run"):
            errors.append(f"unknown section [{sec}]")
    sections = {}
    for sec, allowed in (("problem", PROBLEM_KEYS), ("mesh", MESH_KEYS), ("run", set(RUN_DEFAULTS))):
        data = doc.get(sec, {})
        if not isinstance(data, dict):
            errors.append(f"[{sec}] must be a table")
            data = {}
        for k in data:
            if k not in allowed:
                errors.append(f"unknown key [{sec}] {k}")
        sections[sec] = {k: v for k, v in data.items() if k in allowed}
    prob = {**PROBLEM_DEFAULTS, **sections["problem"]}
    mesh = {**MESH_DEFAULTS, **sections["mesh"]}
    run = {**RUN_DEFAULTS, **sections["run"]}
    # value checks below need well-typed values; unknown names do not block them
    type_errors = []
    _check_types("problem", prob, {**PROBLEM_DEFAULTS, "lambda": 0.0, "lambda_factor": 0.0}, type_errors)
    _check_types("mesh", mesh, MESH_DEFAULTS, type_errors)
    _check_types("run", run, RUN_DEFAULTS, type_errors)
    if type_errors:
        raise ConfigError(errors + type_errors)

    lam, factor = prob.get("lambda"), prob.get("lambda_factor")
    if lam is not None and factor is not None:
        errors.append("give either [problem] lambda or lambda_factor, not both")
    if lam is None and factor is None:
        factor = 0.3
    if factor is not None and not factor > 0:
        errors.append("requires lambda_factor > 0")
    if mesh["kind"] not in ("interval", "square", "radial-ball"):
        errors.append(f"unsupported mesh kind {mesh['kind']!r}")
    if not mesh["resolution"] >= 3:
        errors.append("requires resolution >= 3")
    if not mesh["size"] > 0:
        errors.append("requires mesh size > 0")
    if run["command"] is not None and run["command"] not in COMMANDS:
        errors.append(f"unknown command {run['command']!r}")
    if run["branch"] not in ("plus", "minus", "both"):
        errors.append("branch must be plus, minus or both")
    n = prob["n"]
    domain = None
    if not any(e.startswith(("unsupported mesh", "requires resolution", "requires mesh")) for e in errors):
        if mesh["kind"] == "radial-ball":
            domain = DomainDescriptor("radial-ball", float(mesh["size"]), n=n)
        else:
            domain = DomainDescriptor(mesh["kind"], float(mesh["size"]))
    placeholder = lam if lam is not None else 1.0
    errors += spec_violations(n, prob["p"], prob["q"], prob["beta"], placeholder, prob["delta"], prob["r"], domain)
    try:
        schedule = RegularizationSchedule.geometric(run["eps_start"], run["eps_stop"], run["eps_factor"])
    except (ValueError, ZeroDivisionError) as exc:
        errors.append(f"regularization schedule: {exc}")
        schedule = None
    if errors:
        raise ConfigError(errors)
    spec = ProblemSpec(n=n, p=float(prob["p"]), q=float(prob["q"]), beta=float(prob["beta"]),
                       lam=float(placeholder), delta=float(prob["delta"]), r=float(prob["r"]), domain=domain)
    params = {k: v for k, v in run.items() if k not in ("command", "seed", "output_dir")}
    return ExperimentConfig(spec=spec, lambda_factor=factor, mesh_kind=mesh["kind"],
                            resolution=int(mesh["resolution"]), command=run["command"], seed=int(run["seed"]),
                            output_dir=run["output_dir"], schedule=schedule, params=params)
