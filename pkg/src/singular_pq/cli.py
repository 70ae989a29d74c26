"""Command-line front end.

    python -m singular_pq {solve|fibering|sweep|verify|bubble} --config cfg.toml [--threads N] [--out DIR]

Exit status: 0 all assertions passed, 1 an assertion failed, 2 configuration
error, 3 a solver did not converge (the report is still written).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import estimates, fibering
from .config import COMMANDS, ConfigError, ExperimentConfig, load_config
from .discretization import DiscreteSpace, build_space, norms_profile, read_field_csv
from .problem import ProblemSpec, energy, gradient_weak
from .reporting import Assertions, write_csv, write_json
from .solvers import (
    barrier_phi_hat,
    compare_fields,
    eigen_q,
    lower_barrier_constant,
    minimize_nehari,
    solve_singular,
    sweep_lambda,
)
from .solvers.common import bump, random_positive

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2, 3


class Context:
    """Resolved configuration: spec with the final lambda, mesh and the constants S, |Omega|, lambda*."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        spec = cfg.spec
        self.S = estimates.estimate_S(spec)
        self.omega = spec.domain.measure()
        self.lambda_star = fibering.lambda_star(spec, self.S, self.omega)
        if cfg.lambda_factor is not None:
            spec = spec.with_lambda(cfg.lambda_factor * self.lambda_star)
        self.spec: ProblemSpec = spec
        self.space: DiscreteSpace = build_space(spec.domain, cfg.resolution)
        self.p = cfg.params

    def constants(self) -> dict:
        return {"S": self.S, "omega_measure": self.omega, "lambda_star": self.lambda_star, "lambda": self.spec.lam}


def _trace_rows(report):
    return [(i, e, r, ph, st) for i, (e, r, ph, st) in enumerate(report.trace)]


def _field_header(space):
    return ["r"] if space.kind == "radial-ball" else (["x"] if space.dim == 1 else ["x", "y"])


def stampacchia_checks(ctx, checks: Assertions, name: str, u):
    rep = estimates.stampacchia_verify(ctx.spec, ctx.space, u)
    checks.check(f"{name}: psi nonincreasing", rep["psi_nonincreasing"])
    checks.check(f"{name}: psi vanishes above the top level", rep["psi_top"] == 0.0, psi_top=rep["psi_top"])
    checks.check(f"{name}: max u <= 1 + d", rep["extinction_ok"], max_u=rep["max_u"], bound=rep["bound"])
    return {k: rep[k] for k in ("gamma", "C", "d", "max_u", "bound", "extinction_ok")}


def cmd_solve(ctx: Context, out: Path, threads: int):
    spec, space, prm = ctx.spec, ctx.space, ctx.p
    checks = Assertions()
    kw = dict(rtol=prm["rtol"], atol=prm["atol"])
    sing = solve_singular(spec, space, ctx.cfg.schedule, **kw)
    eig = eigen_q(spec, space)
    phi = barrier_phi_hat(spec, space, eig=eig)
    checks.check("singular solve converged", sing.converged, residual=sing.residual_norm)
    checks.check("singular energy negative", sing.extras["exact_energy"] < 0, energy=sing.extras["exact_energy"])
    checks.check("barrier positive at interior nodes", phi.positive)
    eps_l = lower_barrier_constant(sing.field, phi.field, space)
    checks.check("barrier constant positive", eps_l > 0, eps_lambda=eps_l)
    reports = {"singular": sing.as_dict()}
    fields = {"u_singular": sing.field, "phi_hat": phi.field}
    converged = sing.converged
    branches = ["plus", "minus"] if prm["branch"] == "both" else [prm["branch"]]
    solved = {}
    for br in branches:
        try:
            rep = minimize_nehari(spec, space, br, schedule=ctx.cfg.schedule, u_singular=sing.field,
                                  max_iter=prm["max_iter"], **kw)
        except fibering.RootAbsentError as exc:
            checks.check(f"{br}: Nehari point on the initial ray", False, error=str(exc))
            reports[br] = {"converged": False, "message": str(exc)}
            converged = False
            continue
        converged &= rep.converged
        u = rep.field
        solved[br] = rep
        fields[f"u_{br}"] = u
        want = (rep.nehari_second > 0) if br == "plus" else (rep.nehari_second < 0)
        checks.check(f"{br}: converged", rep.converged, residual=rep.residual_norm, tolerance=rep.tolerance)
        checks.check(f"{br}: weak residual < 1e-6", rep.residual_norm < 1e-6, residual=rep.residual_norm)
        checks.check(f"{br}: sign of J''(1)", want, j2=rep.nehari_second)
        if br == "plus":
            checks.check("plus: energy negative", rep.energy < 0, energy=rep.energy)
        cmp = compare_fields(sing.field, u, 1e-6)
        checks.check(f"{br}: singular solution below", cmp.ok, worst_node=cmp.worst_node, excess=cmp.worst_violation)
        cmp = compare_fields(eps_l * phi.field, u, 1e-6)
        checks.check(f"{br}: above eps_lambda*phi_hat", cmp.ok, worst_node=cmp.worst_node, excess=cmp.worst_violation)
        reports[br] = {**rep.as_dict(), "stampacchia": stampacchia_checks(ctx, checks, br, u)}
        write_csv(out / f"trace_{br}.csv", ["iteration", "energy", "residual", "phase", "stage"], _trace_rows(rep))
    if len(solved) == 2:
        gap = float(np.max(np.abs(solved["plus"].field - solved["minus"].field)))
        checks.check("branches distinct", gap > 1e-2, max_difference=gap)
    write_csv(out / "trace_singular.csv", ["iteration", "energy", "residual", "phase", "stage"], _trace_rows(sing))
    names = list(fields)
    rows = [(i, *space.node_coords[i], *(fields[k][i] for k in names)) for i in range(space.n_nodes)]
    write_csv(out / "fields.csv", ["node", *_field_header(space), *names], rows)
    body = {"eigen": eig.as_dict(), "barrier": {**phi.as_dict(), "eps_lambda": eps_l}, "solves": reports}
    return body, checks, converged


def cmd_fibering(ctx: Context, out: Path, threads: int):
    spec, space = ctx.spec, ctx.space
    checks = Assertions()
    path = ctx.p["field"]
    u = read_field_csv(path, space) if path else bump(space)
    prof = norms_profile(spec, space, u)
    cls = fibering.classify(prof, spec)
    T0 = fibering.t0_lower_bound(prof, spec, ctx.S, ctx.omega)
    checks.check("t_max >= T0", cls.t_max >= T0 * (1 - 1e-12), t_max=cls.t_max, T0=T0)
    if cls.t_lower is not None and cls.t_upper is not None and cls.t_lower > 0:
        checks.check("roots interlace", 0 < cls.t_lower < cls.t_max < cls.t_upper)
        for name, t in (("t_lower", cls.t_lower), ("t_upper", cls.t_upper)):
            lvl = spec.lam * prof.C
            err = abs(fibering.m_value(prof, spec, t) - lvl)
            checks.check(f"{name} solves M(t) = lambda C", err <= 1e-10 * max(lvl, 1e-300), error=err)
        want = {"t_lower": fibering.N_PLUS, "t_upper": fibering.N_MINUS}
        for name, t in (("t_lower", cls.t_lower), ("t_upper", cls.t_upper)):
            v = fibering.classify(prof.scaled(t, spec), spec).verdict
            checks.check(f"{name} scaling classified {want[name]}", v == want[name], verdict=v)
    body = {
        "profile": dict(zip("ABCD", prof.as_tuple())),
        "classification": cls.as_dict(),
        "T0": T0,
        "E_lambda": fibering.e_lambda(prof, spec),
        "E_lambda_at_t_max": fibering.e_lambda(prof.scaled(cls.t_max, spec), spec),
    }
    return body, checks, True


def lambda_grid(ctx: Context) -> np.ndarray:
    prm = ctx.p
    if prm["lambda_grid"]:
        return np.asarray(prm["lambda_grid"], float)
    return ctx.lambda_star * np.geomspace(prm["lambda_min_factor"], prm["lambda_max_factor"], int(prm["n_lambda"]))


def cmd_sweep(ctx: Context, out: Path, threads: int):
    checks = Assertions()
    grid = lambda_grid(ctx)
    res = sweep_lambda(ctx.spec, ctx.space, grid, ctx.cfg.schedule, threads=threads,
                       rtol=ctx.p["rtol"], atol=ctx.p["atol"], max_iter=ctx.p["max_iter"])
    checks.check("success set nonempty", res.nonempty)
    checks.check("success set downward closed", res.downward_closed)
    write_csv(out / "sweep.csv", ["lambda", "converged", "energy", "barrier_eps"],
              [(r["lambda"], r["converged"], r["energy"], r["barrier_eps"]) for r in res.rows])
    return res.as_dict(), checks, True


def cmd_verify(ctx: Context, out: Path, threads: int):
    spec, space, prm = ctx.spec, ctx.space, ctx.p
    checks = Assertions()
    rng = np.random.default_rng(ctx.cfg.seed)
    # gradient against central differences
    u = random_positive(space, rng, 0.5) + 0.05 * bump(space)
    eps, h = 1e-3, 1e-6
    g = gradient_weak(spec, space, u, eps)
    worst = 0.0
    for _ in range(int(prm["n_directions"])):
        v = rng.standard_normal(space.n_nodes)
        v[space.boundary_mask] = 0.0
        fd = (energy(spec, space, u + h * v, eps) - energy(spec, space, u - h * v, eps)) / (2 * h)
        worst = max(worst, abs(fd - g @ v) / max(abs(fd), 1e-300))
    checks.check("gradient vs central differences", worst < 1e-5, max_rel_error=worst)
    # threshold lambda* via two code paths
    a = fibering.lambda_star(spec, ctx.S, ctx.omega)
    b = fibering.lambda_star_via_norm_bound(spec, ctx.S, ctx.omega)
    checks.check("lambda* two-path agreement", abs(a - b) <= 1e-12 * a, path_a=a, path_b=b)
    # Sobolev constant as an infimum
    qmin = min(estimates.sobolev_quotient(spec, space, random_positive(space, rng)) for _ in range(20))
    checks.check("mesh quotients above S", qmin >= ctx.S - 1e-4, min_quotient=qmin, S=ctx.S)
    # embedding inequality for the singular term
    embed = ctx.S ** (-(1 - spec.delta) / spec.p) * ctx.omega ** (1 - (1 - spec.delta) / spec.p_star)
    worst_ratio = 0.0
    for _ in range(20):
        pr = norms_profile(spec, space, random_positive(space, rng))
        worst_ratio = max(worst_ratio, pr.C / (embed * pr.A ** ((1 - spec.delta) / spec.p)))
    checks.check("singular-term embedding inequality", worst_ratio <= 1.0, max_ratio=worst_ratio)
    # eigenvalue scaling in beta
    vals = {b_: eigen_q(spec.with_(beta=b_), space).value / b_ for b_ in (0.1, 1.0, 10.0)}
    spread = (max(vals.values()) - min(vals.values())) / min(vals.values())
    checks.check("lambda_1(q, beta)/beta constant", spread < 1e-8, ratios=list(vals.values()))
    # singular-term inequality constant
    rho = float(prm["rho"])
    ineq = estimates.singular_inequality_check(spec.delta, 1.0, 1.0, min(rho, 2.0))
    checks.check("singular inequality constant finite", ineq["finite"] and np.isfinite(ineq["L"]), L=ineq["L"])
    body = {"constants": ctx.constants(), "singular_inequality": ineq}
    converged = True
    if spec.critical:
        A, D0 = fibering.lower_bound_constants(spec, ctx.S, ctx.omega)
        ratio_ok = abs(D0 - (1 / (1 - spec.delta) - 1 / spec.p_star) * A) <= 1e-14 * D0
        checks.check("D0/A identity", ratio_ok, A=A, D0=D0)
        body["lower_bound_constants"] = {"A": A, "D0": D0}
    # a solution for the level-set check
    sing = solve_singular(spec, space, ctx.cfg.schedule)
    rep = minimize_nehari(spec, space, "plus", schedule=ctx.cfg.schedule, u_singular=sing.field)
    converged = sing.converged and rep.converged
    body["stampacchia_plus"] = stampacchia_checks(ctx, checks, "plus", rep.field)
    return body, checks, converged


def cmd_bubble(ctx: Context, out: Path, threads: int):
    spec, space, prm = ctx.spec, ctx.space, ctx.p
    if space.kind != "radial-ball":
        raise ConfigError(["bubble command needs mesh kind radial-ball"])
    checks = Assertions()
    rep = estimates.bubble_norm_asymptotics(prm["bubble_eps"], spec, space, mu=prm["mu"], rho=prm["rho"],
                                            l_values=tuple(prm["l_values"]))
    rows = []
    for k, v in rep.items():
        checks.check(f"slope {k}", v["pass"], fitted=v["fitted"], predicted=v["predicted"], rel_error=v["rel_error"])
        rows += [(k, e, val) for e, val in zip(v["eps"], v["values"])]
    write_csv(out / "bubble.csv", ["quantity", "eps", "value"], rows)
    quot = [estimates.sobolev_quotient_whole_space(spec, e) for e in (0.5, 1.0, 2.0)]
    spread = (max(quot) - min(quot)) / min(quot)
    checks.check("Sobolev quotient scale invariant", spread < 1e-6, quotients=quot)
    body = {"constants": ctx.constants(), "asymptotics": rep}
    converged = True
    if spec.critical:
        from .estimates import BubbleSpec
        sing = solve_singular(spec, space, ctx.cfg.schedule)
        plus = minimize_nehari(spec, space, "plus", schedule=ctx.cfg.schedule, u_singular=sing.field)
        converged = plus.converged
        gap = estimates.energy_gap_scan(spec, space, plus.field, BubbleSpec(prm["gap_eps"], prm["mu"]), S=ctx.S)
        checks.check("energy gap below S^(n/p)/n", gap["pass"], max_gap=gap["max_gap"], threshold=gap["threshold"])
        body["energy_gap"] = gap
    return body, checks, converged


HANDLERS = {"solve": cmd_solve, "fibering": cmd_fibering, "sweep": cmd_sweep, "verify": cmd_verify,
            "bubble": cmd_bubble}


def run(cfg: ExperimentConfig, command: str | None = None, out_dir: str | None = None, threads: int = 1) -> int:
    """Execute a configured experiment, write its artifacts and return the exit status."""
    command = command or cfg.command
    if command not in COMMANDS:
        raise ConfigError([f"unknown command {command!r}"])
    if cfg.command is not None and cfg.command != command:
        raise ConfigError([f"config is for command {cfg.command!r}, not {command!r}"])
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = Context(cfg)
    body, checks, converged = HANDLERS[command](ctx, out, threads)
    status = EXIT_NONCONVERGED if not converged else (EXIT_OK if checks.all_passed else EXIT_ASSERT)
    report = {
        "command": command,
        "config": cfg.header(),
        "constants": ctx.constants(),
        "status": status,
        "converged": bool(converged),
        "assertions": checks.as_list(),
        "result": body,
    }
    write_json(out / "report.json", report)
    failed = sum(not a["pass"] for a in checks.items)
    print(f"{command}: {len(checks.items) - failed}/{len(checks.items)} assertions passed, "
          f"converged={converged}, status={status}, report={out / 'report.json'}")
    return status


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="singular_pq", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="TOML file with [problem], [mesh], [run] sections")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for sweeps (default 1, deterministic)")
    ap.add_argument("--out", default=None, help="output directory (overrides [run] output_dir)")
    args = ap.parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(text)
        return run(cfg, args.command, args.out, args.threads)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
