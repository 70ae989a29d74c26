"""Both Nehari minimizers on refining radial meshes: energies, J'', separation and runtime.

    python scripts/multiplicity_mesh_study.py [--factor 0.3] [--csv out/multiplicity.csv]
"""

import argparse
import time
from pathlib import Path

import numpy as np

from singular_pq import DomainDescriptor, ProblemSpec, build_space
from singular_pq.estimates import estimate_S
from singular_pq.fibering import lambda_star
from singular_pq.reporting import write_csv
from singular_pq.solvers import minimize_nehari, solve_singular


def study(factor: float, resolutions) -> list:
    spec = ProblemSpec()
    lam_star = lambda_star(spec, estimate_S(spec), spec.domain.measure())
    spec = spec.with_lambda(factor * lam_star)
    rows = []
    for res in resolutions:
        V = build_space(DomainDescriptor.ball(1.0, 3), res)
        t0 = time.perf_counter()
        sing = solve_singular(spec, V)
        plus = minimize_nehari(spec, V, "plus", u_singular=sing.field)
        minus = minimize_nehari(spec, V, "minus", u_singular=sing.field)
        secs = time.perf_counter() - t0
        rows.append((res, plus.energy, plus.nehari_second, minus.energy, minus.nehari_second,
                     float(np.max(np.abs(plus.field - minus.field))), plus.residual_norm, minus.residual_norm, secs))
    return rows


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--factor", type=float, default=0.3, help="lambda as a multiple of lambda*")
    ap.add_argument("--resolutions", type=int, nargs="+", default=[128, 256, 512, 1024, 2048])
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()
    header = ["nodes", "I_plus", "J2_plus", "I_minus", "J2_minus", "max_diff", "res_plus", "res_minus", "seconds"]
    rows = study(args.factor, args.resolutions)
    print(" ".join(f"{h:>11s}" for h in header))
    for r in rows:
        print(f"{r[0]:11d} " + " ".join(f"{v:11.4g}" for v in r[1:]))
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        write_csv(args.csv, header, rows)
