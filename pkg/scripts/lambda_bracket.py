"""Coarse geometric sweep followed by bisection of the empirical existence bracket.

    python scripts/lambda_bracket.py [--nodes 256] [--bisections 8]
"""

import argparse
import math

import numpy as np

from singular_pq import DomainDescriptor, ProblemSpec, build_space
from singular_pq.estimates import estimate_S
from singular_pq.fibering import lambda_star
from singular_pq.solvers import barrier_phi_hat, solve_at_lambda, sweep_lambda


def bracket(nodes: int, n_grid: int, bisections: int):
    spec = ProblemSpec()
    lam_star = lambda_star(spec, estimate_S(spec), spec.domain.measure())
    V = build_space(DomainDescriptor.ball(1.0, 3), nodes)
    phi = barrier_phi_hat(spec, V).field
    res = sweep_lambda(spec, V, lam_star * np.geomspace(1e-3, 1e3, n_grid), phi_hat=phi)
    lo, hi = res.bracket
    for _ in range(bisections):
        mid = math.sqrt(lo * hi)
        row, _ = solve_at_lambda(spec.with_lambda(mid), V, phi_hat=phi)
        lo, hi = (mid, hi) if row["converged"] else (lo, mid)
        print(f"  lambda={mid:.6g} converged={row['converged']} ({row['message']})")
    return lam_star, res, (lo, hi)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=256)
    ap.add_argument("--grid", type=int, default=20)
    ap.add_argument("--bisections", type=int, default=8)
    args = ap.parse_args()
    lam_star, res, (lo, hi) = bracket(args.nodes, args.grid, args.bisections)
    print(f"lambda* = {lam_star:.6g}")
    print(f"coarse bracket  [{res.bracket[0]:.6g}, {res.bracket[1]:.6g}]")
    print(f"refined bracket [{lo:.6g}, {hi:.6g}] = [{lo / lam_star:.4g}, {hi / lam_star:.4g}] lambda*")
