"""Fitted bubble decay slopes for several eps families.

The gradient branch above n(p-1)/(n-1) carries a correction that decays only
like (eps/mu)^((n-1)l/(p-1) - n), so large eps bias its slope; this script
shows the drift as the family moves towards small eps.

    python scripts/bubble_eps_family.py [--nodes 4096]
"""

import argparse

from singular_pq import DomainDescriptor, ProblemSpec, build_space
from singular_pq.estimates import bubble_norm_asymptotics


def table(nodes: int, starts):
    spec = ProblemSpec()
    V = build_space(DomainDescriptor.ball(1.0, 3), nodes)
    out = []
    for k0 in starts:
        eps = [2.0 ** -k for k in range(k0, k0 + 8)]
        rep = bubble_norm_asymptotics(eps, spec, V)
        out.append((k0, {k: (v["fitted"], v["predicted"], v["rel_error"]) for k, v in rep.items()}))
    return out


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=4096)
    ap.add_argument("--starts", type=int, nargs="+", default=[2, 4, 6])
    args = ap.parse_args()
    for k0, rows in table(args.nodes, args.starts):
        print(f"eps = 2^-{k0} .. 2^-{k0 + 7}")
        for name, (fit, pred, err) in rows.items():
            print(f"  {name:18s} fitted {fit:7.4f} predicted {pred:7.4f} rel err {err:6.3f}")
