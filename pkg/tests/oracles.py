"""Independent reference computations used by the tests.

Nothing here calls into the package's numerical routines: each oracle is a
separate, deliberately plain implementation of the quantity it checks.
"""

from __future__ import annotations

import math

import numpy as np


def talenti_S(n: int, p: float) -> float:
    """Closed-form best Sobolev constant in R^n (Aubin/Talenti)."""
    g = math.gamma
    inner = g(n / p) * g(1 + n - n / p) / (g(1 + n / 2) * g(n))
    return math.pi ** (p / 2) * n * ((n - p) / (p - 1)) ** (p - 1) * inner ** (p / n)


def m_plain(A, B, C, D, t, p, q, r, delta, beta):
    return t ** (p - 1 + delta) * A + beta * t ** (q - 1 + delta) * B - t ** (r - 1 + delta) * D


def dense_scan_roots(A, B, C, D, p, q, r, delta, beta, lam, n_grid=10_000):
    """Roots of M(t) = lam*C by a dense log-grid sign scan refined with plain bisection."""
    level = lam * C
    # coarse scan over a very wide range locates the window where M exceeds the level
    coarse = np.geomspace(1e-40, 1e40, 4001)
    with np.errstate(over="ignore", invalid="ignore"):
        above = np.flatnonzero(m_plain(A, B, C, D, coarse, p, q, r, delta, beta) - level > 0)
    if len(above) == 0:
        return []
    t_lo = coarse[max(above[0] - 1, 0)]
    t_hi = coarse[min(above[-1] + 1, len(coarse) - 1)]
    grid = np.geomspace(t_lo, t_hi, n_grid)
    vals = m_plain(A, B, C, D, grid, p, q, r, delta, beta) - level
    roots = []
    for i in np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:])):
        a, b = grid[i], grid[i + 1]
        fa = vals[i]
        for _ in range(200):
            mid = 0.5 * (a + b)
            fm = m_plain(A, B, C, D, mid, p, q, r, delta, beta) - level
            if (fm > 0) == (fa > 0):
                a, fa = mid, fm
            else:
                b = mid
            if b - a <= 1e-15 * b:
                break
        roots.append(0.5 * (a + b))
    return roots


def lambda_star_direct(n, p, r, delta, S, omega):
    """Threshold typed in directly from its closed form, in one expression."""
    ps = n * p / (n - p)
    return ((r - p) * S ** ((1 - delta) / p) / ((r - 1 + delta) * omega ** (1 - (1 - delta) / ps))) * (
        ((p - 1 + delta) * S ** (r / p)) / ((r - 1 + delta) * omega ** (1 - r / ps))
    ) ** ((p - 1 + delta) / (r - p))


def composite_simpson(f, a, b, m):
    """Composite Simpson rule with m (even) subintervals."""
    if m % 2:
        m += 1
    x = np.linspace(a, b, m + 1)
    w = np.ones(m + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return float((b - a) / (3 * m) * (w @ f(x)))


def radial_energy_oracle(r_nodes, u, n, p, q, beta, lam, delta, rr, refine=10):
    """Energy of a radial P1 field from scratch.

    Gradient terms: |u'|^s is constant on an element and is integrated against
    omega_n r^(n-1) with 10x-refined composite Simpson. Nodal terms use the
    lumped (trapezoid-type) rule: each nodal value is weighted by the integral
    of its hat function times omega_n r^(n-1), again by 10x Simpson.
    """
    omega = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    total_grad = 0.0
    hat_w = np.zeros(len(r_nodes))
    for e in range(len(r_nodes) - 1):
        a, b = r_nodes[e], r_nodes[e + 1]
        slope = (u[e + 1] - u[e]) / (b - a)
        wgt = omega * composite_simpson(lambda x: x ** (n - 1), a, b, 2 * refine)
        total_grad += wgt * (abs(slope) ** p / p + beta * abs(slope) ** q / q)
        hat_w[e] += omega * composite_simpson(lambda x: (b - x) / (b - a) * x ** (n - 1), a, b, 2 * refine)
        hat_w[e + 1] += omega * composite_simpson(lambda x: (x - a) / (b - a) * x ** (n - 1), a, b, 2 * refine)
    sing = lam / (1 - delta) * float(hat_w @ np.maximum(u, 0) ** (1 - delta))
    power = float(hat_w @ np.abs(u) ** rr) / rr
    return total_grad - sing - power


def central_difference(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)
