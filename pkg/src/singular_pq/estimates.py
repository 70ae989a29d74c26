"""Bubbles, the Sobolev constant, level-set decay and energy-gap diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .discretization import DiscreteSpace, interpolate, sphere_area
from .problem import ProblemSpec, energy

GAUSS_POINTS = 8
# eps = 2^-k, k = 6..13. For l above n(p-1)/(n-1) the gradient integral
# carries a relative tail correction ~ (eps/mu)^((n-1)l/(p-1) - n) that decays
# slowly (power 0.2 for n=3, p=2, l=1.6), so the family must reach well below
# mu before the fitted slopes settle.
DEFAULT_BUBBLE_EPS = tuple(2.0**-k for k in range(6, 14))


class QuadratureError(RuntimeError):
    """Scaling fit is dominated by quadrature error."""


@dataclass(frozen=True)
class BubbleSpec:
    eps: float
    mu: float = 0.25
    C_n: float = 1.0

    def __post_init__(self):
        if not (self.eps > 0 and self.mu > 0):
            raise ValueError("bubble needs eps > 0 and mu > 0")

    @property
    def cutoff_inner(self) -> float:
        return self.mu

    @property
    def cutoff_outer(self) -> float:
        return 2.0 * self.mu


def cutoff(r, mu):
    """C^1 plateau function: 1 on [0, mu], 0 beyond 2 mu, cubic smoothstep between."""
    s = np.clip((np.asarray(r, dtype=float) - mu) / mu, 0.0, 1.0)
    return 1.0 - s * s * (3.0 - 2.0 * s)


def cutoff_derivative(r, mu):
    s = np.clip((np.asarray(r, dtype=float) - mu) / mu, 0.0, 1.0)
    return -6.0 * s * (1.0 - s) / mu


def talenti(r, eps, spec: ProblemSpec, C_n=1.0):
    """Radial profile U_eps(r)."""
    n, p = spec.n, spec.p
    pp = p / (p - 1)
    r = np.asarray(r, dtype=float)
    return C_n * eps ** ((n - p) / (p * (p - 1))) / (eps**pp + r**pp) ** ((n - p) / p)


def talenti_derivative(r, eps, spec: ProblemSpec, C_n=1.0):
    n, p = spec.n, spec.p
    pp = p / (p - 1)
    r = np.asarray(r, dtype=float)
    k = (n - p) / p
    return (-C_n * eps ** ((n - p) / (p * (p - 1))) * k * pp * r ** (pp - 1)
            * (eps**pp + r**pp) ** (-k - 1))


def bubble_radial(r, bspec: BubbleSpec, spec: ProblemSpec):
    return cutoff(r, bspec.mu) * talenti(r, bspec.eps, spec, bspec.C_n)


def bubble_radial_derivative(r, bspec: BubbleSpec, spec: ProblemSpec):
    return (cutoff_derivative(r, bspec.mu) * talenti(r, bspec.eps, spec, bspec.C_n)
            + cutoff(r, bspec.mu) * talenti_derivative(r, bspec.eps, spec, bspec.C_n))


def bubble_eval(bspec: BubbleSpec, spec: ProblemSpec, x) -> float | np.ndarray:
    """u_eps = zeta * U_eps at a point (or array of points, last axis = coordinates)."""
    x = np.asarray(x, dtype=float)
    r = np.abs(x) if x.ndim == 0 else np.sqrt((x**2).sum(axis=-1))
    out = bubble_radial(r, bspec, spec)
    return float(out) if np.ndim(out) == 0 else out


def bubble_field(space: DiscreteSpace, bspec: BubbleSpec, spec: ProblemSpec) -> np.ndarray:
    if space.kind != "radial-ball":
        raise ValueError("bubbles are placed on the radial ball")
    if bspec.cutoff_outer > space.domain.size:
        raise ValueError("cutoff ball B_{2 mu} must lie inside the domain")
    return interpolate(space, lambda r: bubble_radial(r, bspec, spec))


# --- radial quadrature on mesh panels ----------------------------------------

def _panel_rule(breaks: np.ndarray):
    x, w = np.polynomial.legendre.leggauss(GAUSS_POINTS)
    a, b = breaks[:-1, None], breaks[1:, None]
    pts = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    wts = 0.5 * (b - a) * w[None, :]
    return pts.ravel(), wts.ravel()


def _panels(space_r: np.ndarray, lo: float, hi: float) -> np.ndarray:
    inner = space_r[(space_r > lo) & (space_r < hi)]
    return np.concatenate([[lo], inner, [hi]])


def radial_integral(f, breaks: np.ndarray, n: int) -> float:
    """int f(|x|) dx over the shell spanned by ``breaks`` (Gauss-Legendre per panel)."""
    pts, wts = _panel_rule(breaks)
    return float(sphere_area(n) * np.sum(wts * f(pts) * pts ** (n - 1)))


def _tail_integral(f, a: float, n: int) -> float:
    val, _ = integrate.quad(lambda r: f(r) * r ** (n - 1), a, np.inf, epsabs=0.0, epsrel=1e-13, limit=400)
    return sphere_area(n) * val


def gradient_branch_exponent(spec: ProblemSpec, l: float) -> float:
    """Predicted decay exponent of int |grad u_eps|^l in eps."""
    n, p = spec.n, spec.p
    kink = n * (p - 1) / (n - 1)
    if math.isclose(l, kink, rel_tol=1e-12):
        raise ValueError(f"no exponent prediction at the boundary case l = n(p-1)/(n-1) = {kink}")
    if 1 <= l < kink:
        return (n - p) / (p * (p - 1)) * l
    if kink < l < p:
        return n - n / p * l
    raise ValueError(f"l = {l} outside [1, p)")


def _bubble_quantities(r_nodes, bspec, spec, rho, l_values):
    n, p = spec.n, spec.p
    ps = spec.p_star
    mu = bspec.mu
    eps, Cn = bspec.eps, bspec.C_n
    inner = _panels(r_nodes, 0.0, mu)
    shell = _panels(r_nodes, mu, 2 * mu)
    both = np.concatenate([inner, shell[1:]])

    def du(r):
        return np.abs(bubble_radial_derivative(r, bspec, spec))

    def dU(r):
        return np.abs(talenti_derivative(r, eps, spec, Cn))

    out = {}
    out["grad_p_deviation"] = abs(
        radial_integral(lambda r: du(r) ** p, shell, n) - _tail_integral(lambda r: dU(r) ** p, mu, n)
    )
    out["pstar_deviation"] = (
        radial_integral(lambda r: (1 - cutoff(r, mu) ** ps) * talenti(r, eps, spec, Cn) ** ps, shell, n)
        + _tail_integral(lambda r: talenti(r, eps, spec, Cn) ** ps, 2 * mu, n)
    )
    out["rho_integral"] = radial_integral(lambda r: bubble_radial(r, bspec, spec) ** rho, both, n)
    for l in l_values:
        out[f"grad_l_{l:g}"] = radial_integral(lambda r: du(r) ** l, both, n)
    return out


def bubble_norm_asymptotics(eps_values, spec: ProblemSpec, space: DiscreteSpace, mu: float = 0.25,
                            rho: float = 1.2, l_values=(1.2, 1.6), C_n: float = 1.0,
                            drop_largest: int = 2, rel_tol: float = 0.15, check_refinement: bool = True):
    """Fit log-log decay slopes of the bubble norms against their predicted exponents."""
    if space.kind != "radial-ball":
        raise ValueError("bubble asymptotics need the radial ball")
    if 2 * mu > space.domain.size:
        raise ValueError("cutoff ball must lie inside the domain")
    n, p = spec.n, spec.p
    if not p - 1 < rho < n * (p - 1) / (n - p):
        raise ValueError("rho must lie in (p-1, n(p-1)/(n-p))")
    eps_values = np.sort(np.asarray(eps_values, dtype=float))[::-1]
    predicted = {
        "grad_p_deviation": (n - p) / (p - 1),
        "pstar_deviation": n / (p - 1),
        "rho_integral": rho * (n - p) / (p * (p - 1)),
    }
    for l in l_values:
        predicted[f"grad_l_{l:g}"] = gradient_branch_exponent(spec, l)

    r_nodes = space.node_coords[:, 0]

    def table(nodes):
        rows = [_bubble_quantities(nodes, BubbleSpec(e, mu, C_n), spec, rho, l_values) for e in eps_values]
        return {k: np.array([row[k] for row in rows]) for k in predicted}

    values = table(r_nodes)
    fit_eps = eps_values[drop_largest:]

    def slopes(vals):
        return {k: float(np.polyfit(np.log(fit_eps), np.log(v[drop_largest:]), 1)[0]) for k, v in vals.items()}

    fitted = slopes(values)
    if check_refinement:
        coarse = slopes(table(r_nodes[::2]))
        for k in fitted:
            if abs(coarse[k] - fitted[k]) > 0.01 * abs(predicted[k]):
                raise QuadratureError(f"slope of {k} unstable under refinement: {coarse[k]} vs {fitted[k]}")
    report = {}
    for k in predicted:
        err = abs(fitted[k] - predicted[k]) / abs(predicted[k])
        report[k] = {
            "fitted": fitted[k],
            "predicted": predicted[k],
            "rel_error": err,
            "pass": bool(err < rel_tol),
            "eps": eps_values.tolist(),
            "values": values[k].tolist(),
        }
    return report


# --- Sobolev constant ----------------------------------------------------------

def sobolev_quotient_radial(spec: ProblemSpec, R: float, eps: float = 1.0) -> float:
    """Quotient of the W_0 function (U_eps - U_eps(R))_+ on the ball of radius R."""
    n, p, ps = spec.n, spec.p, spec.p_star
    UR = float(talenti(R, eps, spec))
    kw = dict(epsabs=0.0, epsrel=1e-12, limit=500)
    breaks = [b for b in (eps, 10 * eps, 100 * eps) if b < R]
    num = den = 0.0
    for a, b in zip([0.0] + breaks, breaks + [R]):
        num += integrate.quad(lambda r: abs(talenti_derivative(r, eps, spec)) ** p * r ** (n - 1), a, b, **kw)[0]
        den += integrate.quad(lambda r: (talenti(r, eps, spec) - UR) ** ps * r ** (n - 1), a, b, **kw)[0]
    w = sphere_area(n)
    return w * num / (w * den) ** (p / ps)


def sobolev_quotient_whole_space(spec: ProblemSpec, eps: float = 1.0) -> float:
    """Quotient of U_eps itself on all of R^n (no truncation)."""
    n, p, ps = spec.n, spec.p, spec.p_star
    kw = dict(epsabs=0.0, epsrel=1e-12, limit=500)
    num = den = 0.0
    for a, b in ((0.0, eps), (eps, 100 * eps), (100 * eps, np.inf)):
        num += integrate.quad(lambda r: abs(talenti_derivative(r, eps, spec)) ** p * r ** (n - 1), a, b, **kw)[0]
        den += integrate.quad(lambda r: talenti(r, eps, spec) ** ps * r ** (n - 1), a, b, **kw)[0]
    w = sphere_area(n)
    return w * num / (w * den) ** (p / ps)


def estimate_S(spec: ProblemSpec, space: DiscreteSpace | None = None, R0: float = 4.0, rtol: float = 1e-4,
               max_doublings: int = 40, return_trace: bool = False):
    """Sobolev constant from the bubble quotient on growing balls."""
    if not spec.n > spec.p:
        raise ValueError("Sobolev constant requires n > p")
    R = R0
    trace = [(R, sobolev_quotient_radial(spec, R))]
    for _ in range(max_doublings):
        R *= 2
        trace.append((R, sobolev_quotient_radial(spec, R)))
        if abs(trace[-1][1] - trace[-2][1]) <= rtol * trace[-1][1]:
            S = trace[-1][1]
            return (S, trace) if return_trace else S
    raise RuntimeError("radius refinement of the Sobolev quotient did not converge")


def sobolev_quotient(spec: ProblemSpec, space: DiscreteSpace, u: np.ndarray) -> float:
    """Discrete quotient ||grad u||_p^p / ||u||_{p*}^p of a mesh field."""
    g = space.gradients(u)
    A = float(space.elem_weight @ np.sqrt((g**2).sum(axis=1)) ** spec.p)
    Dps = float(space.node_weight @ np.abs(u) ** spec.p_star)
    return A / Dps ** (spec.p / spec.p_star)


# --- level-set decay -------------------------------------------------------------

def stampacchia_verify(spec: ProblemSpec, space: DiscreteSpace, u: np.ndarray, k_grid=None,
                       shift: float = 1.0, alpha: float | None = None) -> dict:
    """Fit the level-set recursion psi(h) <= C psi(k)^gamma / (h-k)^p* and check the extinction level."""
    ps, p = spec.p_star, spec.p
    if alpha is None:
        alpha = 2.0 * ps**2 / (ps - p)
    gamma = (1.0 - ps / alpha) * (ps / p)
    if not gamma > 1:
        raise ValueError("alpha must make gamma = (1 - p*/alpha) p*/p exceed 1")
    ubar = np.maximum(u - shift, 0.0)
    w = space.node_weight
    total = float(w.sum())
    top = float(ubar.max(initial=0.0))

    def psi(k):
        return float(w[ubar >= k].sum())

    if k_grid is None:
        k_grid = np.linspace(0.0, top, 64) if top > 0 else np.zeros(1)
    k_grid = np.asarray(k_grid, dtype=float)
    if np.any(np.diff(k_grid) <= 0):
        raise ValueError("k_grid must be increasing")
    psi_grid = np.array([psi(k) for k in k_grid])
    psi_top = psi(np.nextafter(top, np.inf)) if top > 0 else psi(np.nextafter(0.0, 1.0))

    # exact supremum of the recursion constant over all level pairs (psi is a step function)
    levels = np.unique(np.concatenate([[0.0], ubar[ubar > 0]]))
    if len(levels) > 1:
        order = np.argsort(ubar)
        sorted_w = w[order]
        sorted_u = ubar[order]
        tail = np.cumsum(sorted_w[::-1])[::-1]  # mass of nodes with value >= sorted_u[i]
        first = np.searchsorted(sorted_u, levels, side="left")
        psi_levels = np.where(first < len(tail), tail[np.minimum(first, len(tail) - 1)], 0.0)
        psi_levels[0] = total
        hi = levels[1:][:, None]
        lo = levels[:-1][None, :]
        num = psi_levels[1:][:, None] * np.clip(hi - lo, 0.0, None) ** ps
        den = psi_levels[1:][None, :] ** gamma
        mask = np.arange(1, len(levels))[:, None] > np.arange(len(levels) - 1)[None, :]
        C = float(np.max(np.where(mask, num / den, 0.0)))
    else:
        C = 0.0
    d = (C * 2 ** (ps * gamma / (gamma - 1)) * total ** (gamma - 1)) ** (1.0 / ps)
    nonincreasing = bool(np.all(np.diff(psi_grid) <= 0))
    if not nonincreasing:
        raise ValueError("psi is not monotone; the input field is broken")
    umax = float(u.max())
    return {
        "gamma": gamma,
        "alpha": alpha,
        "C": C,
        "d": d,
        "max_u": umax,
        "bound": shift + d,
        "extinction_ok": bool(umax <= shift + d),
        "psi_nonincreasing": nonincreasing,
        "psi_top": psi_top,
        "k_grid": k_grid.tolist(),
        "psi": psi_grid.tolist(),
    }


# --- singular-term inequality ------------------------------------------------------

def _concavity_gap(a, b, delta):
    """(a+b)^(1-d)/(1-d) - a^(1-d)/(1-d) - b a^(-d), computed without cancellation."""
    s = 1.0 - delta
    c = b / a
    small = c < 1e-3
    with np.errstate(invalid="ignore", over="ignore"):
        big = (np.expm1(s * np.log1p(c)) - s * c) / s
    # series of ((1+c)^s - 1 - s c)/s for small c
    ser = c * c * (s - 1) / 2 * (1 + c * (s - 2) / 3 * (1 + c * (s - 3) / 4 * (1 + c * (s - 4) / 5)))
    return a**s * np.where(small, ser, big)


def singular_inequality_check(delta: float, lam: float, m: float, rho: float, spec: ProblemSpec | None = None,
                              n_a: int = 200, n_b: int = 400, b_min: float = 1e-8, b_max: float = 1e3,
                              rtol: float = 0.01) -> dict:
    """Smallest L with lambda*gap(a, b) >= -L b^rho on a grid a in [m, 1e3 m], b in (0, b_max]."""
    if not m > 0:
        raise ValueError("m must be positive")
    if spec is not None and not (spec.p - 1 < rho < spec.n * (spec.p - 1) / (spec.n - spec.p)):
        raise ValueError("rho must lie in (p-1, n(p-1)/(n-p))")

    def scan(na, nb):
        a = np.geomspace(m, 1e3 * m, na)[:, None]
        b = np.geomspace(b_min, b_max, nb)[None, :]
        ratio = -lam * _concavity_gap(a, b, delta) / b**rho
        i = np.unravel_index(np.argmax(ratio), ratio.shape)
        return max(float(ratio[i]), 0.0), float(a[i[0], 0]), float(b[0, i[1]])

    L, a_at, b_at = scan(n_a, n_b)
    for _ in range(6):
        n_a, n_b = 2 * n_a, 2 * n_b
        L2, a_at, b_at = scan(n_a, n_b)
        done = abs(L2 - L) <= rtol * max(L2, 1e-300)
        L = L2
        if done:
            break
    # the gap is quadratic in b near 0: the ratio stays bounded only for rho <= 2
    finite = bool(rho <= 2.0 or L == 0.0)
    return {"L": L, "a_argmax": a_at, "b_argmax": b_at, "finite": finite}


# --- critical energy gap ---------------------------------------------------------------

def energy_gap_scan(spec: ProblemSpec, space: DiscreteSpace, u_lambda: np.ndarray, bspec: BubbleSpec,
                    t_grid=None, S: float | None = None, n_t: int = 400, max_doublings: int = 40) -> dict:
    """sup_t I(u + t u_eps) - I(u) against the compactness threshold S^(n/p)/n."""
    if not spec.critical:
        raise ValueError("energy gap scan requires the critical exponent r = p*")
    ub = bubble_field(space, bspec, spec)
    base = energy(spec, space, u_lambda)

    def diff(t):
        return energy(spec, space, u_lambda + t * ub) - base

    R0 = 1.0
    for _ in range(max_doublings):
        if diff(R0) < 0:
            break
        R0 *= 2
    else:
        raise RuntimeError("R0 not found: the energy along u + t u_eps never dropped below I(u)")
    if t_grid is None:
        t_grid = np.linspace(0.0, R0, n_t)
    t_grid = np.asarray(t_grid, dtype=float)
    diffs = np.array([diff(t) for t in t_grid])
    if S is None:
        S = estimate_S(spec)
    threshold = S ** (spec.n / spec.p) / spec.n
    i = int(np.argmax(diffs))
    return {
        "R0": R0,
        "max_gap": float(diffs[i]),
        "t_at_max": float(t_grid[i]),
        "threshold": threshold,
        "pass": bool(diffs[i] < threshold),
        "eps": bspec.eps,
        "t": t_grid.tolist(),
        "gap": diffs.tolist(),
    }
