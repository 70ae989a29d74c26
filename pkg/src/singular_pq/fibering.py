"""Fibering-map algebra on profile quadruples (A, B, C, D).

For a field u with profile (A, B, C, D) the fibering map is

    J(t) = t^p A/p + beta t^q B/q - lambda t^(1-delta) C/(1-delta) - t^r D/r,

and t*u lies on the Nehari set iff M(t) = lambda*C where

    M(t) = t^(p-1+delta) A + beta t^(q-1+delta) B - t^(r-1+delta) D.

M increases up to its unique critical point t_max and decreases after it, so
the two Nehari scalings t_lower < t_max < t_upper are bracketed safely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .discretization import FiberingProfile
from .problem import ProblemSpec

N_PLUS = "N_plus"
N_MINUS = "N_minus"
N_ZERO = "N_zero"
NOT_MEMBER = "not_member"

BISECT_RTOL = 1e-8
NEWTON_RTOL = 1e-12


def _lam(spec, lam):
    return spec.lam if lam is None else lam


def fibering_eval(profile: FiberingProfile, spec: ProblemSpec, t: float, lam: float | None = None):
    """(J(t), J'(t), J''(t))."""
    if not t > 0:
        raise ValueError("fibering map is evaluated at t > 0 only")
    lam = _lam(spec, lam)
    p, q, r, d, b = spec.p, spec.q, spec.r, spec.delta, spec.beta
    A, B, C, D = profile.as_tuple()
    a = 1.0 - d
    J = t**p * A / p + b * t**q * B / q - lam * t**a * C / a - t**r * D / r
    J1 = t ** (p - 1) * A + b * t ** (q - 1) * B - lam * t**-d * C - t ** (r - 1) * D
    J2 = ((p - 1) * t ** (p - 2) * A + b * (q - 1) * t ** (q - 2) * B
          + lam * d * t ** (-d - 1) * C - (r - 1) * t ** (r - 2) * D)
    return J, J1, J2


def _one_minus_ratio(t: float, log_tau: float, e: float) -> float:
    """1 - (t/tau)^e, accurate near t = tau (tau given by its logarithm)."""
    return -math.expm1(e * (math.log(t) - log_tau))


def _log_balance(profile: FiberingProfile, spec: ProblemSpec, ca: float, cd: float) -> float:
    """log of the t where ca t^p A = cd t^r D."""
    return (math.log(ca * profile.A) - math.log(cd * profile.D)) / (spec.r - spec.p)


def m_value(profile: FiberingProfile, spec: ProblemSpec, t: float) -> float:
    """M(t) = t^(p-1+delta) A + beta t^(q-1+delta) B - t^(r-1+delta) D.

    The A and D terms are combined as t^(p-1+delta) A (1 - (t/tau)^(r-p)),
    which stays accurate where they nearly cancel (r close to p).
    """
    d = spec.delta
    lead = t ** (spec.p - 1 + d) * profile.A * _one_minus_ratio(t, _log_balance(profile, spec, 1.0, 1.0),
                                                                 spec.r - spec.p)
    return lead + spec.beta * t ** (spec.q - 1 + d) * profile.B


def m_derivative(profile: FiberingProfile, spec: ProblemSpec, t: float) -> float:
    return t ** (spec.q + spec.delta - 2) * g_value(profile, spec, t)


def g_value(profile: FiberingProfile, spec: ProblemSpec, t: float) -> float:
    """M'(t) = t^(q+delta-2) G(t)."""
    d = spec.delta
    p, q, r = spec.p, spec.q, spec.r
    ca, cd = p - 1 + d, r - 1 + d
    lead = ca * t ** (p - q) * profile.A * _one_minus_ratio(t, _log_balance(profile, spec, ca, cd), r - p)
    return lead + spec.beta * (q - 1 + d) * profile.B


def _m_scale(profile, spec, t):
    d = spec.delta
    return (t ** (spec.p - 1 + d) * profile.A + spec.beta * t ** (spec.q - 1 + d) * profile.B
            + t ** (spec.r - 1 + d) * profile.D)


def _bisect_polish(f: Callable[[float], float], fprime: Callable[[float], float], lo: float, hi: float) -> float:
    """Root of f on [lo, hi] (sign change assumed); geometric bisection, then Newton."""
    flo = f(lo)
    for _ in range(400):
        if hi <= lo * (1 + BISECT_RTOL):
            break
        mid = math.sqrt(lo * hi) if lo > 0 else 0.5 * hi
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    for _ in range(30):
        fp = fprime(t)
        if fp == 0:
            break
        step = f(t) / fp
        t_new = t - step
        if not lo <= t_new <= hi:
            break
        t = t_new
        if abs(step) <= NEWTON_RTOL * t:
            break
    return t


def _check_profile(profile: FiberingProfile):
    if profile.A <= 0 or profile.D <= 0:
        raise ValueError("degenerate profile: A and D must be positive (nonzero field)")


def t_star(profile: FiberingProfile, spec: ProblemSpec) -> float:
    """Zero of H(t) = (r-1+delta) t^(r-q) D - (p-1+delta) t^(p-q) A; a lower bound for t_max."""
    _check_profile(profile)
    d = spec.delta
    return ((spec.p - 1 + d) * profile.A / ((spec.r - 1 + d) * profile.D)) ** (1.0 / (spec.r - spec.p))


def find_tmax(profile: FiberingProfile, spec: ProblemSpec) -> float:
    """Unique critical point of M (root of G)."""
    lo = t_star(profile, spec)
    if profile.B == 0 or spec.beta == 0 or g_value(profile, spec, lo) <= 0:
        # no sign change resolvable in floating point: the root coincides with t_star
        return lo
    hi = 2.0 * lo
    while g_value(profile, spec, hi) > 0:
        lo, hi = hi, 2.0 * hi
    d = spec.delta
    p, q, r = spec.p, spec.q, spec.r

    def gp(t):
        return ((p - 1 + d) * (p - q) * t ** (p - q - 1) * profile.A
                - (r - 1 + d) * (r - q) * t ** (r - q - 1) * profile.D)

    return _bisect_polish(lambda t: g_value(profile, spec, t), gp, lo, hi)


def t0_lower_bound(profile: FiberingProfile, spec: ProblemSpec, S: float, omega_measure: float) -> float:
    """Continuum lower bound T0 <= t_max built from the Sobolev constant S and |Omega|."""
    norm = profile.A ** (1.0 / spec.p)
    d = spec.delta
    base = ((spec.p - 1 + d) * S ** (spec.r / spec.p)
            / ((spec.r - 1 + d) * omega_measure ** (1 - spec.r / spec.p_star)))
    return base ** (1.0 / (spec.r - spec.p)) / norm


def find_roots(profile: FiberingProfile, spec: ProblemSpec, lam: float | None = None):
    """Solutions t_lower < t_max < t_upper of M(t) = lambda*C.

    Returns ``(None, None)`` when the level lambda*C lies above max M, the
    double root ``(t_max, t_max)`` at equality, and ``(0.0, t_upper)`` when
    lambda*C == 0.
    """
    lam = _lam(spec, lam)
    tm = find_tmax(profile, spec)
    level = lam * profile.C
    mmax = m_value(profile, spec, tm)
    tol = 1e-12 * _m_scale(profile, spec, tm)
    if abs(mmax - level) <= tol:
        return tm, tm
    if mmax < level:
        return None, None

    def f(t):
        return m_value(profile, spec, t) - level

    def fp(t):
        return m_derivative(profile, spec, t)

    if level <= 0:
        t_lower = 0.0
    else:
        lo = 0.5 * tm
        while f(lo) > 0:
            lo *= 0.5
        t_lower = _bisect_polish(f, fp, lo, tm)
    hi = 2.0 * tm
    lo = tm
    while f(hi) > 0:
        lo, hi = hi, 2.0 * hi
    t_upper = _bisect_polish(f, fp, lo, hi)
    return t_lower, t_upper


@dataclass(frozen=True)
class NehariClassification:
    verdict: str
    t_lower: float | None
    t_max: float
    t_upper: float | None
    lambda_threshold_ok: bool
    j1: float
    j2: float

    def as_dict(self):
        return {
            "verdict": self.verdict,
            "t_lower": self.t_lower,
            "t_max": self.t_max,
            "t_upper": self.t_upper,
            "lambda_threshold_ok": self.lambda_threshold_ok,
            "J1": self.j1,
            "J2": self.j2,
        }


def classify(profile: FiberingProfile, spec: ProblemSpec, lam: float | None = None,
             tol: float = 1e-9, zero_tol: float = 1e-9) -> NehariClassification:
    """Nehari verdict of the unit scaling of a field, with its two Nehari scalings."""
    _check_profile(profile)
    lam = _lam(spec, lam)
    A, B, C, D = profile.as_tuple()
    p, q, r, d, b = spec.p, spec.q, spec.r, spec.delta, spec.beta
    j1 = A + b * B - lam * C - D
    j2 = (p - 1) * A + b * (q - 1) * B + lam * d * C - (r - 1) * D
    s1 = A + b * B + lam * C + D
    s2 = (p - 1) * A + b * (q - 1) * B + lam * d * C + (r - 1) * D
    tm = find_tmax(profile, spec)
    lo, hi = find_roots(profile, spec, lam)
    ok = lam * C < m_value(profile, spec, tm)
    if abs(j1) > tol * s1:
        verdict = NOT_MEMBER
    elif abs(j2) <= zero_tol * s2:
        verdict = N_ZERO
    else:
        verdict = N_PLUS if j2 > 0 else N_MINUS
    return NehariClassification(verdict, lo, tm, hi, ok, j1, j2)


class RootAbsentError(ValueError):
    """No Nehari scaling exists on the requested ray."""


def project(profile: FiberingProfile, spec: ProblemSpec, branch: str, lam: float | None = None) -> float:
    """Scaling factor taking a field onto the requested Nehari branch ('plus' or 'minus')."""
    lo, hi = find_roots(profile, spec, lam)
    if lo is None:
        raise RootAbsentError("no Nehari scaling exists: lambda*C exceeds max M on this ray")
    return lo if branch == "plus" else hi


def lambda_star(spec: ProblemSpec, S: float, omega_measure: float) -> float:
    """Closed-form threshold below which every ray meets both Nehari branches."""
    if not (S > 0 and omega_measure > 0):
        raise ValueError("S and |Omega| must be positive")
    p, r, d, ps = spec.p, spec.r, spec.delta, spec.p_star
    first = (r - p) * S ** ((1 - d) / p) / ((r - 1 + d) * omega_measure ** (1 - (1 - d) / ps))
    second = ((p - 1 + d) * S ** (r / p) / ((r - 1 + d) * omega_measure ** (1 - r / ps))) ** ((p - 1 + d) / (r - p))
    return first * second


def e_lambda(profile: FiberingProfile, spec: ProblemSpec, lam: float | None = None) -> float:
    lam = _lam(spec, lam)
    r = spec.r
    return ((r - spec.p) * profile.A + spec.beta * (r - spec.q) * profile.B) / (r - 1 + spec.delta) - lam * profile.C


def lower_bound_constants(spec: ProblemSpec, S: float, omega_measure: float):
    """(A, D0) with I(u) >= -D0 lambda^(p/(p-1+delta)) on the Nehari set (critical case only)."""
    if not spec.critical:
        raise ValueError("lower bound constants are defined for the critical case r = p* only")
    if not (S > 0 and omega_measure > 0):
        raise ValueError("S and |Omega| must be positive")
    p, d, ps = spec.p, spec.delta, spec.p_star
    a = p - 1 + d
    A = ((a / p) * ((ps - 1 + d) / (ps - p)) ** (p * (1 - d) / a) * S ** (-(1 - d) / a)
         * omega_measure ** (p * (ps - 1 + d) / (a * ps)))
    return A, (1 / (1 - d) - 1 / ps) * A


def embedding_constant(profiles, spec: ProblemSpec) -> float:
    """Largest observed ratio C / ||u||^(1-delta) over the given profiles."""
    return max(pr.C / pr.A ** ((1 - spec.delta) / spec.p) for pr in profiles)


def nplus_norm_bound(spec: ProblemSpec, c_emb: float, lam: float | None = None) -> float:
    """Upper bound on ||u||^(p-1+delta) over the plus branch."""
    lam = _lam(spec, lam)
    return lam * (spec.r - 1 + spec.delta) * c_emb / (spec.r - spec.p)


def lambda_tilde_lower_estimate(spec: ProblemSpec, S: float, c_emb: float) -> float:
    """Lambda below which every plus-branch norm stays under the critical compactness level.

    Uses the plus-branch norm bound with a measured embedding constant, so it is
    an empirical lower estimate, not the exact supremum.
    """
    ps, p, d = spec.p_star, spec.p, spec.delta
    level = (ps / p) ** (p / (ps - p)) * S ** (ps / (ps - p))  # bound on ||u||^p
    return (spec.r - p) / ((spec.r - 1 + d) * c_emb) * level ** ((p - 1 + d) / p)


def nehari_zero_norm_bound(spec: ProblemSpec, S: float, omega_measure: float) -> float:
    """Lower bound on ||grad u||_p over rays where E_lambda vanishes on the Nehari set.

    From (p-1+delta) ||u||^p >= (r-1+delta) int |u|^r and the Sobolev/Hoelder
    bound int |u|^r <= S^(-r/p) |Omega|^(1-r/p*) ||u||^r.
    """
    k = (spec.r - 1 + spec.delta) / (spec.p - 1 + spec.delta)
    embed_r = S ** (-spec.r / spec.p) * omega_measure ** (1.0 - spec.r / spec.p_star)
    return (1.0 / (k * embed_r)) ** (1.0 / (spec.r - spec.p))


def lambda_star_via_norm_bound(spec: ProblemSpec, S: float, omega_measure: float) -> float:
    """The same threshold assembled from the Nehari norm bound and the E_lambda coefficients.

    E_lambda >= (r-p)/(r-1+delta) ||u||^p - lambda S^(-(1-delta)/p) |Omega|^(1-(1-delta)/p*) ||u||^(1-delta),
    which stays positive while lambda < (r-p)/(r-1+delta) ||u||^(p-1+delta) / embed_(1-delta).
    """
    if not (S > 0 and omega_measure > 0):
        raise ValueError("S and |Omega| must be positive")
    norm = nehari_zero_norm_bound(spec, S, omega_measure)
    embed_sing = S ** (-(1 - spec.delta) / spec.p) * omega_measure ** (1.0 - (1 - spec.delta) / spec.p_star)
    return (spec.r - spec.p) / (spec.r - 1 + spec.delta) * norm ** (spec.p - 1 + spec.delta) / embed_sing
