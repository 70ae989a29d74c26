import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from conftest import random_field
from oracles import lambda_star_direct
from singular_pq import FiberingProfile, ProblemSpec, norms_profile
from singular_pq.fibering import (
    N_MINUS,
    N_PLUS,
    N_ZERO,
    NOT_MEMBER,
    RootAbsentError,
    classify,
    e_lambda,
    embedding_constant,
    fibering_eval,
    find_roots,
    find_tmax,
    g_value,
    lambda_star,
    lambda_star_via_norm_bound,
    lambda_tilde_lower_estimate,
    lower_bound_constants,
    m_derivative,
    m_value,
    nplus_norm_bound,
    project,
    t0_lower_bound,
    t_star,
)

positive = st.floats(1e-2, 1e2)
profiles = st.builds(FiberingProfile, positive, positive, positive, positive)


@st.composite
def specs(draw):
    n = draw(st.integers(3, 6))
    p = draw(st.floats(1.3, min(n - 0.3, 3.0)))
    q = draw(st.floats(1.05, p - 0.05))
    ps = n * p / (n - p)
    r = draw(st.floats(p + 0.1, min(ps, p + 4.0)))
    delta = draw(st.floats(0.05, 0.95))
    beta = draw(st.floats(0.1, 10.0))
    from singular_pq import DomainDescriptor

    return ProblemSpec(n=n, p=p, q=q, beta=beta, lam=1.0, delta=delta, r=r,
                       domain=DomainDescriptor.ball(1.0, n))


@given(prof=profiles, spec=specs())
def test_tmax_is_the_critical_point_of_M(prof, spec):
    tm = find_tmax(prof, spec)
    assert tm >= t_star(prof, spec) * (1 - 1e-12)
    scale = (spec.p - 1 + spec.delta) * tm ** (spec.p - spec.q) * prof.A + (spec.r - 1 + spec.delta) * tm ** (
        spec.r - spec.q) * prof.D
    assert abs(g_value(prof, spec, tm)) <= 1e-9 * scale
    assert m_value(prof, spec, tm) >= m_value(prof, spec, 0.9 * tm)
    assert m_value(prof, spec, tm) >= m_value(prof, spec, 1.1 * tm)


@given(prof=profiles, spec=specs(), frac=st.floats(0.01, 0.99))
def test_two_roots_below_the_peak(prof, spec, frac):
    tm = find_tmax(prof, spec)
    lam = frac * m_value(prof, spec, tm) / prof.C
    lo, hi = find_roots(prof, spec, lam)
    assert 0 < lo < tm < hi
    for t in (lo, hi):
        _, j1, _ = fibering_eval(prof, spec, t, lam)
        assert abs(m_value(prof, spec, t) - lam * prof.C) <= 1e-9 * lam * prof.C
    assert m_derivative(prof, spec, lo) > 0 > m_derivative(prof, spec, hi)
    # J'' signs: the lower root is a local minimum of the fibering map, the upper a maximum
    assert fibering_eval(prof, spec, lo, lam)[2] > 0 > fibering_eval(prof, spec, hi, lam)[2]


@given(prof=profiles, spec=specs(), over=st.floats(1.001, 100.0))
def test_no_roots_above_the_peak(prof, spec, over):
    tm = find_tmax(prof, spec)
    lam = over * m_value(prof, spec, tm) / prof.C
    assert find_roots(prof, spec, lam) == (None, None)
    with pytest.raises(RootAbsentError):
        project(prof, spec, "plus", lam)
    assert not classify(prof, spec, lam).lambda_threshold_ok


def test_double_root_at_the_peak():
    spec = ProblemSpec()
    prof = FiberingProfile(1.0, 1.0, 1.0, 1.0)
    tm = find_tmax(prof, spec)
    lam = m_value(prof, spec, tm) / prof.C
    assert find_roots(prof, spec, lam) == (tm, tm)


def test_zero_level_gives_only_the_upper_root():
    spec = ProblemSpec()
    prof = FiberingProfile(1.0, 1.0, 0.0, 1.0)
    lo, hi = find_roots(prof, spec, 0.3)
    assert lo == 0.0 and hi > find_tmax(prof, spec)


def test_degenerate_profile_rejected():
    with pytest.raises(ValueError):
        classify(FiberingProfile(0.0, 0.0, 0.0, 0.0), ProblemSpec())


@given(prof=profiles, spec=specs(), frac=st.floats(0.05, 0.95))
def test_classification_of_projected_rays(prof, spec, frac):
    tm = find_tmax(prof, spec)
    lam = frac * m_value(prof, spec, tm) / prof.C
    lo, hi = find_roots(prof, spec, lam)
    assert classify(prof.scaled(lo, spec), spec, lam).verdict == N_PLUS
    assert classify(prof.scaled(hi, spec), spec, lam).verdict == N_MINUS
    assume(abs(lo - 1) > 1e-3 and abs(hi - 1) > 1e-3)
    assert classify(prof, spec, lam).verdict == NOT_MEMBER


def test_zero_verdict_at_the_double_root():
    spec = ProblemSpec()
    prof = FiberingProfile(1.0, 1.0, 1.0, 1.0)
    tm = find_tmax(prof, spec)
    lam = m_value(prof, spec, tm) / prof.C
    assert classify(prof.scaled(tm, spec), spec, lam).verdict == N_ZERO


@given(prof=profiles, spec=specs(), frac=st.floats(0.05, 0.95))
def test_e_lambda_identity_on_the_nehari_set(prof, spec, frac):
    # on the Nehari set J''(1) = -(r - 1 + delta) E_lambda
    tm = find_tmax(prof, spec)
    lam = frac * m_value(prof, spec, tm) / prof.C
    for t in find_roots(prof, spec, lam):
        pr = prof.scaled(t, spec)
        j2 = fibering_eval(pr, spec, 1.0, lam)[2]
        e = e_lambda(pr, spec, lam)
        assert j2 == pytest.approx(-(spec.r - 1 + spec.delta) * e, rel=1e-7, abs=1e-9 * abs(j2) + 1e-12)


@given(spec=specs(), S=st.floats(0.1, 50.0), omega=st.floats(0.05, 20.0))
def test_lambda_star_three_evaluations(spec, S, omega):
    a = lambda_star(spec, S, omega)
    b = lambda_star_via_norm_bound(spec, S, omega)
    c = lambda_star_direct(spec.n, spec.p, spec.r, spec.delta, S, omega)
    assert a == pytest.approx(c, rel=1e-12)
    assert b == pytest.approx(c, rel=1e-12)


def test_lambda_star_reference_value(S_est, base_spec, lam_star):
    # unit ball in R^3 with the default exponents
    assert abs(lam_star - 1.11641) < 1e-4
    assert lam_star == pytest.approx(lambda_star_direct(3, 2.0, 4.0, 0.5, S_est, 4 * math.pi / 3), rel=1e-14)


def test_lambda_star_rejects_bad_constants():
    with pytest.raises(ValueError):
        lambda_star(ProblemSpec(), 0.0, 1.0)


def test_t0_is_a_lower_bound_for_tmax(base_spec, S_est, ball256):
    rng = np.random.default_rng(12)
    omega = base_spec.domain.measure()
    for _ in range(50):
        u = random_field(ball256, rng, 0.0, 1.0) * rng.uniform(0.1, 10)
        prof = norms_profile(base_spec, ball256, u)
        assert t0_lower_bound(prof, base_spec, S_est, omega) <= find_tmax(prof, base_spec)


def test_every_ray_has_two_roots_below_lambda_star(base_spec, lam_star, ball256):
    spec = base_spec.with_lambda(0.99 * lam_star)
    rng = np.random.default_rng(13)
    for _ in range(50):
        u = random_field(ball256, rng, 0.0, 1.0)
        assert classify(norms_profile(spec, ball256, u), spec).lambda_threshold_ok


def test_lower_bound_constants_closed_form():
    spec = ProblemSpec(r=6.0)
    S, omega = 5.4779, 4 * math.pi / 3
    A, D0 = lower_bound_constants(spec, S, omega)
    p, d, ps = 2.0, 0.5, 6.0
    a = p - 1 + d
    A_ref = (a / p) * ((ps - 1 + d) / (ps - p)) ** (p * (1 - d) / a) * S ** (-(1 - d) / a) * omega ** (
        p * (ps - 1 + d) / (a * ps))
    assert A == pytest.approx(A_ref, rel=1e-14)
    assert D0 == pytest.approx((1 / (1 - d) - 1 / ps) * A_ref, rel=1e-14)
    with pytest.raises(ValueError):
        lower_bound_constants(ProblemSpec(), S, omega)


def test_embedding_and_nplus_bounds(base_spec, ball256):
    rng = np.random.default_rng(4)
    profs = [norms_profile(base_spec, ball256, random_field(ball256, rng)) for _ in range(10)]
    c = embedding_constant(profs, base_spec)
    assert c > 0
    assert nplus_norm_bound(base_spec, c, 0.2) == pytest.approx(2 * nplus_norm_bound(base_spec, c, 0.1))
    assert lambda_tilde_lower_estimate(base_spec.with_(r=6.0), 5.4779, c) > 0
