import time

import pytest
from hypothesis import HealthCheck, settings

from singular_pq import DomainDescriptor, ProblemSpec, build_space
from singular_pq.estimates import estimate_S
from singular_pq.fibering import lambda_star
from singular_pq.solvers import barrier_phi_hat, eigen_q, minimize_nehari, solve_singular

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def base_spec():
    return ProblemSpec(n=3, p=2.0, q=1.5, beta=1.0, lam=0.1, delta=0.5, r=4.0)


@pytest.fixture(scope="session")
def S_est(base_spec):
    return estimate_S(base_spec)


@pytest.fixture(scope="session")
def lam_star(base_spec, S_est):
    return lambda_star(base_spec, S_est, base_spec.domain.measure())


@pytest.fixture(scope="session")
def ball256():
    return build_space(DomainDescriptor.ball(1.0, 3), 256)


@pytest.fixture(scope="session")
def ball1024():
    return build_space(DomainDescriptor.ball(1.0, 3), 1024)


@pytest.fixture(scope="session")
def spec03(base_spec, lam_star):
    return base_spec.with_lambda(0.3 * lam_star)


@pytest.fixture(scope="session")
def ball_solutions(spec03, ball1024):
    """Singular solution, both Nehari minimizers and the barrier on the 1024-node ball."""
    t0 = time.perf_counter()
    sing = solve_singular(spec03, ball1024)
    plus = minimize_nehari(spec03, ball1024, "plus", u_singular=sing.field)
    minus = minimize_nehari(spec03, ball1024, "minus", u_singular=sing.field)
    elapsed = time.perf_counter() - t0
    eig = eigen_q(spec03, ball1024)
    phi = barrier_phi_hat(spec03, ball1024, eig=eig)
    return {"singular": sing, "plus": plus, "minus": minus, "eig": eig, "phi": phi,
            "multiplicity_seconds": elapsed}


# --- acceptance reporting ------------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    """Record a one-line PASS/FAIL verdict for an acceptance criterion."""

    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def random_field(space, rng, lo=0.2, hi=1.0):
    u = rng.uniform(lo, hi, space.n_nodes)
    u[space.boundary_mask] = 0.0
    return u
