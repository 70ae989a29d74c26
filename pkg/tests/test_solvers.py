import math

import numpy as np
import pytest
import scipy.sparse as sp

from singular_pq import DomainDescriptor, ProblemSpec, RegularizationSchedule, build_space, energy, norms_profile
from singular_pq.fibering import RootAbsentError
from singular_pq.problem import nehari_derivatives
from singular_pq.solvers import (
    SolverReport,
    barrier_phi_hat,
    compare_fields,
    eigen_q,
    is_subsolution,
    is_supersolution,
    lower_barrier_constant,
    minimize_nehari,
    solve_between,
    solve_singular,
    sweep_lambda,
)
from singular_pq.solvers.common import bump, random_positive
from singular_pq.solvers.descent import projected_descent
from singular_pq.solvers.eigen import rayleigh_q


# --- generic projected descent -------------------------------------------------------

def test_projected_descent_quadratic_with_bounds():
    # minimize 1/2 |x - c|^2 over 0 <= x <= 1: the answer is clip(c, 0, 1)
    c = np.array([0.0, -2.0, 0.5, 3.0, 0.0])
    free = np.array([False, True, True, True, False])
    out = projected_descent(lambda x: 0.5 * float((x - c) @ (x - c)), lambda x: np.where(free, x - c, 0.0),
                            lambda x: [sp.identity(5)], np.zeros(5), free,
                            lower=np.zeros(5), upper=np.ones(5))
    assert out.converged
    np.testing.assert_allclose(out.u, [0.0, 0.0, 0.5, 1.0, 0.0], atol=1e-12)
    energies = [e for e, *_ in out.trace]
    assert all(b <= a for a, b in zip(energies, energies[1:]))


@pytest.mark.filterwarnings("ignore::scipy.sparse.linalg.MatrixRankWarning")
def test_projected_descent_falls_back_to_gradient_when_preconditioner_fails():
    c = np.array([0.0, 1.0, 2.0, 0.0])
    free = np.array([False, True, True, False])
    singular_matrix = sp.csr_matrix((4, 4))
    out = projected_descent(lambda x: 0.5 * float((x - c) @ (x - c)), lambda x: np.where(free, x - c, 0.0),
                            lambda x: [singular_matrix], np.zeros(4), free, max_iter=200)
    assert out.converged
    np.testing.assert_allclose(out.u, c, atol=1e-9)


def test_projected_descent_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        projected_descent(lambda x: 0.0, lambda x: x, lambda x: [], np.zeros(3), np.ones(3, bool),
                          lower=np.ones(3), upper=np.zeros(3))


# --- singular problem --------------------------------------------------------------------

def test_singular_solution_properties(ball_solutions, spec03, ball1024):
    rep = ball_solutions["singular"]
    assert rep.converged and rep.residual_norm <= rep.tolerance
    u = rep.field
    assert np.all(u[ball1024.interior] > 0) and u[ball1024.boundary_mask][0] == 0
    assert rep.extras["exact_energy"] < 0
    # a minimizer of the functional without the r-term is a subsolution of the full problem
    assert is_subsolution(spec03, ball1024, u, tol=1e-7)
    for stage in rep.descent_energies():
        assert np.all(np.diff(stage) <= 1e-13 * np.maximum(1.0, np.abs(stage[:-1])))


def test_singular_solution_is_radially_decreasing(ball_solutions):
    u = ball_solutions["singular"].field
    assert np.all(np.diff(u) <= 1e-12)


def test_singular_solve_on_square():
    V = build_space(DomainDescriptor.square(), 16)
    spec = ProblemSpec(domain=DomainDescriptor.square(), lam=0.3)
    rep = solve_singular(spec, V)
    assert rep.converged
    # the crisscross mesh is symmetric under x <-> y, and so is the solution
    index = {tuple(np.round(xy, 12)): i for i, xy in enumerate(V.node_coords)}
    mirror = np.array([index[tuple(np.round(xy[::-1], 12))] for xy in V.node_coords])
    np.testing.assert_allclose(rep.field, rep.field[mirror], atol=1e-8)


def test_singular_solve_needs_small_terminal_regularization(ball256):
    with pytest.raises(ValueError):
        solve_singular(ProblemSpec(), ball256, RegularizationSchedule((1e-2, 1e-4)))


def test_singular_solution_grows_with_lambda(ball256):
    a = solve_singular(ProblemSpec(lam=0.1), ball256).field
    b = solve_singular(ProblemSpec(lam=0.4), ball256).field
    assert compare_fields(a, b, tol=0.0)


def test_lower_barrier_constant_errors(ball256):
    u = bump(ball256)
    with pytest.raises(ValueError):
        lower_barrier_constant(u, u[:-1])
    with pytest.raises(ValueError, match="node"):
        v = u.copy()
        v[3] = 0.0
        lower_barrier_constant(v, u, ball256)
    assert lower_barrier_constant(2 * u, u, ball256) == pytest.approx(2.0)


# --- eigenpair and barrier -----------------------------------------------------------------

def test_eigenpair_ball(ball_solutions, spec03, ball1024):
    eig = ball_solutions["eig"]
    assert eig.positive and eig.value > 0
    assert np.all(eig.field[ball1024.interior] > 0)
    assert rayleigh_q(spec03, ball1024, eig.field) == pytest.approx(eig.value, rel=1e-12)
    # the Rayleigh quotient of any other positive field is larger
    assert rayleigh_q(spec03, ball1024, bump(ball1024)) > eig.value


def test_eigen_q_equals_two_on_interval_is_pi_squared():
    V = build_space(DomainDescriptor.interval(), 256)
    spec = ProblemSpec(n=4, p=3.0, q=2.0, r=5.0, domain=DomainDescriptor.interval())
    eig = eigen_q(spec, V)
    assert abs(eig.value - math.pi**2) / math.pi**2 < 1e-3
    x = V.node_coords[:, 0]
    phi = eig.field / eig.field.max()
    np.testing.assert_allclose(phi, np.sin(np.pi * x), atol=1e-3)


@pytest.mark.parametrize("beta", [0.1, 10.0])
def test_eigenvalue_is_linear_in_beta(ball256, beta):
    a = eigen_q(ProblemSpec(beta=1.0), ball256)
    b = eigen_q(ProblemSpec(beta=beta), ball256)
    assert b.value == pytest.approx(beta * a.value, rel=1e-10)
    np.testing.assert_allclose(a.field, b.field, atol=1e-9)


def test_barrier_phi_hat(ball_solutions, spec03, ball1024):
    phi, eig = ball_solutions["phi"], ball_solutions["eig"]
    assert phi.value == pytest.approx(2 * eig.value)
    assert np.all(phi.field[ball1024.interior] > 0)
    with pytest.raises(ValueError):
        barrier_phi_hat(spec03, ball1024, lambda_hat=0.5 * eig.value, eig=eig)


# --- Nehari minimizers ------------------------------------------------------------------

def test_nehari_minimizers(ball_solutions, spec03, ball1024):
    plus, minus = ball_solutions["plus"], ball_solutions["minus"]
    assert plus.extras["verdict"] == "N_plus" and minus.extras["verdict"] == "N_minus"
    for rep in (plus, minus):
        j1, j2 = nehari_derivatives(spec03, ball1024, rep.field)
        assert abs(j1) <= 1e-8 * norms_profile(spec03, ball1024, rep.field).A
        assert j2 == pytest.approx(rep.nehari_second)
        for stage in rep.descent_energies():
            assert np.all(np.diff(stage) <= 1e-12 * np.maximum(1.0, np.abs(stage[:-1])))
    assert energy(spec03, ball1024, plus.field) < 0 < energy(spec03, ball1024, minus.field)
    assert plus.energy < minus.energy


def test_plus_minimizer_beats_its_own_ray(ball_solutions, spec03, ball1024):
    # u+ is the minimum of its fibering map
    u = ball_solutions["plus"].field
    I0 = energy(spec03, ball1024, u)
    for t in (0.9, 0.99, 1.01, 1.1):
        assert energy(spec03, ball1024, t * u) > I0


def test_minimize_nehari_argument_checks(spec03, ball256):
    with pytest.raises(ValueError):
        minimize_nehari(spec03, ball256, "zero")


def test_minimize_nehari_refuses_large_lambda(base_spec, ball256):
    spec = base_spec.with_lambda(1e4)
    with pytest.raises(RootAbsentError):
        minimize_nehari(spec, ball256, "plus", init=bump(ball256), u_singular=bump(ball256))


# --- comparison and box solve ----------------------------------------------------------------

def test_compare_fields_reports_worst_node():
    v = compare_fields(np.array([0.0, 2.0, 1.0]), np.array([1.0, 1.0, 1.0]), tol=1e-6)
    assert not v and v.worst_node == 1 and v.worst_violation == pytest.approx(1.0)
    with pytest.raises(ValueError):
        compare_fields(np.zeros(2), np.zeros(3))


def test_solve_between_sub_and_supersolution(ball_solutions, spec03, ball1024):
    # the mountain-pass solution v is a (discrete) solution above the singular one,
    # so the box [u_sub, v] is an ordered sub/super pair whose minimizer is u+
    sub = ball_solutions["singular"].field
    sup = ball_solutions["minus"].field
    assert is_supersolution(spec03, ball1024, sup, tol=1e-6)
    rep = solve_between(spec03, ball1024, sub, sup, pair_tol=1e-6)
    assert rep.converged
    assert compare_fields(sub, rep.field, tol=0.0) and compare_fields(rep.field, sup, tol=0.0)
    assert rep.energy <= rep.extras["energy_sub"]
    np.testing.assert_allclose(rep.field, ball_solutions["plus"].field, atol=1e-5)


def test_solve_between_rejects_unordered_pair(spec03, ball256):
    u = bump(ball256)
    with pytest.raises(ValueError, match="node"):
        solve_between(spec03, ball256, 2 * u, u)
    with pytest.raises(ValueError, match="subsolution"):
        solve_between(spec03, ball256, 50 * u, 60 * u)


# --- sweep ------------------------------------------------------------------------------

def test_sweep_rejects_bad_grid(base_spec, ball256):
    with pytest.raises(ValueError):
        sweep_lambda(base_spec, ball256, [1.0, 0.5])
    with pytest.raises(ValueError):
        sweep_lambda(base_spec, ball256, [])


def test_sweep_threads_match_serial(base_spec, lam_star):
    V = build_space(DomainDescriptor.ball(1.0, 3), 64)
    grid = lam_star * np.array([0.1, 1.0, 50.0])
    phi = barrier_phi_hat(base_spec, V).field
    a = sweep_lambda(base_spec, V, grid, phi_hat=phi)
    b = sweep_lambda(base_spec, V, grid, phi_hat=phi, threads=3)
    assert a.as_dict() == b.as_dict() or str(a.as_dict()) == str(b.as_dict())
    assert a.rows[0]["converged"] and not a.rows[-1]["converged"]
    assert a.rows[0]["barrier_eps"] > 0


def test_random_positive_vanishes_on_boundary(ball256):
    u = random_positive(ball256, np.random.default_rng(0), 2.0)
    assert np.all(u[ball256.interior] > 0) and np.all(u[ball256.boundary_mask] == 0)


def test_report_serialisable(ball_solutions):
    d = ball_solutions["plus"].as_dict()
    assert d["converged"] and set(d) >= {"energy", "residual_norm", "nehari_second", "extras"}
    assert isinstance(ball_solutions["plus"], SolverReport)
