from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import bisect

from oracles import dense_operators, scheme_residual
from pfcontrol.errors import BarrierBreach, DiagonalLoss, NonConvergence, SolverError
from pfcontrol.grid import build_mesh
from pfcontrol.potential import PotentialSpec, f_prime
from pfcontrol.state import (InitialData, ModelParams, NewtonConfig, check_control,
                             delay_lookup, is_m_matrix_pattern, mu_matrix, resample_control,
                             solve_state, step_mu, step_rho)
from pfcontrol.timefields import q_norm


def params_for(mesh, **kw):
    base = dict(epsilon=1.0, delta=1.0, alpha=np.ones(mesh.n_boundary), T=1.0, N=10)
    base.update(kw)
    return ModelParams(**base)


# -- delay lookup -------------------------------------------------------------

def test_delay_lookup_examples():
    mu0 = np.array([-1.0])
    hist = [np.array([0.0]), np.array([1.0]), np.array([2.0]), np.array([3.0])]
    assert delay_lookup(hist[:3], 2, 1, mu0) is hist[2]
    assert delay_lookup(hist, 0, 1, mu0) is mu0
    assert delay_lookup(hist, 3, 2, mu0) is hist[2]
    assert delay_lookup(hist, 1, 2, mu0) is mu0


# -- rho step -----------------------------------------------------------------

def test_rho_step_fixed_point_at_half():
    mesh = build_mesh(1, 1.0, 9)
    spec = PotentialSpec.double_well(1.0, 3.0)
    r = step_rho(mesh, np.full(9, 0.5), np.zeros(9), params_for(mesh), spec)
    np.testing.assert_allclose(r, 0.5, atol=1e-13)


def test_rho_step_stationary_constant():
    mesh = build_mesh(2, (1.0, 1.0), (5, 6))
    spec = PotentialSpec.double_well(1.0, 2.0)
    mu_del = np.full(mesh.n_nodes, f_prime(spec, 0.7))
    r = step_rho(mesh, np.full(mesh.n_nodes, 0.7), mu_del, params_for(mesh), spec)
    np.testing.assert_allclose(r, 0.7, atol=1e-13)


def test_rho_step_matches_scalar_bisection():
    mesh = build_mesh(1, 1.0, 9)
    spec = PotentialSpec(c=1.0)
    p = params_for(mesh, T=1.0, N=10)  # dt = 0.1
    r = step_rho(mesh, np.full(9, 0.5), np.ones(9), p, spec)
    r_star = bisect(lambda s: 10 * (s - 0.5) + np.log(s / (1 - s)) - 1.0, 0.5, 0.99, xtol=1e-15)
    np.testing.assert_allclose(r, r_star, atol=1e-12)


def test_rho_step_satisfies_dense_residual():
    mesh = build_mesh(1, 1.0, 9)
    spec = PotentialSpec.double_well(1.0, 3.0)
    p = params_for(mesh)
    x = mesh.axes[0]
    rho_old = 0.5 + 0.3 * np.cos(np.pi * x)
    mu_del = 0.4 + x
    r = step_rho(mesh, rho_old, mu_del, p, spec)
    K, w = dense_operators(mesh)
    res = w * (p.delta * (r - rho_old) / p.dt + f_prime(spec, r) - mu_del) + K @ r
    assert np.max(np.abs(res / w)) < 1e-10


def test_rho_step_nonconvergence_with_one_iteration():
    mesh = build_mesh(1, 1.0, 9)
    p = params_for(mesh, newton=NewtonConfig(tol=1e-14, max_iter=1))
    with pytest.raises(NonConvergence):
        step_rho(mesh, np.full(9, 0.5), np.full(9, 5.0), p, PotentialSpec())


# -- mu step ------------------------------------------------------------------

def test_mu_step_uniform_steady_state():
    mesh = build_mesh(2, (1.0, 1.0), (5, 5))
    p = params_for(mesh)
    rho = np.full(mesh.n_nodes, 0.4)
    mu = step_mu(mesh, np.full(mesh.n_nodes, 1.7), rho, rho, np.full(mesh.n_boundary, 1.7), p)
    np.testing.assert_allclose(mu, 1.7, rtol=1e-13)


def test_mu_step_zero():
    mesh = build_mesh(1, 1.0, 7)
    p = params_for(mesh)
    rho = np.full(7, 0.3)
    assert np.all(step_mu(mesh, np.zeros(7), rho, rho, np.zeros(2), p) == 0.0)


def test_mu_step_dense_five_node_oracle():
    mesh = build_mesh(1, 1.0, 5)
    p = params_for(mesh, T=1.0, N=10)
    rho = np.full(5, 0.3)
    got = step_mu(mesh, np.zeros(5), rho, rho, np.ones(2), p)
    K, w = dense_operators(mesh)
    A = np.diag(w * (1.0 + 2 * 0.3) / 0.1) + K
    A[0, 0] += 1.0
    A[4, 4] += 1.0
    rhs = np.zeros(5)
    rhs[[0, 4]] = 1.0
    np.testing.assert_allclose(got, np.linalg.solve(A, rhs), rtol=1e-13)


def test_mu_step_diagonal_loss():
    mesh = build_mesh(1, 1.0, 5)
    p = params_for(mesh, epsilon=1e-3)
    with pytest.raises(DiagonalLoss):
        step_mu(mesh, np.zeros(5), np.full(5, 0.1), np.full(5, 0.9), np.ones(2), p)


# -- full solve ---------------------------------------------------------------

def test_constant_compatible_data_is_stationary():
    mesh = build_mesh(1, 1.0, 17)
    spec = PotentialSpec(c=1.0)
    m_star = f_prime(spec, 0.6)
    p = params_for(mesh, N=20)
    init = InitialData(np.full(17, 0.6), np.full(17, m_star))
    sol = solve_state(mesh, p, spec, init, np.full((21, 2), m_star))
    np.testing.assert_allclose(sol.rho, 0.6, atol=1e-10)
    np.testing.assert_allclose(sol.mu, m_star, atol=1e-10)


def test_zero_control_zero_mu_decouples():
    mesh = build_mesh(1, 1.0, 17)
    spec = PotentialSpec.double_well(1.0, 3.0)
    x = mesh.axes[0]
    init = InitialData(0.5 + 0.2 * np.cos(np.pi * x), np.zeros(17))
    sol = solve_state(mesh, params_for(mesh, N=20), spec, init, np.zeros((21, 2)))
    assert np.all(sol.mu == 0.0)
    assert np.ptp(sol.rho[-1]) < np.ptp(sol.rho[0])


def test_solution_satisfies_dense_scheme(baseline):
    sol = solve_state(*baseline.args, baseline.u)
    res = scheme_residual(baseline.mesh, baseline.params, baseline.spec, baseline.init,
                          sol.rho, sol.mu, sol.u)
    w = baseline.mesh.domain_weights
    assert np.max(np.abs(res / w)) < 1e-9


def test_self_convergence_first_order(baseline):
    # the bump initial datum causes a fast initial layer; coarse grids are pre-asymptotic
    diffs = []
    for N in (80, 160, 320):
        a_params = replace(baseline.params, N=N)
        a = solve_state(baseline.mesh, a_params, baseline.spec, baseline.init,
                        baseline.cfg.control(baseline.mesh, a_params))
        b_params = replace(baseline.params, N=2 * N)
        b = solve_state(baseline.mesh, b_params, baseline.spec, baseline.init,
                        baseline.cfg.control(baseline.mesh, b_params))
        d = a.rho - b.rho[::2]
        e = a.mu - b.mu[::2]
        w = baseline.mesh.domain_weights
        diffs.append(np.sqrt(np.max(d**2 @ w) + np.max(e**2 @ w)))
    orders = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
    assert np.all(np.diff(diffs) < 0)
    assert 0.8 < orders[-1] < 1.2, orders


def test_positivity_and_m_matrix(baseline):
    sol = solve_state(*baseline.args, baseline.u)
    assert sol.mu.min() >= -1e-12
    for n in range(sol.N):
        A = mu_matrix(baseline.mesh, baseline.params, sol.rho[n + 1], sol.rho[n])
        assert is_m_matrix_pattern(A)
    g = baseline.spec.barrier_guard
    assert sol.rho.min() > g and sol.rho.max() < 1 - g


def test_m_matrix_pattern_rejects():
    A = np.array([[2.0, 0.5], [-1.0, 2.0]])
    assert not is_m_matrix_pattern(A)
    assert is_m_matrix_pattern(np.array([[2.0, -1.0], [-1.0, 2.0]]))


def test_energy_residual_first_order(baseline):
    sums = []
    for N in (25, 50, 100):
        p = replace(baseline.params, N=N)
        sol = solve_state(baseline.mesh, p, baseline.spec, baseline.init,
                          baseline.cfg.control(baseline.mesh, p))
        sums.append(np.abs(sol.energy_residuals).sum())
    orders = np.log2(np.array(sums[:-1]) / np.array(sums[1:]))
    assert np.all(orders >= 0.8), orders


def test_delay_difference_first_order(baseline):
    dist = []
    for N in (25, 50, 100):
        p = replace(baseline.params, N=N, delay_k=1)
        u = baseline.cfg.control(baseline.mesh, p)
        a = solve_state(baseline.mesh, p, baseline.spec, baseline.init, u)
        b = solve_state(baseline.mesh, replace(p, delay_k=2), baseline.spec, baseline.init, u)
        dist.append(np.hypot(q_norm(a.mesh, a.dt, a.rho - b.rho), q_norm(a.mesh, a.dt, a.mu - b.mu)))
    orders = np.log2(np.array(dist[:-1]) / np.array(dist[1:]))
    assert np.all((orders > 0.7) & (orders < 1.3)), orders


def test_determinism(baseline):
    a = solve_state(*baseline.args, baseline.u)
    b = solve_state(*baseline.args, baseline.u.copy())
    assert np.array_equal(a.rho, b.rho) and np.array_equal(a.mu, b.mu)


def test_adaptive_refinement_recovers():
    mesh = build_mesh(1, 1.0, 33)
    spec = PotentialSpec.double_well(1.0, 10.0)
    x = mesh.axes[0]
    init = InitialData(0.01 + 0.98 * np.exp(-((x - 0.5) / 0.05) ** 2), np.zeros(33))
    p = params_for(mesh, epsilon=0.2, T=0.5, N=1, max_refinements=6)
    with pytest.raises(SolverError):
        solve_state(mesh, p, spec, init, np.zeros((2, 2)), adaptive=False)
    sol = solve_state(mesh, p, spec, init, np.zeros((2, 2)))
    assert sol.refinements >= 1
    assert sol.N == 2 ** sol.refinements
    assert sol.params.delay_k == 2 ** sol.refinements


def test_refinement_exhausted_keeps_history():
    mesh = build_mesh(1, 1.0, 33)
    spec = PotentialSpec.double_well(1.0, 10.0)
    x = mesh.axes[0]
    init = InitialData(0.01 + 0.98 * np.exp(-((x - 0.5) / 0.05) ** 2), np.zeros(33))
    p = params_for(mesh, epsilon=1e-6, T=10.0, N=1, max_refinements=2)
    with pytest.raises((DiagonalLoss, BarrierBreach)) as info:
        solve_state(mesh, p, spec, init, np.zeros((2, 2)))
    assert len(info.value.history) == 2


def test_resample_control_linear():
    u = np.array([[0.0, 1.0], [2.0, 1.0]])
    np.testing.assert_allclose(resample_control(u, 1, 2, 1.0), [[0, 1], [1, 1], [2, 1]])


def test_control_validation():
    mesh = build_mesh(1, 1.0, 5)
    with pytest.raises(ValueError):
        check_control(np.ones((3, 3)), mesh, 2)
    with pytest.raises(ValueError):
        check_control(-np.ones((3, 2)), mesh, 2)
    assert check_control(-np.ones((3, 2)), mesh, 2, nonnegative=False).shape == (3, 2)


@pytest.mark.parametrize("kw", [dict(epsilon=0.0), dict(delta=-1.0), dict(T=0.0), dict(N=0),
                                dict(delay_k=11), dict(alpha=np.zeros(2))])
def test_params_validation(kw):
    mesh = build_mesh(1, 1.0, 5)
    with pytest.raises(ValueError):
        params_for(mesh, **kw)


def test_initial_data_validation():
    with pytest.raises(ValueError):
        InitialData(np.array([0.0, 0.5]), np.zeros(2))
    with pytest.raises(ValueError):
        InitialData(np.array([0.2, 0.5]), np.array([-1.0, 0.0]))
