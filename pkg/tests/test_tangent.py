from dataclasses import replace

import numpy as np
import pytest

from oracles import dense_tangent, pack_tangent
from pfcontrol.errors import BarrierBreach
from pfcontrol.state import solve_state
from pfcontrol.tangent import (solve_tangent, tangent_bound_ratio, taylor_remainder_test,
                               y_norm)


@pytest.fixture(scope="module")
def state(baseline):
    return solve_state(*baseline.args, baseline.u, adaptive=False)


def test_zero_direction(state):
    t = solve_tangent(state, np.zeros_like(state.u))
    assert not t.xi.any() and not t.eta.any()


def test_linear_and_additive(state, rng):
    h1 = rng.standard_normal(state.u.shape)
    h2 = rng.standard_normal(state.u.shape)
    a, b = solve_tangent(state, h1), solve_tangent(state, h2)
    two = solve_tangent(state, 2 * h1)
    s = solve_tangent(state, h1 + h2)
    scale = np.abs(a.eta).max()
    np.testing.assert_allclose(two.xi, 2 * a.xi, atol=1e-12 * scale)
    np.testing.assert_allclose(two.eta, 2 * a.eta, atol=1e-12 * scale)
    np.testing.assert_allclose(s.eta, a.eta + b.eta, atol=1e-12 * scale)
    np.testing.assert_allclose(s.xi, a.xi + b.xi, atol=1e-12 * scale)


def test_matches_dense_complex_step_oracle(small, rng):
    st = solve_state(*small.args, small.u, adaptive=False)
    T = dense_tangent(st)
    for _ in range(3):
        h = rng.standard_normal(st.u.shape)
        t = solve_tangent(st, h)
        ref = T @ h.ravel()
        np.testing.assert_allclose(pack_tangent(t.xi, t.eta), ref, rtol=0,
                                   atol=1e-11 * np.abs(ref).max())


def test_matches_dense_oracle_with_delay(small, rng):
    p = replace(small.params, delay_k=2)
    st = solve_state(small.mesh, p, small.spec, small.init, small.u, adaptive=False)
    h = rng.standard_normal(st.u.shape)
    ref = dense_tangent(st) @ h.ravel()
    t = solve_tangent(st, h)
    np.testing.assert_allclose(pack_tangent(t.xi, t.eta), ref, atol=1e-11 * np.abs(ref).max())


def test_central_difference_error_is_second_order(baseline, state):
    # boundary bump in time, different on each boundary node; the amplitude keeps the
    # O(eps^2) term well above the Newton noise floor (~1e-13 / eps)
    t = baseline.params.times
    h = 10 * np.stack([np.exp(-((t - 0.4) / 0.15) ** 2), 0.5 * np.exp(-((t - 0.7) / 0.1) ** 2)],
                      axis=1)
    tan = solve_tangent(state, h)
    errs = []
    for eps in (1e-3, 5e-4):
        plus = solve_state(*baseline.args, baseline.u + eps * h, adaptive=False)
        minus = solve_state(*baseline.args, baseline.u - eps * h, adaptive=False)
        dxi = (plus.rho - minus.rho) / (2 * eps) - tan.xi
        deta = (plus.mu - minus.mu) / (2 * eps) - tan.eta
        errs.append(np.sqrt(np.sum(dxi**2) + np.sum(deta**2)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.3)


def test_taylor_zero_direction(baseline):
    rows = taylor_remainder_test(*baseline.args, baseline.u, np.zeros_like(baseline.u),
                                 [1e-2, 5e-3])
    assert all(r.remainder == 0.0 for r in rows)


def test_taylor_orders(baseline, rng):
    h = rng.standard_normal(baseline.u.shape)
    rows = taylor_remainder_test(*baseline.args, baseline.u, h, [1e-2, 5e-3, 2.5e-3])
    assert np.isnan(rows[0].order)
    for r in rows[1:]:
        assert 1.7 <= r.order <= 2.3


def test_taylor_barrier_breach_surfaces(baseline):
    with pytest.raises(BarrierBreach):
        taylor_remainder_test(*baseline.args, baseline.u, np.ones_like(baseline.u), [1e3])


def test_bound_ratio_stable_under_refinement(baseline):
    ratios = []
    for N in (20, 40, 80):
        p = replace(baseline.params, N=N)
        u = baseline.cfg.control(baseline.mesh, p)
        st = solve_state(baseline.mesh, p, baseline.spec, baseline.init, u, adaptive=False)
        t = p.times
        h = np.stack([np.sin(np.pi * t), np.cos(2 * np.pi * t)], axis=1)
        ratios.append(tangent_bound_ratio(st, h))
    assert max(ratios) / min(ratios) < 2.0


def test_y_norm_of_zero_and_scaling(state, rng):
    assert y_norm(state.mesh, state.dt, np.zeros_like(state.rho), np.zeros_like(state.mu)) == 0.0
    a = rng.standard_normal(state.rho.shape)
    b = rng.standard_normal(state.rho.shape)
    assert y_norm(state.mesh, state.dt, 3 * a, 3 * b) == pytest.approx(
        3 * y_norm(state.mesh, state.dt, a, b), rel=1e-14)


def test_direction_shape_checked(state):
    with pytest.raises(ValueError):
        solve_tangent(state, np.zeros((3, 2)))
