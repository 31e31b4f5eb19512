import numpy as np
import pytest

from conftest import ROOT, load_problem
from pfcontrol.diagnostics import (boundedness_check, delay_convergence_study, delay_gap,
                                   norm_table, q_distance, solution_norm_table,
                                   stability_experiment, stability_from_states)
from pfcontrol.errors import DegenerateInput
from pfcontrol.io import read_rows
from pfcontrol.potential import f_prime
from pfcontrol.state import InitialData, solve_state


def wave(t):
    return np.stack([np.sin(np.pi * t), np.cos(np.pi * t)], axis=1)


def positive_wave(t):
    return 1.0 + 0.5 * wave(t)


def test_identical_controls_give_zero_report(baseline):
    with pytest.raises(DegenerateInput) as info:
        stability_experiment(*baseline.args, baseline.u, baseline.u.copy())
    r = info.value.report
    assert r.lhs1 == r.lhs2 == r.rhs1 == r.rhs2 == 0.0
    assert np.isnan(r.ratio1)


def test_stability_ratio_stable_over_perturbation_size(baseline):
    d = wave(baseline.params.times)
    r1, r2 = [], []
    for s in (1e-1, 1e-2, 1e-3):
        r = stability_experiment(*baseline.args, baseline.u, baseline.u + s * d)
        r1.append(r.ratio1)
        r2.append(r.ratio2)
    # a Lipschitz estimate: the ratio settles instead of growing as the pair shrinks
    assert max(r1) / min(r1) < 1.05 and max(r2) / min(r2) < 1.05


def test_shifted_and_scaled_pairs(baseline):
    # K recorded from the first verified run on the baseline instance
    _, rows = read_rows(ROOT / "tests" / "data" / "stability_K.csv")
    K = {k: float(v) for k, v in rows}
    d = 1e-2 * wave(baseline.params.times)
    u = baseline.u
    pairs = [(u, u + d), (u + 0.5, u + 0.5 + d), (2 * u, 2 * u + d)]  # equal RHS1
    reports = [stability_experiment(*baseline.args, a, b) for a, b in pairs]
    assert all(r.ratio1 <= K["K1"] and r.ratio2 <= K["K2"] for r in reports)
    r1 = [r.ratio1 for r in reports]
    assert max(r1) / min(r1) < 2


def test_stability_report_symmetric(baseline):
    u2 = baseline.u + 0.05 * wave(baseline.params.times)
    a = solve_state(*baseline.args, baseline.u)
    b = solve_state(*baseline.args, u2)
    assert stability_from_states(a, b).as_dict() == stability_from_states(b, a).as_dict()


def test_zero_data_keeps_mu_zero(baseline):
    init = InitialData(baseline.init.rho0, np.zeros(baseline.mesh.n_nodes))
    st = solve_state(baseline.mesh, baseline.params, baseline.spec, init,
                     np.zeros_like(baseline.u))
    b = boundedness_check(st)
    assert b.sup_mu == 0.0 and b.min_mu == 0.0
    assert b.phi0 == 1.0 and b.holds


def test_stationary_data_ratio_at_most_one(baseline):
    r0 = 0.3
    m0 = float(f_prime(baseline.spec, r0))
    n = baseline.mesh.n_nodes
    init = InitialData(np.full(n, r0), np.full(n, m0))
    st = solve_state(baseline.mesh, baseline.params, baseline.spec, init,
                     np.full_like(baseline.u, m0))
    b = boundedness_check(st)
    assert b.sup_mu == pytest.approx(m0, rel=1e-12)
    assert b.sup_mu_ratio <= 1.0 and b.holds


def test_bound_ratio_insensitive_to_refinement(baseline):
    fine = load_problem("mesh.nodes_x=65", "model.steps=80")
    a = boundedness_check(solve_state(*baseline.args, baseline.u)).sup_mu_ratio
    b = boundedness_check(solve_state(*fine.args, fine.u)).sup_mu_ratio
    assert abs(a - b) / a < 0.05


def test_delay_gap_same_delay_is_zero(baseline):
    assert delay_gap(*baseline.args, positive_wave, 20, (2, 2)) == 0.0


def test_delay_gap_zero_for_constant_stationary_state(baseline):
    r0 = 0.3
    m0 = float(f_prime(baseline.spec, r0))
    n = baseline.mesh.n_nodes
    init = InitialData(np.full(n, r0), np.full(n, m0))
    gap = delay_gap(baseline.mesh, baseline.params, baseline.spec, init,
                    lambda t: np.full((t.size, 2), m0), 20)
    assert gap <= 1e-13


def test_delay_gap_first_order(baseline):
    g1 = delay_gap(*baseline.args, positive_wave, 50)
    g2 = delay_gap(*baseline.args, positive_wave, 100)
    assert 0.7 <= np.log2(g1 / g2) <= 1.3


def test_delay_convergence_rows(baseline):
    rows = delay_convergence_study(*baseline.args, baseline.u, [1, 2, 4, 8])
    assert rows[0].distance == 0.0 and np.isnan(rows[0].order)
    assert [r.k for r in rows] == [1, 2, 4, 8]
    assert all(a.distance < b.distance for a, b in zip(rows[1:], rows[2:]))
    with pytest.raises(ValueError):
        delay_convergence_study(*baseline.args, baseline.u, [1, 41])


def test_q_distance_zero_on_self(baseline):
    st = solve_state(*baseline.args, baseline.u)
    assert q_distance(st, st) == 0.0


def test_norm_table_zero_fields(baseline):
    z = np.zeros((5, baseline.mesh.n_nodes))
    assert all(v == 0.0 for v in norm_table(baseline.mesh, 0.25, z, z).values())


def test_norm_table_constants(baseline):
    # |Omega| = 1, T = 1: constant fields have only L2 parts, no time derivatives
    rho = np.full((5, baseline.mesh.n_nodes), 0.3)
    mu = np.full((5, baseline.mesh.n_nodes), 2.0)
    t = norm_table(baseline.mesh, 0.25, rho, mu)
    for key in ("mu_Linf_H", "mu_L2_V", "mu_Linf_V", "mu_L2_H32"):
        assert t[key] == pytest.approx(2.0, rel=1e-13)
    for key in ("rho_Linf_V", "rho_L2_W"):
        assert t[key] == pytest.approx(0.3, rel=1e-13)
    for key in ("rho_t_L2_H", "rho_t_Linf_H", "rho_t_L2_V", "rho_t_Linf_W", "mu_t_L2_H"):
        assert t[key] == 0.0


def test_norm_table_regression(baseline):
    table = solution_norm_table(solve_state(*baseline.args, baseline.u))
    _, rows = read_rows(ROOT / "tests" / "data" / "norms_baseline.csv")
    ref = {k: float(v) for k, v in rows}
    assert list(table) == list(ref)
    for k, v in ref.items():
        assert table[k] == pytest.approx(v, rel=1e-8), k
