from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nodelife import energy
from nodelife.channel import build_quantizer, make_rng, sample_gain
from nodelife.errors import Infeasible, ParameterError
from nodelife.params import derive, desk_defaults, table_defaults
from nodelife.policy import (BRANCHES, baseline_solve, outage_policy, policy_energy,
                             practical_modulation, practical_policy, prop1_power, prop2_power,
                             rate_residual, scenario1_solve, scenario2_table, scenario3_solve,
                             solve_batch, stationary_point, threshold_gate)
from nodelife.roots import block_time


def _time(pol, params):
    return float(block_time(pol.d_cp, math.log(pol.m_real), params))


def _ber(pol, h2, params, derived):
    return energy.ber_bound(pol.m_real, energy.snr(pol.p_t, h2, params, derived),
                            params.omega1, params.omega2)


# --- transmit power -------------------------------------------------------

def test_prop1_power_examples(derived):
    assert prop1_power(2, 0.5, derived) == pytest.approx(-derived.omega_cap / 0.5, rel=1e-15)
    assert prop1_power(4, 1.0, derived) == pytest.approx(1.525e-11, rel=1e-3)
    with pytest.raises(ParameterError):
        prop1_power(4, 0.0, derived)


@given(st.floats(2.0, 1024.0), st.floats(1e-4, 1e3))
def test_prop1_power_meets_ber_exactly(m, h2):
    p = table_defaults()
    d = derive(p)
    pt = prop1_power(m, h2, d)
    ber = energy.ber_bound(m, energy.snr(pt, h2, p, d), p.omega1, p.omega2)
    assert ber == pytest.approx(p.phi, rel=1e-9)


def test_prop2_power(params, derived):
    assert prop2_power(4, params, derived) == pytest.approx(1.448e-10, rel=1e-3)
    hi = prop2_power(4, params.with_(vartheta=0.999), derive(params.with_(vartheta=0.999)))
    assert hi > prop2_power(4, params, derived)


def test_prop2_outage_probability(params, derived):
    pt = prop2_power(16, params, derived)
    h = sample_gain(make_rng(11), params.varsigma, 400000)
    ok = energy.ber_bound(16, energy.snr(pt, h, params, derived), params.omega1,
                          params.omega2) <= params.phi
    se = math.sqrt(params.vartheta * (1 - params.vartheta) / len(h))
    assert abs(ok.mean() - params.vartheta) < 3 * se


def test_threshold_gate(params, derived):
    assert threshold_gate(0.2, derived) is True
    assert threshold_gate(0.0, derived) is False
    h = sample_gain(make_rng(5), params.varsigma, 400000)
    se = math.sqrt(0.9 * 0.1 / len(h))
    assert abs(threshold_gate(h, derived).mean() - 0.9) < 3 * se


# --- scenario 1 -----------------------------------------------------------

def test_costless_transmission_skips_compression(params):
    p = params.with_(p_syn=0.0, p_fil=0.0, p_mix=0.0)
    pol = scenario1_solve(1e6, p)
    assert pol.d_cp / p.data_bits == pytest.approx(1.0)


def test_scenario1_defaults_sits_at_top_constellation(params):
    pol = scenario1_solve(1.0, params)
    assert pol.m_real == 1024 and pol.branch == "clamped"
    assert _time(pol, params) <= params.t_block + 1e-12


def test_tighter_delay_costs_more(desk):
    d = derive(desk)
    tight = scenario1_solve(1.0, desk.with_(t_block=0.02), d)
    loose = scenario1_solve(1.0, desk.with_(t_block=0.08), d)
    assert policy_energy(tight, desk.with_(t_block=0.02)) > policy_energy(loose, desk)
    assert tight.branch == "delay_active"
    assert loose.branch == "unconstrained"


def test_psi_non_increasing_in_gain(desk):
    d = derive(desk)
    g = np.geomspace(1e-3, 1e3, 300)
    b = solve_batch(g, desk, d)
    psi = b.psi(desk, d)
    assert np.all(np.diff(psi) <= 1e-15 * psi[:-1])


@settings(max_examples=80, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(0.02, 0.1), st.floats(1e-6, 1e-2))
def test_branch_consistency_and_delay(h2, t_block, phi):
    p = desk_defaults().with_(t_block=t_block, phi=phi)
    d = derive(p)
    pol = scenario1_solve(h2, p, d)
    t = _time(pol, p)
    assert t <= p.t_block + 1e-12
    sp = stationary_point(h2, p, d)
    if pol.branch == "unconstrained":
        assert sp.q_time < p.t_block
    if pol.branch == "delay_active":
        assert abs(t - p.t_block) <= 1e-9 * p.t_block
    assert _ber(pol, h2, p, d) == pytest.approx(p.phi, rel=1e-9)
    pr = practical_policy(pol, p, d)
    assert _time(pr, p) <= p.t_block + 1e-12
    assert pr.m_practical in (2 ** k for k in range(1, 11))


def test_stationary_point(desk):
    d = derive(desk)
    sp = stationary_point(1.0, desk, d)
    t_cp = energy.compression_time(desk.data_bits, sp.d_cp_tilde, desk.tau, desk.beta)
    t_tx = energy.tx_time(sp.d_cp_tilde, sp.m_tilde, desk.t_s)
    assert sp.q_time == pytest.approx(t_cp + t_tx, rel=1e-14)
    a = -3 * d.omega_cap / desk.mu
    assert abs(rate_residual(math.log(sp.m_tilde), a, d.p_o)) < 1e-12 * d.p_o
    assert math.isnan(sp.m_hat)
    tight = stationary_point(1.0, desk.with_(t_block=0.02), d)
    assert tight.q_time >= 0.02 and tight.m_hat > tight.m_tilde
    assert tight.xi == pytest.approx((tight.d_cp_hat / desk.data_bits) ** (desk.beta + 1))


def test_scenario1_rejects_zero_gain(params):
    with pytest.raises(ParameterError):
        scenario1_solve(0.0, params)


def test_infeasible_delay(params):
    with pytest.raises(Infeasible):
        scenario1_solve(1.0, params.with_(t_block=1e-4))


# --- practical constellations -------------------------------------------

def test_practical_modulation(desk):
    assert practical_modulation(4.0, 1.0, desk) == 4
    assert practical_modulation(3000.0, 1.0, desk) == 1024
    # 4 is closer to 5.9; it is kept only when the re-solved block still fits in T
    assert practical_modulation(5.9, 1.0, desk.with_(t_block=0.1)) == 4
    assert practical_modulation(5.9, 1.0, desk.with_(t_block=0.05)) == 8
    with pytest.raises(ParameterError):
        practical_modulation(1.5, 1.0, desk)


# --- scenario 2 / 3 -------------------------------------------------------

def test_scenario2_table_construction(params, derived):
    q = build_quantizer(1, 1.0)
    table = scenario2_table(params, derived, q)
    assert len(table) == 2
    assert table[1].outage and table[1].branch is None
    assert policy_energy(table[1], params) == 0.0
    ref = scenario1_solve(math.log(2.0), params, derived)
    assert table[2] == ref


def test_scenario2_guarantee_holds_for_true_gain(desk):
    d = derive(desk)
    q = build_quantizer(4, desk.varsigma)
    table = scenario2_table(desk, d, q)
    h = sample_gain(make_rng(9), desk.varsigma, 50000)
    idx = np.searchsorted(np.asarray(q.levels[:-1]), h, side="right")
    for i in range(2, len(table) + 1):
        pol = table[i]
        hs = h[idx == i]
        assert _ber(pol, q.levels[i - 1], desk, d) == pytest.approx(desk.phi, rel=1e-9)
        assert np.all(_ber(pol, hs, desk, d) <= desk.phi * (1 + 1e-12))


def test_scenario3_rate_decreases_with_vartheta(desk):
    lo = scenario3_solve(desk.with_(vartheta=0.9))
    hi = scenario3_solve(desk.with_(vartheta=0.99))
    assert hi.rate < lo.rate


def test_scenario3_is_scenario1_at_threshold_gain(desk):
    d = derive(desk)
    s3 = scenario3_solve(desk, d)
    assert s3.gain == pytest.approx(d.theta_gate)
    assert s3.p_t == pytest.approx(prop2_power(s3.m_real, desk, d), rel=1e-12)


# --- baseline -------------------------------------------------------------

def test_baseline_delay_equality(desk):
    pol = baseline_solve(1.0, desk)
    # exp(20000 * 16e-6 * ln2 / 0.05)
    assert pol.m_real == pytest.approx(math.exp(4.436141955583), rel=1e-10)
    assert pol.m_real == pytest.approx(84.45, abs=0.01)
    assert pol.branch == "delay_active" and pol.d_cp == desk.data_bits


def test_baseline_infeasible_at_10ms(params):
    with pytest.raises(Infeasible, match="M_max"):
        baseline_solve(1.0, params.with_(t_block=0.01))


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-2, 1e2), st.sampled_from([0.035, 0.05, 0.08]))
def test_joint_dominates_baseline(h2, t_block):
    p = desk_defaults().with_(t_block=t_block)
    d = derive(p)
    # raw block energy: a power-capped baseline would otherwise count as a free outage
    joint, base = scenario1_solve(h2, p, d), baseline_solve(h2, p, d)
    e_joint = energy.psi(joint.m_real, joint.d_cp, joint.p_t, p, d).psi
    e_base = energy.psi(base.m_real, base.d_cp, base.p_t, p, d).psi
    assert e_joint <= e_base * (1 + 1e-12)


def test_outage_policy():
    pol = outage_policy()
    assert pol.outage and pol.p_t == 0 and pol.branch is None
    assert "unconstrained" in BRANCHES
