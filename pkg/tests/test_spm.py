import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bv_bisection
from degarb.errors import KineticsStallFault, SaturationFault, ThermalFault
from degarb.spm import (
    SpmModel,
    arrhenius_scale,
    butler_volmer_overpotential,
    diffusion_step,
    exchange_current_density,
    load_pack,
    sei_apply,
    sei_flux,
    soc_estimate,
    thermal_step,
)
from degarb.spm import kernel as K
from degarb.spm.params import PackError

PARAMS = load_pack()
MODEL = SpmModel(PARAMS)
NO_SEI = SpmModel(PARAMS.without_sei())
F, R = K.FARADAY, K.GAS_CONSTANT


def anode_moles(state, params=PARAMS):
    return K.total_moles(state.conc_n, K.shell_geometry(params.radius_n, params.n_shells))


# --- parameters and OCV ------------------------------------------------------------


def test_pack_ocv_window():
    v = PARAMS.full_ocv(np.linspace(0, 1, 201))
    assert np.all(np.diff(v) > 0)
    assert v[0] == pytest.approx(2.7, abs=0.05) and v[-1] == pytest.approx(4.2, abs=0.05)


@pytest.mark.parametrize("kw", [dict(alpha=1.0), dict(radius_n=0.0), dict(x_n_0=0.0), dict(beta3=-1.0)])
def test_pack_invariants(kw):
    with pytest.raises(PackError):
        load_pack(**kw)


# --- diffusion ------------------------------------------------------------------


def test_zero_flux_uniform_is_equilibrium():
    s = MODEL.fresh_state(0.4)
    s2 = diffusion_step(s, 0.0, 0.0, 100.0, PARAMS)
    np.testing.assert_allclose(s2.conc_n, s.conc_n, rtol=1e-12)
    np.testing.assert_allclose(s2.conc_p, s.conc_p, rtol=1e-12)


def test_zero_flux_conserves_and_flattens():
    s = MODEL.fresh_state(0.5)
    v = s.vector.copy()
    n = PARAMS.n_shells
    v[:n] *= np.linspace(0.6, 1.4, n)
    s = type(s)(v)
    m0 = anode_moles(s)
    for _ in range(50):
        s2 = diffusion_step(s, 0.0, 0.0, 60.0, PARAMS)
        assert np.ptp(s2.conc_n) <= np.ptp(s.conc_n) + 1e-9
        s = s2
    assert anode_moles(s) == pytest.approx(m0, rel=1e-10)


@given(st.floats(-2e-5, 2e-5), st.floats(1.0, 120.0))
def test_constant_flux_mole_balance(j, dt):
    geo = K.shell_geometry(PARAMS.radius_n, PARAMS.n_shells)
    s = MODEL.fresh_state(0.5)
    m0 = anode_moles(s)
    for _ in range(5):
        s = diffusion_step(s, j, 0.0, dt, PARAMS)
    expected = j * geo[1, -1] * 5 * dt  # insertion flux times particle surface times time
    assert anode_moles(s) - m0 == pytest.approx(expected, rel=1e-8, abs=1e-30 + 1e-12 * m0)


def test_diffusion_saturation_fault():
    with pytest.raises(SaturationFault):
        diffusion_step(MODEL.fresh_state(0.99), 1.0, 0.0, 600.0, PARAMS)
    with pytest.raises(ValueError):
        diffusion_step(MODEL.fresh_state(0.5), math.inf, 0.0, 1.0, PARAMS)


# --- kinetics --------------------------------------------------------------------


def test_bv_zero_and_antisymmetry():
    assert butler_volmer_overpotential(0.0, 1e-5, 298.15) == 0.0
    for j in (1e-6, 3e-5, 1e-3):
        assert butler_volmer_overpotential(-j, 2e-5, 300.0) == pytest.approx(
            -butler_volmer_overpotential(j, 2e-5, 300.0), abs=1e-12)


@settings(max_examples=200)
@given(st.floats(-1e-3, 1e-3), st.floats(1e-7, 1e-3), st.floats(260.0, 340.0))
def test_bv_closed_form_matches_bisection(j, j0, T):
    assert butler_volmer_overpotential(j, j0, T) == pytest.approx(bv_bisection(j, j0, T), abs=1e-10)


def test_bv_general_alpha_matches_bisection():
    for j in (-2e-4, 5e-5, 3e-4):
        assert K.bv_overpotential(j, 1e-5, 300.0, 0.3) == pytest.approx(bv_bisection(j, 1e-5, 300.0, 0.3), abs=1e-10)


def test_exchange_density_midpoint_and_limits():
    T = PARAMS.t_ref
    c = PARAMS.c_max_n / 2
    mid = exchange_current_density(c, PARAMS, T, "n")
    assert mid == pytest.approx(F * PARAMS.rate_ref_n * PARAMS.c_e**0.5 * c, rel=1e-12)
    near = [exchange_current_density(x * PARAMS.c_max_n, PARAMS, T) for x in (1e-6, 1 - 1e-6)]
    assert max(near) < 1e-2 * mid
    for bad in (0.0, PARAMS.c_max_n):
        with pytest.raises(KineticsStallFault):
            exchange_current_density(bad, PARAMS, T)


@given(st.floats(0.01, 0.99), st.floats(270.0, 330.0), st.sampled_from("np"))
def test_exchange_density_formula(x, T, el):
    k_ref, e_k, c_max = ((PARAMS.rate_ref_n, PARAMS.e_rate_n, PARAMS.c_max_n) if el == "n"
                         else (PARAMS.rate_ref_p, PARAMS.e_rate_p, PARAMS.c_max_p))
    k = k_ref * math.exp(e_k / R * (1 / PARAMS.t_ref - 1 / T))
    c = x * c_max
    expected = F * k * c**0.5 * PARAMS.c_e**0.5 * (c_max - c) ** 0.5
    assert exchange_current_density(c, PARAMS, T, el) == pytest.approx(expected, rel=1e-12)


def test_arrhenius_identities():
    assert arrhenius_scale(2.5, 3e4, 298.15, 298.15) == 2.5
    for T in (260.0, 300.0, 330.0):
        assert arrhenius_scale(2.5, 0.0, T, 298.15) == 2.5
    vals = [arrhenius_scale(1.0, 3e4, T, 298.15) for T in np.linspace(278, 318, 41)]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(ValueError):
        arrhenius_scale(1.0, 1.0, 0.0, 298.15)


# --- thermal ----------------------------------------------------------------------


def test_thermal_equilibrium_and_cooling():
    p = PARAMS
    s = MODEL.fresh_state(0.5)
    assert thermal_step(s, 0.0, (0.0, 0.0), 60.0, p).temperature == p.t_env
    hot = MODEL.fresh_state(0.5, temperature=p.t_env + 10.0)
    tau = p.rho * p.cell_area * p.cell_thickness * p.heat_capacity / (p.h_conv * p.cell_area)
    T = thermal_step(hot, 0.0, (0.0, 0.0), tau, p).temperature
    assert T - p.t_env == pytest.approx(10.0 * math.exp(-1.0), rel=1e-12)


def test_thermal_steady_state():
    p = PARAMS
    I, eta = 2.7, (-0.01, 0.008)
    tau = p.rho * p.cell_area * p.cell_thickness * p.heat_capacity / (p.h_conv * p.cell_area)
    s = MODEL.fresh_state(0.5)
    for _ in range(100):
        s = thermal_step(s, I, eta, tau / 10, p)
    dT = (I * I * p.r_tot + I * (eta[0] - eta[1])) / (p.h_conv * p.cell_area)
    assert s.temperature - p.t_env == pytest.approx(dT, rel=0.01)


def test_thermal_guard():
    with pytest.raises(ThermalFault):
        thermal_step(MODEL.fresh_state(0.5), 5.0, (5.0, -5.0), 1e6, PARAMS)


# --- SEI -----------------------------------------------------------------------------


def test_sei_flux_properties():
    T = 298.15
    assert sei_flux(0.1, 5e-9, T, PARAMS.without_sei()) == 0.0
    thick = [sei_flux(0.1, d, T, PARAMS) for d in (1e-9, 1e-8, 1e-7, 1e-6)]
    assert np.all(np.diff(thick) < 0)
    assert sei_flux(-0.05, 5e-9, T, PARAMS) > sei_flux(0.0, 5e-9, T, PARAMS) > sei_flux(0.05, 5e-9, T, PARAMS)
    # limits: pure kinetic rate as the film vanishes, pure diffusion rate when it is thick
    j_kin = PARAMS.beta3 / F * math.exp(-PARAMS.alpha_sei * F * (-0.3) / (R * T))
    assert sei_flux(-0.3, 0.0, T, PARAMS) == pytest.approx(j_kin, rel=1e-12)
    d = 1e-2
    assert sei_flux(-0.3, d, T, PARAMS) == pytest.approx(PARAMS.d_sei_ref * PARAMS.c_sei / d, rel=1e-3)


def test_sei_apply():
    s = MODEL.fresh_state(0.5)
    assert np.array_equal(sei_apply(s, 0.0, 10.0, PARAMS).vector, s.vector)
    j = 1e-10
    a = sei_apply(s, j, 10.0, PARAMS)
    b = sei_apply(s, j, 20.0, PARAMS)
    assert b.capacity_lost == pytest.approx(2 * a.capacity_lost, rel=1e-12)
    expected = 3.7 * j * F * PARAMS.a_n * PARAMS.area_n * PARAMS.thickness_n * 10.0 / 3600.0
    assert a.capacity_lost == pytest.approx(expected, rel=1e-12)
    assert a.delta_sei - s.delta_sei == pytest.approx(j * PARAMS.molar_volume_sei * 10.0, rel=1e-12)
    geo = K.shell_geometry(PARAMS.radius_n, PARAMS.n_shells)
    assert anode_moles(s) - anode_moles(a) == pytest.approx(j * geo[1, -1] * 10.0, rel=1e-9)


def test_calendar_month_near_target():
    s, _ = MODEL.run(MODEL.fresh_state(1.0), np.zeros(720), 3600.0, mode="current")
    pct = 100 * s.capacity_lost / PARAMS.nominal_energy_wh
    assert 0.5 < pct / (4.2e-4 * 720) < 2.0


def test_rest_ages_faster_at_high_soc():
    lost = [MODEL.run(MODEL.fresh_state(soc), np.zeros(48), 3600.0, mode="current")[0].capacity_lost
            for soc in (0.1, 0.5, 0.9)]
    assert lost[0] < lost[1] < lost[2]


# --- coupled step -------------------------------------------------------------------


def test_zero_current_voltage_is_ocv():
    s = NO_SEI.fresh_state(0.6)
    s2, V = NO_SEI.step(s, 0.0, 10.0)
    assert V == pytest.approx(NO_SEI.ocv(s2), abs=1e-12)
    assert V == pytest.approx(float(PARAMS.full_ocv(0.6)), abs=1e-9)


def test_discharge_voltage_below_ocv():
    s = MODEL.fresh_state(0.5)
    for I in (0.5, 2.7, 5.0):
        s2, V = MODEL.step(s, I, 10.0)
        assert V < MODEL.ocv(s2)


def test_coulomb_counting():
    rng = np.random.default_rng(3)
    I = rng.uniform(-2.7, 2.7, 300)
    s, log = MODEL.run(MODEL.fresh_state(0.5), I, 30.0, mode="current")
    assert s.charge_throughput == pytest.approx(np.abs(I).sum() * 30.0 / 3600.0, rel=1e-9)


def test_lithium_conservation_without_sei():
    rng = np.random.default_rng(11)
    I = rng.choice([-2.7, 2.7], size=10_000)
    s0 = NO_SEI.fresh_state(0.5)
    s, _ = NO_SEI.run(s0, I, 10.0, mode="current")
    assert NO_SEI.lithium_moles(s) == pytest.approx(NO_SEI.lithium_moles(s0), rel=1e-8)


def test_one_c_discharge_capacity():
    s0, *_ = NO_SEI.cccv(NO_SEI.fresh_state(0.5), -2.7, 4.2, 0.027, dt=10.0)
    _, q, _, _ = NO_SEI.cccv(s0, 2.7, 2.7, 2.7, dt=10.0)
    assert q == pytest.approx(PARAMS.nominal_capacity_ah, rel=0.02)


def test_first_order_convergence_in_dt():
    prof = np.r_[np.full(3, 2.7), np.full(3, -1.35)]
    ref = NO_SEI.run(NO_SEI.fresh_state(0.5), prof, 7.5, n_sub=80, mode="current")[1][-1, K.L_VOLTAGE]
    errs = []
    for n_sub in (5, 10, 20):
        V = NO_SEI.run(NO_SEI.fresh_state(0.5), prof, 600.0 / n_sub, n_sub=n_sub, mode="current")[1][-1, K.L_VOLTAGE]
        errs.append(abs(V - ref))
    assert errs[1] < 0.7 * errs[0] and errs[2] < 0.7 * errs[1]


def test_soc_estimate():
    assert soc_estimate(MODEL.fresh_state(1.0), MODEL) == pytest.approx(1.0, abs=1e-12)
    assert soc_estimate(MODEL.fresh_state(0.0), MODEL) == pytest.approx(0.0, abs=1e-12)
    full, *_ = NO_SEI.cccv(NO_SEI.fresh_state(0.9), -2.7, 4.2, 0.01, dt=10.0)
    half, _ = NO_SEI.run(full, np.full(360, 1.35), 10.0, mode="current")  # 1.35 Ah out
    assert soc_estimate(half, NO_SEI) == pytest.approx(soc_estimate(full, NO_SEI) - 1.35 / 2.75, abs=0.01)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-8.0, 8.0), min_size=1, max_size=24), st.floats(0.2, 0.8))
def test_ageing_monotone_and_limits_respected(powers, soc0):
    s, log = MODEL.run(MODEL.fresh_state(soc0), powers, 300.0, n_sub=3, v_min=2.7, v_max=4.2)
    lost = log  # noqa: F841
    assert s.capacity_lost >= 0 and s.delta_sei >= PARAMS.delta_sei_0
    V = log[:, K.L_VOLTAGE]
    assert np.all(V > 2.7 - 1e-6) and np.all(V < 4.2 + 1e-6)
    prev = MODEL.fresh_state(soc0)
    for p in powers[:5]:
        nxt, _ = MODEL.run(prev, [p], 300.0, n_sub=3, v_min=2.7, v_max=4.2)
        assert nxt.capacity_lost >= prev.capacity_lost and nxt.delta_sei >= prev.delta_sei
        prev = nxt
