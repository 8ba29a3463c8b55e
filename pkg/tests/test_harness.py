from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from degarb.errors import CellFault
from degarb.harness import (
    CheckupProtocol,
    LedgerWriter,
    LinearTester,
    SpmTester,
    TesterLimits as Limits,
    execute_clamped,
    full_equivalent_cycles,
    read_ledger,
    run_checkup,
    run_experiment,
)
from degarb.linear_cell import LinearCellParams, LinearCellState
from degarb.market import PricePeriodSeries, synthesize_prices
from degarb.spm import SpmModel, load_pack

T0 = datetime(2014, 1, 1)
MODEL = SpmModel(load_pack())
SPM = SpmTester(MODEL)
LIM = Limits()


def test_limits_invariants():
    with pytest.raises(ValueError):
        Limits(v_min=4.2, v_max=2.7)
    with pytest.raises(ValueError):
        Limits(v_min=1.5)
    with pytest.raises(ValueError):
        Limits(log_period=timedelta(minutes=7))


def test_fec_of_one_c_for_two_hours():
    assert full_equivalent_cycles(np.full(24, 2.7), 5 / 60, 2.7) == pytest.approx(1.0, abs=1e-6)
    # linear model: 10 W for 2 h on a 10 Wh cell
    lt = LinearTester(LinearCellParams())
    _, d = execute_clamped(lt, LinearCellState(1.0), [10.0, -10.0], T0, [0.0, 0.0], LIM)
    assert d.fec[-1] == pytest.approx(1.0, abs=1e-12)


@given(st.lists(st.floats(-5.4, 5.4), min_size=1, max_size=50))
def test_fec_time_reversal(current):
    assert full_equivalent_cycles(current, 0.1, 2.7) == pytest.approx(full_equivalent_cycles(current[::-1], 0.1, 2.7),
                                                                      rel=1e-12, abs=1e-15)


def test_gentle_step_is_not_clamped():
    _, d = execute_clamped(SPM, MODEL.fresh_state(0.5), [1.0, -1.0], T0, [30.0, 30.0], LIM)
    np.testing.assert_allclose(d.power, [1.0] * 4 + [-1.0] * 4, atol=1e-9)


def test_charge_near_full_is_clamped():
    state = MODEL.fresh_state(0.97)
    _, d = execute_clamped(SPM, state, [-10.0, -10.0], T0, [30.0, 30.0], LIM)
    assert np.mean(d.power) > -10.0  # delivered charge below commanded
    assert d.voltage[-1] == pytest.approx(4.2, abs=1e-3)
    assert np.all(np.asarray(d.power) <= 0.0)  # the hold never reverses the current


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-10.0, 10.0), min_size=6, max_size=24), st.floats(0.1, 0.9),
       st.sampled_from([(2.7, 4.2), (3.42, 4.08)]))
def test_replay_respects_limits(powers, soc, window):
    # the tester can only hold limits the resting cell starts inside of
    assume(window[0] + 0.02 < float(MODEL.params.full_ocv(soc)) < window[1] - 0.02)
    lim = Limits(v_min=window[0], v_max=window[1])
    prices = np.linspace(10.0, 60.0, len(powers))
    _, d = execute_clamped(SPM, MODEL.fresh_state(soc), powers, T0, prices, lim)
    v = np.asarray(d.voltage)
    assert np.all(v >= window[0] - 1e-3) and np.all(v <= window[1] + 1e-3)
    # the hold only ever reduces the commanded magnitude
    cmd = np.repeat(powers, lim.logs_per_hour)
    p = np.asarray(d.power)
    assert np.all(np.abs(p) <= np.abs(cmd) + 1e-9) and np.all(p * cmd >= -1e-12)
    # revenue bookkeeping identity
    rev = np.cumsum(p * np.repeat(prices, lim.logs_per_hour) * 0.25 * 1e-6)
    np.testing.assert_allclose(d.revenue, rev, atol=1e-9)
    assert np.all(np.diff(d.fec) >= 0)


def test_fresh_checkup_and_repeat():
    state, cap1 = run_checkup(SPM, MODEL.fresh_state(0.5))
    assert cap1 == pytest.approx(MODEL.params.nominal_energy_wh, rel=0.02)
    assert MODEL.soc(state) == pytest.approx(0.5, abs=0.01)
    _, cap2 = run_checkup(SPM, state)
    assert 0.0 <= (cap1 - cap2) / cap1 < 1e-3


def test_linear_checkup_is_exact():
    _, cap = run_checkup(LinearTester(LinearCellParams()), LinearCellState(0.5, capacity_lost=1.0))
    assert cap == 9.0


def test_sixty_days_two_checkups(tmp_path):
    prices = synthesize_prices(3, 60)
    powers = np.tile(np.r_[np.full(4, -5.0), np.zeros(8), np.full(4, 5.0), np.zeros(8)], 60)
    writer = LedgerWriter(tmp_path, "x")
    ledger, _ = run_experiment(SPM, MODEL.fresh_state(0.5), powers, prices, LIM, count_checkup_fec=False,
                               writer=writer)
    assert len(ledger.checkups) == 2
    assert [t for t, _ in ledger.checkups] == [T0 + timedelta(days=30), T0 + timedelta(days=60)]
    caps = [ledger.reference_capacity] + [c for _, c in ledger.checkups]
    assert all(b <= a * 1.005 for a, b in zip(caps, caps[1:]))
    # FEC from the logged period-mean current
    cur = np.asarray(ledger.current)
    assert ledger.fec[-1] == pytest.approx(full_equivalent_cycles(cur, 0.25, 2.7), rel=1e-6)
    # CSV persistence round trip
    back = read_ledger(tmp_path, "x")
    assert back.reference_capacity == ledger.reference_capacity
    assert back.checkups == ledger.checkups
    assert back.fec == ledger.fec and back.revenue == ledger.revenue
    header = (tmp_path / "x_ledger.csv").read_text().splitlines()[0]
    assert header == "timestamp,power_w,voltage_v,temperature_k,fec_cum,revenue_cum_eur"
    assert (tmp_path / "x_checkups.csv").read_text().splitlines()[0] == "timestamp,capacity_wh"


def test_checkup_fec_flag():
    prices = synthesize_prices(3, 2)
    lt = LinearTester(LinearCellParams())
    on, _ = run_experiment(SPM, MODEL.fresh_state(0.5), np.zeros(48), prices, LIM, count_checkup_fec=True)
    off, _ = run_experiment(SPM, MODEL.fresh_state(0.5), np.zeros(48), prices, LIM, count_checkup_fec=False)
    assert off.fec_cum == 0.0 and on.fec_cum == pytest.approx(3.0, rel=0.05)
    lin, _ = run_experiment(lt, LinearCellState(0.5), np.zeros(48), prices, LIM)
    assert lin.fec_cum == 0.0 and lin.checkups[-1][1] == 10.0


def test_linear_tester_clips_at_soc_bounds():
    lt = LinearTester(LinearCellParams(soc_min=0.1, soc_max=0.9))
    state, d = execute_clamped(lt, LinearCellState(0.85), [-10.0, 10.0], T0, [0.0, 0.0], LIM)
    assert state.soc == pytest.approx(0.1, abs=1e-12)
    assert sum(d.power[:4]) * 0.25 == pytest.approx(-0.5, abs=1e-12)
    assert np.all(np.isnan(d.voltage))


def test_fault_carries_timestamp_and_partial_ledger():
    hot = SpmModel(load_pack(t_max=300.0))
    with pytest.raises(CellFault) as info:
        execute_clamped(SpmTester(hot), hot.fresh_state(0.5), [10.0] * 3, T0, [0.0] * 3, LIM)
    exc = info.value
    assert T0 <= exc.timestamp < T0 + timedelta(hours=3)
    assert len(exc.ledger.times) == (exc.timestamp - T0) // LIM.log_period


def test_schedule_must_be_covered():
    prices = PricePeriodSeries(T0, np.zeros(10))
    with pytest.raises(ValueError):
        run_experiment(LinearTester(LinearCellParams()), LinearCellState(0.5), np.zeros(11), prices, LIM)


def test_checkup_protocol_defaults():
    p = CheckupProtocol()
    assert (p.cycles, p.rate, p.cutoff, p.rest) == (3, 1.0, 0.01, timedelta(hours=1))
