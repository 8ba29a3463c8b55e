import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degarb.errors import SocLimitError
from degarb.linear_cell import (
    BETA1_8000_FEC,
    LinearCellParams,
    LinearCellState,
    horizon_peak_loss,
    linear_step,
    throughput_loss,
)

P = LinearCellParams()
powers = st.lists(st.floats(-10, 10), min_size=1, max_size=40)


def run(state, seq, dt=0.1, params=LinearCellParams(soc_min=0.0, soc_max=1.0)):
    for p in seq:
        state = linear_step(state, p, dt, params)
    return state


def test_rest_is_lossless():
    s = linear_step(LinearCellState(0.5), 0.0, 1.0, P)
    assert s.soc == 0.5 and s.capacity_lost == 0.0


def test_full_charge_in_one_hour():
    s = linear_step(LinearCellState(0.0), -10.0, 1.0, P)
    assert s.soc == pytest.approx(1.0, abs=1e-15)


def test_beta1_hits_20pct_after_8000_fec():
    # independent oracle: 20% of 10 Wh over 8000 cycles of 2 x 10 Wh throughput
    beta1 = 0.2 * 10.0 / (8000 * 2 * 10.0)
    assert BETA1_8000_FEC == pytest.approx(beta1, rel=1e-15)
    assert throughput_loss(np.full(16000, 10.0), 1.0, P) == pytest.approx(2.0, rel=1e-12)


def test_soc_window_rejects_overshoot():
    with pytest.raises(SocLimitError):
        linear_step(LinearCellState(0.95), -10.0, 1.0, P)
    w = P.windowed()
    with pytest.raises(SocLimitError):
        linear_step(LinearCellState(0.15), 1.0, 1.0, w)
    # within tolerance is accepted
    linear_step(LinearCellState(0.1 + 5e-10), 0.0, 1.0, w)


def test_power_limit_and_dt():
    with pytest.raises(ValueError):
        linear_step(LinearCellState(0.5), 10.5, 0.1, P)
    with pytest.raises(ValueError):
        linear_step(LinearCellState(0.5), 1.0, 0.0, P)


@pytest.mark.parametrize("kw", [dict(nominal_energy=0), dict(beta1=-1), dict(beta2=-1),
                                dict(soc_min=0.5, soc_max=0.5), dict(soc_max=1.1)])
def test_param_invariants(kw):
    with pytest.raises(ValueError):
        LinearCellParams(**kw)


@given(st.floats(-10, 10), st.floats(0.01, 0.2))
def test_step_is_linear_in_time(p, dt):
    a = linear_step(LinearCellState(0.5), p, 2 * dt, P)
    b = linear_step(linear_step(LinearCellState(0.5), p, dt, P), p, dt, P)
    assert a.soc == pytest.approx(b.soc, abs=1e-12)
    assert a.capacity_lost == pytest.approx(b.capacity_lost, abs=1e-12)


@settings(max_examples=60)
@given(powers, st.randoms(use_true_random=False))
def test_loss_is_order_independent(seq, rnd):
    s1 = run(LinearCellState(0.5), seq, dt=0.01)
    shuffled = list(seq)
    rnd.shuffle(shuffled)
    s2 = run(LinearCellState(0.5), shuffled, dt=0.01)
    assert s1.capacity_lost == pytest.approx(s2.capacity_lost, rel=1e-12, abs=1e-15)
    assert s1.capacity_lost == pytest.approx(P.beta1 * np.abs(seq).sum() * 0.01, rel=1e-12, abs=1e-15)
    assert s1.peak_power_seen == max(abs(x) for x in seq)


@given(st.floats(0, 10), st.floats(0.01, 0.5))
def test_round_trip_returns_soc(p, dt):
    s = linear_step(linear_step(LinearCellState(0.5), -p, dt, P), p, dt, P)
    assert s.soc == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=60)
@given(powers)
def test_capacity_lost_monotone(seq):
    s = LinearCellState(0.5)
    for p in seq:
        s2 = linear_step(s, p, 0.01, P)
        assert s2.capacity_lost >= s.capacity_lost
        s = s2


def test_peak_charged_once_per_block():
    p = np.array([1.0, -4.0, 2.0, 0.0, 3.0])
    assert horizon_peak_loss(p, P, 2) == pytest.approx(P.beta2 * (4.0 + 2.0 + 3.0))
    assert horizon_peak_loss(np.zeros(4), P, 2) == 0.0
