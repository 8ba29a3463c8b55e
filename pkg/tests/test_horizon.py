from datetime import timedelta

import numpy as np
import pytest

from degarb.linear_cell import LinearCellParams
from degarb.market import synthesize_prices
from degarb.optimizer import (
    LinearPlanner,
    ObjectiveConfig,
    PbmPlanner,
    SearchConfig,
    SpmRollout,
    WindowError,
    optimize_linear,
    schedule_year,
)
from degarb.spm import SpmModel, load_pack

LM = LinearCellParams()


def test_two_day_input_is_one_window():
    prices = synthesize_prices(4, 2)
    cfg = ObjectiveConfig(theta=0.5)
    annual, end, windows = schedule_year(prices, LinearPlanner(LM), cfg, LinearPlanner(LM).initial_state(0.5))
    direct = optimize_linear(prices, LM, cfg, 0.5)
    assert len(windows) == 1
    assert np.array_equal(annual.powers, direct.powers)
    assert annual.revenue_part == pytest.approx(direct.revenue_part, abs=1e-15)
    assert annual.degradation_part == pytest.approx(direct.degradation_part, rel=1e-12)
    assert end.soc == pytest.approx(direct.soc[-1], abs=1e-12)


def test_linear_state_identity_and_commit():
    prices = synthesize_prices(9, 6)
    cfg = ObjectiveConfig(theta=0.75)
    planner = LinearPlanner(LM)
    annual, end, windows = schedule_year(prices, planner, cfg, planner.initial_state(0.5))
    assert len(annual) == len(prices) and len(windows) == 5
    # every window commits its first day; the last one commits everything
    for k, w in enumerate(windows[:-1]):
        assert np.array_equal(annual.powers[24 * k : 24 * (k + 1)], w.powers[:24])
    soc = 0.5 - np.cumsum(annual.powers) / LM.nominal_energy
    np.testing.assert_allclose(annual.soc, soc, atol=1e-12)
    assert end.soc == pytest.approx(soc[-1], abs=1e-12)
    assert annual.objective_cum[-1] == pytest.approx(annual.objective_value, rel=1e-12)
    assert annual.objective_value == pytest.approx(
        cfg.theta * annual.revenue_part - (1 - cfg.theta) * annual.degradation_part, abs=1e-9)


def test_pbm_state_identity():
    model = SpmModel(load_pack())
    search = SearchConfig(max_sweeps=1, step_fractions=(0.5, 0.25))
    planner = PbmPlanner(model, search)
    prices = synthesize_prices(2, 3)
    s0 = planner.initial_state(0.5)
    annual, end, windows = schedule_year(prices, planner, ObjectiveConfig(theta=0.5), s0)
    replay = SpmRollout(model, s0, search.v_min, search.v_max, search.substeps).simulate(annual.powers)
    assert np.array_equal(replay.end_state.vector, end.vector)
    assert annual.capacity_lost == pytest.approx(replay.capacity_lost, rel=1e-12)


def test_theta_ordering_over_a_year():
    prices = synthesize_prices(7, 365)
    res = {}
    for theta in (1.0, 0.5):
        planner = LinearPlanner(LM)
        annual, _, _ = schedule_year(prices, planner, ObjectiveConfig(theta=theta), planner.initial_state(0.5))
        res[theta] = annual
    assert res[1.0].revenue_part > res[0.5].revenue_part
    assert res[1.0].capacity_lost > res[0.5].capacity_lost


def test_window_error_carries_index_and_time():
    prices = synthesize_prices(1, 4)
    planner = LinearPlanner(LinearCellParams(soc_min=0.1, soc_max=0.9))
    with pytest.raises(WindowError) as info:
        schedule_year(prices, planner, ObjectiveConfig(), planner.initial_state(0.95))
    assert info.value.index == 0 and info.value.timestamp == prices.start_time
    assert isinstance(info.value.__cause__, ValueError)


def test_commit_and_horizon_config():
    prices = synthesize_prices(3, 3)
    cfg = ObjectiveConfig(horizon=timedelta(hours=24), commit=timedelta(hours=6))
    planner = LinearPlanner(LM)
    annual, _, windows = schedule_year(prices, planner, cfg, planner.initial_state(0.5))
    assert len(annual) == 72 and len(windows) == 1 + (72 - 24) // 6
