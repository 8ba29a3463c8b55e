"""Receding-horizon scheduling over a long price series.

Each window of ``config.horizon`` is optimized from the current model state,
the first ``config.commit`` of it is committed and simulated, and the next
window starts from the simulated state. The last window commits everything.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CellFault
from ..linear_cell import LinearCellParams, LinearCellState, linear_step
from ..market import PricePeriodSeries
from ..spm import kernel as K
from ..spm.cell import SpmCellState, SpmModel, raise_fault
from .linear import optimize_linear
from .objective import EUR_PER_WH_MWH, DispatchSchedule, ObjectiveConfig
from .pbm import SearchConfig, optimize_pbm, seed_from_linear


class WindowError(RuntimeError):
    """An optimizer failure inside one receding-horizon window."""

    def __init__(self, index, start_time, cause):
        super().__init__(f"window {index} starting {start_time.isoformat()}: {cause}")
        self.index = index
        self.start_time = start_time
        self.timestamp = getattr(cause, "timestamp", None) or start_time


@dataclass(frozen=True)
class Committed:
    """Simulated result of committing one window's first segment."""

    state: object
    energy: np.ndarray  # Wh per step
    soc: np.ndarray  # SoC at the end of each step
    lost: np.ndarray  # Wh lost per step


class LinearPlanner:
    """Linear-model LP per window; the peak term is charged per committed block."""

    def __init__(self, params: LinearCellParams):
        self.params = params

    def initial_state(self, soc=0.5):
        return LinearCellState(soc=soc)

    def optimize(self, window: PricePeriodSeries, state: LinearCellState, config: ObjectiveConfig):
        return optimize_linear(window, self.params, config, state.soc)

    def advance(self, state: LinearCellState, powers, config: ObjectiveConfig) -> Committed:
        dt = config.dt_hours
        p = self.params
        st = LinearCellState(soc=state.soc, capacity_lost=state.capacity_lost)
        soc = np.empty(len(powers))
        lost = np.empty(len(powers))
        for i, pw in enumerate(powers):
            before = st.capacity_lost
            st = linear_step(st, float(pw), dt, p)
            soc[i] = st.soc
            lost[i] = st.capacity_lost - before
        peak = p.beta2 * float(np.max(np.abs(powers), initial=0.0))
        lost[-1] += peak
        st = LinearCellState(soc=st.soc, capacity_lost=st.capacity_lost + peak)
        return Committed(st, np.asarray(powers, dtype=float) * dt, soc, lost)


class PbmPlanner:
    """SPM trajectory search per window, seeded with the linear optimum."""

    def __init__(self, model: SpmModel, search: SearchConfig = SearchConfig()):
        self.model = model
        self.search = search

    def initial_state(self, soc=0.5):
        return self.model.fresh_state(soc)

    def optimize(self, window: PricePeriodSeries, state: SpmCellState, config: ObjectiveConfig):
        seed = seed_from_linear(window.prices, self.model, state, config, self.search.power_limit)
        return optimize_pbm(window, self.model, config, state, seed, self.search)

    def advance(self, state: SpmCellState, powers, config: ObjectiveConfig) -> Committed:
        m = self.model
        sc = self.search
        powers = np.ascontiguousarray(powers, dtype=np.float64)
        v = state.vector.copy()
        states = np.empty((powers.size + 1, v.size))
        energy = np.zeros(powers.size)
        fault, hour = K.rollout(v, powers, sc.substeps, 3600.0 / sc.substeps, sc.v_min, sc.v_max,
                                m.pvec, m.geo_n, m.geo_p, m.tables, states, energy)
        if fault != K.OK:
            raise_fault(fault, step=hour)
        idx = 2 * m.params.n_shells + 2
        soc = np.array([m.soc(SpmCellState(s)) for s in states[1:]])
        return Committed(SpmCellState(states[-1].copy()), energy, soc, np.diff(states[:, idx]))


def schedule_year(prices: PricePeriodSeries, planner, config: ObjectiveConfig, initial_state):
    """Receding-horizon schedule over all of ``prices``.

    Returns (annual DispatchSchedule, end state, list of window schedules).
    Errors raised inside a window are re-raised as WindowError carrying the
    window index and start time.
    """
    n = len(prices)
    H, C = config.horizon_steps, config.commit_steps
    state = initial_state
    powers, energy, soc, lost, windows = [], [], [], [], []
    t = 0
    w = 0
    while t < n:
        L = min(H, n - t)
        window = prices.window(t, L)
        try:
            sched = planner.optimize(window, state, config)
            commit = L if t + L >= n else C
            done = planner.advance(state, sched.powers[:commit], config)
        except (CellFault, ValueError, RuntimeError) as exc:
            raise WindowError(w, window.start_time, exc) from exc
        windows.append(sched)
        powers.append(sched.powers[:commit])
        energy.append(done.energy)
        soc.append(done.soc)
        lost.append(done.lost)
        state = done.state
        t += commit
        w += 1
    powers = np.concatenate(powers)
    energy = np.concatenate(energy)
    lost = np.concatenate(lost)
    rev_cum = np.cumsum(energy * prices.prices) * EUR_PER_WH_MWH
    deg_cum = np.cumsum(lost) * config.degradation_price / 1000.0
    obj_cum = config.theta * rev_cum - (1.0 - config.theta) * deg_cum
    revenue = float(rev_cum[-1])
    degradation = float(deg_cum[-1])
    annual = DispatchSchedule(
        start_time=prices.start_time,
        powers=powers,
        objective_value=config.combine(revenue, degradation),
        revenue_part=revenue,
        degradation_part=degradation,
        soc=np.concatenate(soc),
        objective_cum=obj_cum,
        capacity_lost=float(lost.sum()),
    )
    return annual, state, windows
