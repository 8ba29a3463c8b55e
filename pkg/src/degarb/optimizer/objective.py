"""Weighted revenue/degradation objective and the rollouts that price a schedule.

A rollout turns commanded hourly powers into delivered energy and capacity
lost under one cell model. Revenue is always computed from delivered energy,
so a voltage-clamped SPM schedule is not credited for power it could not
deliver.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from ..errors import DataError, SocLimitError
from ..linear_cell import SOC_TOL, LinearCellParams, horizon_peak_loss, throughput_loss
from ..market import PricePeriodSeries
from ..spm import kernel as K
from ..spm.cell import SpmCellState, raise_fault

EUR_PER_WH_MWH = 1e-6  # W * h * EUR/MWh -> EUR


@dataclass(frozen=True)
class ObjectiveConfig:
    theta: float = 1.0
    degradation_price: float = 330.0  # EUR/kWh of lost capacity
    horizon: timedelta = timedelta(days=2)
    step: timedelta = timedelta(hours=1)
    commit: timedelta = timedelta(days=1)
    # windows may not end with less stored energy than they started with;
    # otherwise the last hours of every horizon sell off the initial charge
    terminal_soc: bool = True

    def __post_init__(self):
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0.5, 1]")
        if self.degradation_price < 0:
            raise ValueError("degradation_price must be >= 0")
        if self.step != timedelta(hours=1):
            raise ValueError("only hourly steps are supported")
        if self.horizon < self.step or self.commit < self.step or self.commit > self.horizon:
            raise ValueError("need step <= commit <= horizon")

    @property
    def dt_hours(self):
        return self.step.total_seconds() / 3600.0

    @property
    def horizon_steps(self):
        return int(self.horizon / self.step)

    @property
    def commit_steps(self):
        return int(self.commit / self.step)

    def combine(self, revenue, degradation_cost):
        return self.theta * revenue - (1.0 - self.theta) * degradation_cost

    def degradation_cost(self, capacity_lost_wh):
        return self.degradation_price * capacity_lost_wh / 1000.0


@dataclass(frozen=True, eq=False)
class DispatchSchedule:
    start_time: datetime
    powers: np.ndarray  # W, positive = discharge
    objective_value: float
    revenue_part: float
    degradation_part: float
    soc: np.ndarray | None = None  # SoC at the end of each step
    objective_cum: np.ndarray | None = None  # EUR, running objective
    capacity_lost: float = 0.0  # Wh
    step: timedelta = field(default=timedelta(hours=1))

    def __len__(self):
        return self.powers.size

    def timestamps(self):
        return [self.start_time + i * self.step for i in range(self.powers.size)]

    def __eq__(self, other):
        if not isinstance(other, DispatchSchedule):
            return NotImplemented
        same = lambda a, b: (a is None and b is None) or (
            a is not None and b is not None and np.array_equal(a, b))
        return (self.start_time == other.start_time and np.array_equal(self.powers, other.powers)
                and self.objective_value == other.objective_value
                and self.revenue_part == other.revenue_part
                and self.degradation_part == other.degradation_part
                and same(self.soc, other.soc) and same(self.objective_cum, other.objective_cum))


# --- rollouts -----------------------------------------------------------------


@dataclass(frozen=True)
class RolloutResult:
    energy: np.ndarray  # Wh delivered per step
    capacity_lost: float  # Wh over the schedule
    soc: np.ndarray  # SoC at the end of each step
    end_state: object


class LinearRollout:
    """Prices a schedule under the linear model.

    The peak-power term is charged once per block of ``block_steps``; the
    SoC window of ``params`` is enforced with a small tolerance.
    """

    def __init__(self, params: LinearCellParams, initial_soc, block_steps=48, dt_hours=1.0):
        self.params = params
        self.initial_soc = float(initial_soc)
        self.block_steps = int(block_steps)
        self.dt = float(dt_hours)

    def simulate(self, powers) -> RolloutResult:
        p = self.params
        powers = np.asarray(powers, dtype=float)
        if np.any(np.abs(powers) > p.power_limit * (1 + 1e-12)):
            raise ValueError("schedule exceeds the power limit")
        soc = self.initial_soc - np.cumsum(powers) * self.dt / p.nominal_energy
        if soc.size and (soc.min() < p.soc_min - SOC_TOL or soc.max() > p.soc_max + SOC_TOL):
            raise SocLimitError("schedule leaves the SoC window")
        lost = throughput_loss(powers, self.dt, p) + horizon_peak_loss(powers, p, self.block_steps)
        return RolloutResult(powers * self.dt, lost, soc, float(soc[-1]) if soc.size else self.initial_soc)


class SpmRollout:
    """Prices a schedule by a voltage-clamped SPM run from ``state``.

    Each hourly command is held for ``substeps`` steps; a CV hold replaces
    the command whenever the voltage would leave [v_min, v_max].
    """

    def __init__(self, model, state, v_min=2.7, v_max=4.2, substeps=4):
        self.model = model
        self.state = state
        self.v_min = float(v_min)
        self.v_max = float(v_max)
        self.substeps = int(substeps)

    def run(self, powers):
        """Raw kernel rollout: (fault, bad hour, hour states, hour energy)."""
        powers = np.ascontiguousarray(powers, dtype=np.float64)
        v = self.state.vector.copy()
        states = np.empty((powers.size + 1, v.size))
        energy = np.zeros(powers.size)
        m = self.model
        fault, hour = K.rollout(v, powers, self.substeps, 3600.0 / self.substeps, self.v_min, self.v_max,
                                m.pvec, m.geo_n, m.geo_p, m.tables, states, energy)
        return fault, hour, states, energy

    def simulate(self, powers) -> RolloutResult:
        fault, hour, states, energy = self.run(powers)
        if fault != K.OK:
            raise_fault(fault, step=hour)
        m = self.model
        lost_idx = 2 * m.params.n_shells + 2
        soc = np.array([m.soc(SpmCellState(s)) for s in states[1:]])
        return RolloutResult(energy, float(states[-1, lost_idx] - states[0, lost_idx]), soc,
                             SpmCellState(states[-1].copy()))


def _aligned(schedule, prices):
    if isinstance(prices, PricePeriodSeries):
        if isinstance(schedule, DispatchSchedule) and schedule.start_time != prices.start_time:
            raise ValueError("schedule and prices start at different times")
        prices = prices.prices
    powers = schedule.powers if isinstance(schedule, DispatchSchedule) else schedule
    powers = np.asarray(powers, dtype=float)
    prices = np.asarray(prices, dtype=float)
    if powers.shape != prices.shape:
        raise ValueError(f"schedule has {powers.size} steps but prices have {prices.size}")
    return powers, prices


def evaluate_objective(schedule, prices, model_rollout, config: ObjectiveConfig):
    """Return (objective, revenue, degradation_cost) in EUR."""
    powers, prices = _aligned(schedule, prices)
    res = model_rollout.simulate(powers)
    revenue = float(np.dot(res.energy, prices)) * EUR_PER_WH_MWH
    degradation = config.degradation_cost(res.capacity_lost)
    return config.combine(revenue, degradation), revenue, degradation


def make_schedule(start_time, powers, prices, rollout, config: ObjectiveConfig):
    """Evaluate ``powers`` and wrap them as a DispatchSchedule."""
    powers, prices = _aligned(np.asarray(powers, dtype=float), prices)
    res = rollout.simulate(powers)
    step_rev = res.energy * prices * EUR_PER_WH_MWH
    revenue = float(np.sum(step_rev))
    degradation = config.degradation_cost(res.capacity_lost)
    return DispatchSchedule(
        start_time=start_time,
        powers=powers.copy(),
        objective_value=config.combine(revenue, degradation),
        revenue_part=revenue,
        degradation_part=degradation,
        soc=res.soc,
        capacity_lost=res.capacity_lost,
    )


SCHEDULE_HEADER = ("timestamp", "power_w", "price_eur_mwh", "soc", "objective_cum_eur")


def save_schedule(schedule: DispatchSchedule, prices, path):
    prices = prices.prices if isinstance(prices, PricePeriodSeries) else np.asarray(prices)
    soc = schedule.soc if schedule.soc is not None else np.full(len(schedule), np.nan)
    cum = schedule.objective_cum if schedule.objective_cum is not None else np.full(len(schedule), np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCHEDULE_HEADER)
        for ts, p, lam, s, c in zip(schedule.timestamps(), schedule.powers, prices, soc, cum):
            w.writerow([ts.isoformat(), repr(float(p)), repr(float(lam)), repr(float(s)), repr(float(c))])


def load_schedule(path):
    """Read a schedule CSV back; returns (DispatchSchedule, prices array)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != SCHEDULE_HEADER:
        raise DataError(f"{path}: expected header {','.join(SCHEDULE_HEADER)}")
    if len(rows) < 2:
        raise DataError(f"{path}: no schedule rows")
    try:
        start = datetime.fromisoformat(rows[1][0])
        data = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    cum = data[:, 3]
    total = float(cum[-1]) if np.isfinite(cum[-1]) else float("nan")
    sched = DispatchSchedule(start, data[:, 0], total, float("nan"), float("nan"),
                             soc=data[:, 2], objective_cum=cum)
    return sched, data[:, 1]
