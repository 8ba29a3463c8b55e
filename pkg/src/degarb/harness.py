"""Virtual battery tester: clamped schedule replay, check-ups and the experiment ledger.

A tester drives one cell model. Hourly power commands are followed until a
voltage limit is reached; the remainder of that simulator step is then a
constant-voltage hold. Rows are logged once per ``log_period`` with the
period-mean power and current and the end-of-period voltage and temperature.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import CellFault
from .linear_cell import LinearCellParams, LinearCellState
from .market import PricePeriodSeries
from .spm import kernel as K
from .spm.cell import SpmCellState, SpmModel

HOUR = timedelta(hours=1)
LEDGER_HEADER = ("timestamp", "power_w", "voltage_v", "temperature_k", "fec_cum", "revenue_cum_eur")
CHECKUP_HEADER = ("timestamp", "capacity_wh")


@dataclass(frozen=True)
class TesterLimits:
    v_min: float = 2.7
    v_max: float = 4.2
    cv_cutoff_current: float = 0.01  # fraction of 1C
    log_period: timedelta = timedelta(minutes=15)
    sim_step: timedelta = timedelta(minutes=5)

    def __post_init__(self):
        if not 2.0 <= self.v_min < self.v_max <= 4.5:
            raise ValueError("need 2.0 <= v_min < v_max <= 4.5")
        if HOUR % self.log_period or self.log_period % self.sim_step:
            raise ValueError("log_period must divide an hour and sim_step must divide log_period")

    @property
    def steps_per_log(self):
        return self.log_period // self.sim_step

    @property
    def logs_per_hour(self):
        return HOUR // self.log_period


@dataclass(frozen=True)
class CheckupProtocol:
    cycles: int = 3
    rate: float = 1.0  # C
    cutoff: float = 0.01  # C
    rest: timedelta = timedelta(hours=1)
    step: float = 30.0  # s, simulator step during check-ups
    v_min: float = 2.7
    v_max: float = 4.2


@dataclass
class ExperimentLedger:
    times: list = field(default_factory=list)
    power: list = field(default_factory=list)  # W, period mean
    current: list = field(default_factory=list)  # A, period mean (NaN for the linear model)
    voltage: list = field(default_factory=list)  # V, end of period
    temperature: list = field(default_factory=list)  # K, end of period
    fec: list = field(default_factory=list)  # cumulative, at the end of each row
    revenue: list = field(default_factory=list)  # EUR, cumulative
    checkups: list = field(default_factory=list)  # (time, capacity Wh)
    checkup_fec: list = field(default_factory=list)  # cumulative FEC at each check-up
    reference_capacity: float = float("nan")  # Wh, measured before the run
    capacity_lost_cum: float = 0.0  # Wh, model bookkeeping
    fec_cum: float = 0.0
    revenue_cum: float = 0.0

    def extend(self, delta: "ExperimentLedger"):
        self.times += delta.times
        for name in ("power", "current", "voltage", "temperature", "fec", "revenue"):
            getattr(self, name).extend(getattr(delta, name))
        self.fec_cum = delta.fec_cum
        self.revenue_cum = delta.revenue_cum
        self.capacity_lost_cum = delta.capacity_lost_cum

    def arrays(self):
        return {k: np.asarray(getattr(self, k), dtype=float)
                for k in ("power", "current", "voltage", "temperature", "fec", "revenue")}


def full_equivalent_cycles(current, dt_hours, capacity_ah, axis=None):
    """FEC of a current trace: integral of |I| over twice the capacity."""
    return np.abs(np.asarray(current, dtype=float)).sum(axis=axis) * dt_hours / (2.0 * capacity_ah)


# --- cell adapters -------------------------------------------------------------


class SpmTester:
    """Tester front end for the single particle model."""

    def __init__(self, model: SpmModel):
        self.model = model
        self.capacity_ah = model.params.nominal_capacity_ah
        self.nominal_wh = model.params.nominal_energy_wh

    def capacity_lost(self, state):
        return state.capacity_lost

    def run_powers(self, state, powers, limits: TesterLimits):
        """Clamped run of hourly ``powers``; returns (state', per-sim-step log)."""
        n_sub = HOUR // limits.sim_step
        state, log = self.model.run(state, powers, limits.sim_step.total_seconds(), n_sub=n_sub,
                                    mode="power", v_min=limits.v_min, v_max=limits.v_max)
        return state, log

    def checkup(self, state, protocol: CheckupProtocol):
        """Returns (state', measured capacity Wh, charge throughput Ah)."""
        m = self.model
        one_c = self.capacity_ah
        rest = np.zeros(max(1, int(protocol.rest.total_seconds() // 60)))
        soc_before = float(m.soc(state))
        discharged = []
        throughput = 0.0
        for _ in range(protocol.cycles):
            state, q, _, _ = m.cccv(state, -protocol.rate * one_c, protocol.v_max, protocol.cutoff * one_c,
                                    dt=protocol.step)
            throughput += abs(q)
            state, _ = m.run(state, rest, 60.0, mode="current")
            state, q, e, _ = m.cccv(state, protocol.rate * one_c, protocol.v_min, protocol.cutoff * one_c,
                                    dt=protocol.step)
            throughput += abs(q)
            discharged.append(e)
            state, _ = m.run(state, rest, 60.0, mode="current")
        # return to the operating point the schedule left off at
        target = soc_before - float(m.soc(state))
        if target > 0:
            ah = target * (m.params.x_n_100 - m.params.x_n_0) * self._ah_per_stoich()
            secs = ah / one_c * 3600.0
            n = max(1, int(np.ceil(secs / protocol.step)))
            state, _ = m.run(state, np.full(n, -ah * 3600.0 / (n * protocol.step)), protocol.step,
                             mode="current", v_max=protocol.v_max)
            throughput += ah
            state, _ = m.run(state, rest, 60.0, mode="current")
        return state, float(np.mean(discharged)), throughput

    def _ah_per_stoich(self):
        p = self.model.params
        return p.solid_volume_n * p.c_max_n * K.FARADAY / 3600.0


class LinearTester:
    """Tester front end for the linear model (no voltage, no kinetics).

    Power is clipped where it would leave the SoC window; the peak-power
    fade term is charged once per ``block`` of schedule time.
    """

    def __init__(self, params: LinearCellParams, block: timedelta = timedelta(days=2)):
        self.params = params
        self.block_hours = int(block / HOUR)
        self.capacity_ah = float("nan")
        self.nominal_wh = params.nominal_energy

    def capacity_lost(self, state):
        return state.capacity_lost

    def run_powers(self, state: LinearCellState, powers, limits: TesterLimits, hour0=0):
        p = self.params
        n_sub = HOUR // limits.sim_step
        dt = limits.sim_step / HOUR
        log = np.zeros((len(powers) * n_sub, K.NLOG))
        soc, lost, peak = state.soc, state.capacity_lost, state.peak_power_seen
        row = 0
        for h, cmd in enumerate(powers):
            if (hour0 + h) % self.block_hours == 0:
                lost += p.beta2 * peak
                peak = 0.0
            for _ in range(n_sub):
                pw = min(max(float(cmd), (soc - p.soc_max) * p.nominal_energy / dt),
                         (soc - p.soc_min) * p.nominal_energy / dt)
                soc -= pw * dt / p.nominal_energy
                lost += p.beta1 * abs(pw) * dt
                peak = max(peak, abs(pw))
                log[row] = (np.nan, np.nan, np.nan, pw, float(pw != cmd))
                row += 1
        return LinearCellState(soc, lost, peak), log

    def close(self, state: LinearCellState):
        """Charge the peak term of the open block."""
        return LinearCellState(state.soc, state.capacity_lost + self.params.beta2 * state.peak_power_seen, 0.0)

    def checkup(self, state, protocol: CheckupProtocol):
        return state, self.params.nominal_energy - state.capacity_lost, 0.0


# --- operations ------------------------------------------------------------------


def execute_clamped(tester, state, powers, start_time: datetime, prices, limits: TesterLimits,
                    fec0=0.0, revenue0=0.0, hour0=0):
    """Replay hourly ``powers`` from ``start_time``; returns (state', ledger delta).

    ``prices`` gives the EUR/MWh price of each hour. On a model fault the
    partial ledger is attached to the exception as ``exc.ledger`` and the
    fault timestamp as ``exc.timestamp``.
    """
    powers = np.asarray(powers, dtype=float)
    prices = np.asarray(prices, dtype=float)
    if powers.shape != prices.shape:
        raise ValueError("powers and prices differ in length")
    k = limits.steps_per_log
    dt_h = limits.sim_step / HOUR
    try:
        if isinstance(tester, LinearTester):
            state, log = tester.run_powers(state, powers, limits, hour0)
        else:
            state, log = tester.run_powers(state, powers, limits)
        fault = None
    except CellFault as exc:
        log, fault = exc.log, exc
        state = getattr(exc, "state", state)
    n_rows = log.shape[0] // k
    log = log[: n_rows * k]
    blocks = log.reshape(n_rows, k, K.NLOG)
    p_mean = blocks[:, :, K.L_POWER].mean(axis=1)
    i_mean = blocks[:, :, K.L_CURRENT].mean(axis=1)
    if isinstance(tester, LinearTester):
        fec_inc = np.abs(blocks[:, :, K.L_POWER]).sum(axis=1) * dt_h / (2.0 * tester.nominal_wh)
    else:
        fec_inc = full_equivalent_cycles(blocks[:, :, K.L_CURRENT], dt_h, tester.capacity_ah, axis=1)
    lam = np.repeat(prices, limits.logs_per_hour)[:n_rows]
    rev_inc = p_mean * lam * (limits.log_period / HOUR) * 1e-6
    delta = ExperimentLedger()
    delta.times = [start_time + i * limits.log_period for i in range(n_rows)]
    delta.power = list(p_mean)
    delta.current = list(i_mean)
    delta.voltage = list(blocks[:, -1, K.L_VOLTAGE])
    delta.temperature = list(blocks[:, -1, K.L_TEMPERATURE])
    delta.fec = list(fec0 + np.cumsum(fec_inc))
    delta.revenue = list(revenue0 + np.cumsum(rev_inc))
    delta.fec_cum = delta.fec[-1] if n_rows else fec0
    delta.revenue_cum = delta.revenue[-1] if n_rows else revenue0
    delta.capacity_lost_cum = tester.capacity_lost(state)
    if fault is not None:
        row = getattr(fault, "step", None) or 0
        fault.timestamp = start_time + row * limits.sim_step
        fault.ledger = delta
        raise fault
    return state, delta


def run_checkup(tester, state, protocol: CheckupProtocol = CheckupProtocol()):
    """Three CC-CV cycles with rests; returns (state', mean discharged Wh)."""
    state, capacity, _ = tester.checkup(state, protocol)
    return state, capacity


class LedgerWriter:
    """Append-only CSV persistence of an experiment ledger."""

    def __init__(self, directory, name):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.ledger_path = self.dir / f"{name}_ledger.csv"
        self.checkup_path = self.dir / f"{name}_checkups.csv"
        for path, header in ((self.ledger_path, LEDGER_HEADER), (self.checkup_path, CHECKUP_HEADER)):
            if not path.exists() or path.stat().st_size == 0:
                with open(path, "w", newline="") as fh:
                    csv.writer(fh, lineterminator="\n").writerow(header)

    def append_rows(self, delta: ExperimentLedger):
        with open(self.ledger_path, "a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in zip(delta.times, delta.power, delta.voltage, delta.temperature, delta.fec, delta.revenue):
                w.writerow([row[0].isoformat()] + [repr(float(x)) for x in row[1:]])
            fh.flush()
            os.fsync(fh.fileno())

    def append_checkup(self, time, capacity):
        with open(self.checkup_path, "a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow([time.isoformat(), repr(float(capacity))])


def read_ledger(directory, name):
    """Load ledger and check-up CSVs back into an ExperimentLedger."""
    d = Path(directory)
    led = ExperimentLedger()
    with open(d / f"{name}_ledger.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    for r in rows:
        led.times.append(datetime.fromisoformat(r[0]))
        led.power.append(float(r[1]))
        led.voltage.append(float(r[2]))
        led.temperature.append(float(r[3]))
        led.fec.append(float(r[4]))
        led.revenue.append(float(r[5]))
    led.current = [float("nan")] * len(rows)
    with open(d / f"{name}_checkups.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    led.checkups = [(datetime.fromisoformat(r[0]), float(r[1])) for r in rows]
    if led.checkups and led.checkups[0][0] <= (led.times[0] if led.times else led.checkups[0][0]):
        led.reference_capacity = led.checkups.pop(0)[1]
    if led.fec:
        led.fec_cum, led.revenue_cum = led.fec[-1], led.revenue[-1]
    return led


def run_experiment(tester, state, schedule, prices: PricePeriodSeries, limits: TesterLimits,
                   checkup_every: timedelta = timedelta(days=30),
                   protocol: CheckupProtocol = CheckupProtocol(), count_checkup_fec=True,
                   writer: LedgerWriter | None = None):
    """Alternate clamped execution and check-ups over the whole schedule.

    A reference check-up on a copy of the fresh cell gives the starting
    capacity; further check-ups follow every ``checkup_every`` of schedule
    time and at the end. Check-ups age the cell. Returns (ledger, state').
    """
    powers = np.asarray(getattr(schedule, "powers", schedule), dtype=float)
    start = getattr(schedule, "start_time", prices.start_time)
    if start < prices.start_time or start + powers.size * HOUR > prices.end_time:
        raise ValueError("schedule is not covered by the price series")
    offset = int((start - prices.start_time) / HOUR)
    lam = prices.prices[offset : offset + powers.size]
    seg = int(checkup_every / HOUR)
    ledger = ExperimentLedger()
    try:
        _, ledger.reference_capacity = run_checkup(tester, _copy(state), protocol)
    except CellFault as exc:
        exc.timestamp = start
        exc.ledger = ledger
        raise
    if writer is not None:
        writer.append_checkup(start, ledger.reference_capacity)
    for h0 in range(0, powers.size, seg):
        h1 = min(h0 + seg, powers.size)
        t0 = start + h0 * HOUR
        try:
            state, delta = execute_clamped(tester, state, powers[h0:h1], t0, lam[h0:h1], limits,
                                           ledger.fec_cum, ledger.revenue_cum, hour0=h0)
        except CellFault as exc:
            ledger.extend(exc.ledger)
            if writer is not None:
                writer.append_rows(exc.ledger)
            exc.ledger = ledger
            raise
        ledger.extend(delta)
        if writer is not None:
            writer.append_rows(delta)
        if isinstance(tester, LinearTester) and h1 == powers.size:
            state = tester.close(state)
        t_chk = start + h1 * HOUR
        try:
            state, cap, ah = tester.checkup(state, protocol)
        except CellFault as exc:
            exc.timestamp = t_chk
            exc.ledger = ledger
            raise
        if count_checkup_fec and ah > 0:
            ledger.fec_cum += ah / (2.0 * tester.capacity_ah)
        ledger.checkups.append((t_chk, cap))
        ledger.checkup_fec.append(ledger.fec_cum)
        ledger.capacity_lost_cum = tester.capacity_lost(state)
        if writer is not None:
            writer.append_checkup(t_chk, cap)
    return ledger, state


def _copy(state):
    return state.copy() if hasattr(state, "copy") else state
