"""Economic metrics, lifetime extrapolation and plot-ready summaries of ledgers."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

END_OF_LIFE_PCT = 20.0


def lifetime_extrapolate(annual_loss_pct):
    """Years until 20% capacity is lost at a constant annual rate."""
    if not annual_loss_pct > 0:
        raise ValueError("annual loss must be > 0 for a finite lifetime")
    return END_OF_LIFE_PCT / annual_loss_pct


def lifetime_revenue(annual_revenue, lifetime_years, nominal_energy_wh):
    """Revenue over the lifetime per kWh of nominal energy [EUR/kWh]."""
    return annual_revenue * lifetime_years / (nominal_energy_wh / 1000.0)


def net_profit(revenue, capacity_lost_wh, degradation_price=330.0):
    """Revenue minus lost capacity priced at ``degradation_price`` EUR/kWh."""
    return revenue - capacity_lost_wh / 1000.0 * degradation_price


def comparison_error(simulated, measured):
    """Relative deviation of a simulated from a measured value [%]."""
    if measured == 0:
        raise ValueError("measured value must be nonzero")
    return abs(simulated - measured) / abs(measured) * 100.0


@dataclass(frozen=True)
class ScenarioReport:
    scenario: str
    revenue: float  # EUR over the run
    capacity_lost: float  # % of nominal
    fec: float
    net_profit: float  # EUR
    lifetime_years: float
    lifetime_fec: float
    lifetime_revenue_per_kwh: float  # EUR/kWh
    revenue_per_pct_degradation: float  # EUR/%

    @classmethod
    def build(cls, scenario, revenue, capacity_lost_wh, fec, nominal_energy_wh=10.0, days=365.0,
              degradation_price=330.0):
        """Derive all metrics from run totals, scaling losses to a year."""
        pct = 100.0 * capacity_lost_wh / nominal_energy_wh
        years = days / 365.0
        if pct > 0:
            life = lifetime_extrapolate(pct / years)
            per_pct = revenue / pct
        else:
            life, per_pct = math.inf, math.inf
        return cls(
            scenario=scenario,
            revenue=revenue,
            capacity_lost=pct,
            fec=fec,
            net_profit=net_profit(revenue, capacity_lost_wh, degradation_price),
            lifetime_years=life,
            lifetime_fec=fec / years * life,
            lifetime_revenue_per_kwh=lifetime_revenue(revenue / years, life, nominal_energy_wh),
            revenue_per_pct_degradation=per_pct,
        )

    def row(self):
        return asdict(self)


def histogram_2d(voltage, power, v_bin=0.1, p_bin=1.0, v_range=(2.7, 4.2), p_range=(-10.0, 10.0)):
    """Time fractions on a voltage x power grid, split into rest and cycling.

    Rows are equally long log periods, so the fraction of rows is the
    fraction of time. Rows with exactly zero power go to the resting layer;
    values outside the ranges are placed in the edge bins. Returns
    (v_edges, p_edges, resting, cycling) with resting + cycling summing to 1.
    """
    voltage = np.asarray(voltage, dtype=float)
    power = np.asarray(power, dtype=float)
    if voltage.size == 0 or voltage.shape != power.shape:
        raise ValueError("need equally long, nonempty voltage and power series")
    nv = int(round((v_range[1] - v_range[0]) / v_bin))
    npow = int(round((p_range[1] - p_range[0]) / p_bin))
    v_edges = v_range[0] + v_bin * np.arange(nv + 1)
    p_edges = p_range[0] + p_bin * np.arange(npow + 1)
    vi = np.clip(np.floor((voltage - v_range[0]) / v_bin), 0, nv - 1).astype(int)
    pi = np.clip(np.floor((power - p_range[0]) / p_bin), 0, npow - 1).astype(int)
    # rows without a voltage (linear model) go into the lowest voltage bin
    vi[~np.isfinite(voltage)] = 0
    rest = power == 0.0
    resting = np.zeros((nv, npow))
    cycling = np.zeros((nv, npow))
    np.add.at(resting, (vi[rest], pi[rest]), 1.0)
    np.add.at(cycling, (vi[~rest], pi[~rest]), 1.0)
    n = float(voltage.size)
    return v_edges, p_edges, resting / n, cycling / n


def heuristic_degradation_estimate(power, soc, calendar_rate=4.2e-4, cycle_rate=6.7e-3,
                                   nominal_energy_wh=10.0, dt_hours=1.0):
    """Cumulative degradation trace [%] from a power/SoC profile.

    Calendar ageing accrues at ``calendar_rate`` %/h scaled linearly with
    SoC (the rate is anchored at 100% SoC); cycle ageing at ``cycle_rate``
    % per full equivalent cycle, with FEC counted from |P|.
    Returns (calendar, cycle, total) cumulative traces.
    """
    if calendar_rate < 0 or cycle_rate < 0:
        raise ValueError("rates must be >= 0")
    power = np.asarray(power, dtype=float)
    soc = np.clip(np.asarray(soc, dtype=float), 0.0, 1.0)
    if power.shape != soc.shape:
        raise ValueError("power and soc differ in length")
    calendar = np.cumsum(calendar_rate * soc * dt_hours)
    fec = np.cumsum(np.abs(power) * dt_hours / (2.0 * nominal_energy_wh))
    cycle = cycle_rate * fec
    return calendar, cycle, calendar + cycle


# --- csv helpers -----------------------------------------------------------------


def write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_reports(path, reports):
    fields = list(ScenarioReport.__dataclass_fields__)
    write_rows(path, fields, [[getattr(r, f) for f in fields] for r in reports])


def write_histogram(path, v_edges, p_edges, resting, cycling):
    rows = []
    for i in range(resting.shape[0]):
        for j in range(resting.shape[1]):
            if resting[i, j] or cycling[i, j]:
                rows.append([v_edges[i], p_edges[j], resting[i, j], cycling[i, j]])
    write_rows(path, ["voltage_bin_v", "power_bin_w", "resting_fraction", "cycling_fraction"], rows)


def sig2(x):
    """Two significant figures for presentation tables."""
    if x == 0 or not math.isfinite(x):
        return str(x)
    return f"{x:.{max(0, 1 - int(math.floor(math.log10(abs(x)))))}f}"
