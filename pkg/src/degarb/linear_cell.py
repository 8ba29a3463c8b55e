"""Data-sheet linear battery model: SoC integration plus throughput/peak-power fade.

Positive power discharges (sells). Capacity fade per unit throughput is a
dimensionless Wh-per-Wh ratio; the peak-power term is charged once per
optimisation horizon by the caller (see :mod:`degarb.optimizer.objective`).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import SocLimitError

SOC_TOL = 1e-9

# 20% of nominal capacity consumed after 8000 full equivalent cycles
BETA1_8000_FEC = 0.2 / (8000 * 2)


@dataclass(frozen=True)
class LinearCellParams:
    nominal_energy: float = 10.0  # Wh
    beta1: float = BETA1_8000_FEC  # Wh lost per Wh throughput
    beta2: float = 2.12e-4  # h; loss per W of horizon peak power
    power_limit: float = 10.0  # W
    soc_min: float = 0.0
    soc_max: float = 1.0

    def __post_init__(self):
        if self.nominal_energy <= 0:
            raise ValueError("nominal_energy must be > 0")
        if self.beta1 < 0 or self.beta2 < 0:
            raise ValueError("beta1 and beta2 must be >= 0")
        if self.power_limit <= 0:
            raise ValueError("power_limit must be > 0")
        if not 0 <= self.soc_min < self.soc_max <= 1:
            raise ValueError("need 0 <= soc_min < soc_max <= 1")

    def windowed(self, soc_min=0.1, soc_max=0.9):
        return replace(self, soc_min=soc_min, soc_max=soc_max)


@dataclass(frozen=True)
class LinearCellState:
    soc: float = 0.5
    capacity_lost: float = 0.0  # Wh
    peak_power_seen: float = 0.0  # W, reset by the caller at each horizon


def linear_step(state: LinearCellState, power, dt, params: LinearCellParams) -> LinearCellState:
    """Apply ``power`` [W] for ``dt`` hours."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if abs(power) > params.power_limit * (1 + 1e-12):
        raise ValueError(f"|power|={abs(power)} W exceeds limit {params.power_limit} W")
    soc = state.soc - power * dt / params.nominal_energy
    if soc < params.soc_min - SOC_TOL or soc > params.soc_max + SOC_TOL:
        raise SocLimitError(f"soc {soc:.6f} outside [{params.soc_min}, {params.soc_max}]")
    return LinearCellState(
        soc=soc,
        capacity_lost=state.capacity_lost + params.beta1 * abs(power) * dt,
        peak_power_seen=max(state.peak_power_seen, abs(power)),
    )


def throughput_loss(powers, dt, params: LinearCellParams):
    """Throughput part of the fade for a power sequence [Wh]."""
    return params.beta1 * float(np.sum(np.abs(powers))) * dt


def horizon_peak_loss(powers, params: LinearCellParams, steps_per_horizon):
    """Peak-power part of the fade: beta2 * max|P| once per horizon block [Wh].

    A trailing partial block is charged like a full one.
    """
    powers = np.abs(np.asarray(powers, dtype=float))
    total = 0.0
    for start in range(0, powers.size, steps_per_horizon):
        block = powers[start : start + steps_per_horizon]
        total += params.beta2 * float(block.max(initial=0.0))
    return total
