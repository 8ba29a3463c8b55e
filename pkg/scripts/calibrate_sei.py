"""Fit the SEI kinetic prefactor and transfer coefficient to two ageing rates.

Targets (fresh cell, 25 degC):
  * calendar: 4.2e-4 % of nominal energy per hour resting at 100% SoC
  * cycling:  6.7e-3 % per full 0-100% cycle (1C CC-CV both ways)

The film diffusivity is held fixed; it only matters once the film has grown.
"""

from dataclasses import replace

import numpy as np
from scipy.optimize import least_squares

from degarb.spm.cell import SpmModel

CALENDAR_TARGET = 4.2e-4  # %/h
CYCLE_TARGET = 6.7e-3  # %/cycle


def calendar_rate(params, hours=720):
    m = SpmModel(params)
    s = m.fresh_state(1.0)
    s2, _ = m.run(s, np.zeros(hours), 3600.0, mode="current")
    return 100.0 * s2.capacity_lost / params.nominal_energy_wh / hours


def cycle_rate(params, cycles=5):
    m = SpmModel(params)
    one_c = params.nominal_capacity_ah
    s = m.fresh_state(0.0)
    for _ in range(cycles):
        s, *_ = m.cccv(s, -one_c, 4.2, one_c / 20, dt=30.0)
        s, *_ = m.cccv(s, one_c, 2.7, one_c / 20, dt=30.0)
    return 100.0 * s.capacity_lost / params.nominal_energy_wh / cycles


def calibrate(params, verbose=True):
    def resid(z):
        p = replace(params, beta3=float(np.exp(z[0])), alpha_sei=float(z[1]))
        return [np.log(calendar_rate(p) / CALENDAR_TARGET), np.log(cycle_rate(p) / CYCLE_TARGET)]

    z0 = [np.log(params.beta3), params.alpha_sei]
    sol = least_squares(resid, z0, bounds=([np.log(1e-24), 0.1], [np.log(1.0), 4.0]), xtol=1e-10)
    out = replace(params, beta3=float(np.exp(sol.x[0])), alpha_sei=float(sol.x[1]))
    if verbose:
        print(f"beta3={out.beta3:.4e} alpha_sei={out.alpha_sei:.4f}")
        print(f"calendar {calendar_rate(out):.3e} %/h (target {CALENDAR_TARGET:.1e})")
        print(f"cycle    {cycle_rate(out):.3e} %/cycle (target {CYCLE_TARGET:.1e})")
    return out
