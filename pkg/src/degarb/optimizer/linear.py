"""Exact dispatch under the linear cell model as a linear program."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix, hstack, identity, tril, vstack

from ..linear_cell import LinearCellParams
from ..market import PricePeriodSeries
from .objective import EUR_PER_WH_MWH, LinearRollout, ObjectiveConfig, make_schedule


class InfeasibleDispatch(ValueError):
    pass


def _lp(prices, params: LinearCellParams, config: ObjectiveConfig, initial_soc):
    """Build and solve the LP; returns net powers [W] (positive = discharge).

    Variables are charge c_t >= 0, discharge d_t >= 0 and one peak variable
    per horizon block. |P_t| is linearised as c_t + d_t.
    """
    T = prices.size
    dt = config.dt_hours
    E = params.nominal_energy
    hs = config.horizon_steps
    nb = -(-T // hs)
    kappa = (1.0 - config.theta) * config.degradation_price / 1000.0  # EUR per Wh lost
    rev = config.theta * prices * dt * EUR_PER_WH_MWH
    wear = kappa * params.beta1 * dt
    cost = np.concatenate([rev + wear, -rev + wear, np.full(nb, kappa * params.beta2)])
    scale = np.max(np.abs(cost))
    if scale > 0:
        cost = cost / scale

    # SoC_t = s0 + sum_{k<=t} (c_k - d_k) dt / E within [soc_min, soc_max]
    L = tril(np.ones((T, T)), format="csr") * (dt / E)
    soc_rows = hstack([L, -L, csr_matrix((T, nb))])
    # peak variables dominate both parts in their block
    blocks = csr_matrix((np.ones(T), (np.arange(T), np.arange(T) // hs)), shape=(T, nb))
    I = identity(T, format="csr")
    Z = csr_matrix((T, T))
    A = vstack([soc_rows, -soc_rows, hstack([I, Z, -blocks]), hstack([Z, I, -blocks])], format="csr")
    b = np.concatenate([
        np.full(T, params.soc_max - initial_soc),
        np.full(T, initial_soc - params.soc_min),
        np.zeros(2 * T),
    ])
    if config.terminal_soc:
        A = vstack([A, -soc_rows[T - 1]], format="csr")
        b = np.append(b, 0.0)
    bounds = [(0.0, params.power_limit)] * (2 * T + nb)
    res = linprog(cost, A_ub=A, b_ub=b, bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status == 2:
        raise InfeasibleDispatch("linear dispatch problem is infeasible")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    c, d = res.x[:T], res.x[T : 2 * T]
    # complementarity cleanup: net out simultaneous charge and discharge
    return d - c


def _repair(powers, params: LinearCellParams, dt, initial_soc, terminal):
    """Snap solver round-off so the SoC path stays inside the window exactly."""
    p = np.clip(powers, -params.power_limit, params.power_limit)
    p[np.abs(p) < 1e-9 * params.power_limit] = 0.0
    E = params.nominal_energy
    soc = initial_soc
    for t in range(p.size):
        hi = (soc - params.soc_min) * E / dt
        lo = (soc - params.soc_max) * E / dt
        p[t] = min(max(p[t], lo), hi)
        soc -= p[t] * dt / E
    if terminal and soc < initial_soc:
        # take the round-off deficit out of the last discharging step
        k = np.flatnonzero(p > 0)
        if k.size:
            p[k[-1]] = max(0.0, p[k[-1]] - (initial_soc - soc) * E / dt)
    return p


def optimize_linear(prices, params: LinearCellParams, config: ObjectiveConfig, initial_soc,
                    start_time=None):
    """Globally optimal dispatch of the linear model over ``prices``.

    ``prices`` is a PricePeriodSeries or an array of EUR/MWh values. The
    peak-power charge is applied once per horizon block. With
    ``config.terminal_soc`` the final SoC may not fall below ``initial_soc``.
    """
    if isinstance(prices, PricePeriodSeries):
        start_time = prices.start_time
        lam = prices.prices
    else:
        lam = np.asarray(prices, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("prices must be a nonempty 1-D sequence")
    if not params.soc_min - 1e-12 <= initial_soc <= params.soc_max + 1e-12:
        raise InfeasibleDispatch(f"initial SoC {initial_soc} outside [{params.soc_min}, {params.soc_max}]")
    initial_soc = min(max(initial_soc, params.soc_min), params.soc_max)
    powers = _repair(_lp(lam, params, config, initial_soc), params, config.dt_hours, initial_soc,
                     config.terminal_soc)
    rollout = LinearRollout(params, initial_soc, config.horizon_steps, config.dt_hours)
    return make_schedule(start_time, powers, lam, rollout, config)
