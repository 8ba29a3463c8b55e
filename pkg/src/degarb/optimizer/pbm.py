"""Dispatch under the single particle model by derivative-free local search.

Each candidate is scored by a full voltage-clamped rollout. Only the hours
from the changed step onward are re-simulated: the states at every hour
boundary of the incumbent are cached, so a move at hour t costs a rollout of
H - t hours.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linear_cell import LinearCellParams
from ..market import PricePeriodSeries
from ..spm import kernel as K
from ..spm.cell import SpmCellState, SpmModel
from ..spm.params import SpmParams
from .linear import optimize_linear
from .objective import EUR_PER_WH_MWH, ObjectiveConfig, SpmRollout, make_schedule


@dataclass(frozen=True)
class SearchConfig:
    power_limit: float = 10.0  # W
    v_min: float = 2.7
    v_max: float = 4.2
    substeps: int = 4  # simulator steps per hour
    step_fractions: tuple = (0.5, 0.25, 0.125, 0.0625)  # of power_limit
    max_sweeps: int = 3  # per step size
    min_gain: float = 1e-14  # EUR; smaller improvements are ignored
    # shortfall of final SoC is priced above any sale in the window
    terminal_penalty: float = 2.0

    def __post_init__(self):
        if not self.power_limit > 0:
            raise ValueError("power_limit must be > 0")
        if not 2.0 <= self.v_min < self.v_max <= 4.5:
            raise ValueError("need 2.0 <= v_min < v_max <= 4.5")
        if self.substeps < 1 or self.max_sweeps < 1 or not self.step_fractions:
            raise ValueError("substeps, max_sweeps and step_fractions must be positive")


class _Search:
    """Incumbent schedule with cached hour-boundary states."""

    def __init__(self, model: SpmModel, state: SpmCellState, prices, config: ObjectiveConfig,
                 search: SearchConfig):
        self.m = model
        self.state = state
        self.prices = prices
        self.cfg = config
        self.sc = search
        self.dt = 3600.0 / search.substeps
        self.lost_idx = 2 * model.params.n_shells + 2
        self.kappa = config.degradation_price / 1000.0
        self.soc_required = -np.inf
        lam = max(float(prices.max()), 0.0)
        self.penalty_per_soc = search.terminal_penalty * lam * model.params.nominal_energy_wh * EUR_PER_WH_MWH

    def rollout_from(self, t, powers, states, energy):
        """Re-simulate hours t.. into ``states``/``energy``; returns fault."""
        v = states[t].copy()
        m = self.m
        fault, _ = K.rollout(v, powers[t:], self.sc.substeps, self.dt, self.sc.v_min, self.sc.v_max,
                             m.pvec, m.geo_n, m.geo_p, m.tables, states[t:], energy[t:])
        return fault

    def score(self, states, energy, penalised=True):
        revenue = float(np.dot(energy, self.prices)) * EUR_PER_WH_MWH
        lost = float(states[-1, self.lost_idx] - states[0, self.lost_idx])
        obj = self.cfg.combine(revenue, self.kappa * lost)
        if penalised:
            short = self.soc_required - self.m.soc(SpmCellState(states[-1]))
            if short > 0:
                obj -= self.cfg.theta * self.penalty_per_soc * short
        return obj

    def full(self, powers):
        """(fault, states, energy) for a complete rollout of ``powers``."""
        states = np.empty((powers.size + 1, self.state.vector.size))
        states[0] = self.state.vector
        energy = np.zeros(powers.size)
        return self.rollout_from(0, powers, states, energy), states, energy

    def descend(self, x0):
        """Projected coordinate descent from ``x0``; returns (x, J)."""
        x = np.clip(np.asarray(x0, dtype=float), -self.sc.power_limit, self.sc.power_limit)
        fault, states, energy = self.full(x)
        if fault != K.OK:
            return None, -np.inf
        best = self.score(states, energy)
        H = x.size
        cand_states = states.copy()
        cand_energy = energy.copy()
        for frac in self.sc.step_fractions:
            delta = frac * self.sc.power_limit
            for _ in range(self.sc.max_sweeps):
                improved = False
                for t in range(H):
                    old = x[t]
                    for sign in (1.0, -1.0):
                        new = min(max(old + sign * delta, -self.sc.power_limit), self.sc.power_limit)
                        if new == old:
                            continue
                        x[t] = new
                        cand_states[t] = states[t]
                        if self.rollout_from(t, x, cand_states, cand_energy) == K.OK:
                            J = self.score(cand_states, cand_energy)
                            if J > best + self.sc.min_gain:
                                best = J
                                states[t:] = cand_states[t:]
                                energy[t:] = cand_energy[t:]
                                improved = True
                                break
                        x[t] = old
                if not improved:
                    break
        return x, best


def seed_from_linear(prices, model: SpmModel, state: SpmCellState, config: ObjectiveConfig,
                     power_limit=10.0):
    """Linear-model optimum used as the first start of the search."""
    p = model.params
    lm = LinearCellParams(nominal_energy=p.nominal_energy_wh, power_limit=power_limit)
    soc = min(max(float(model.soc(state)), 0.0), 1.0)
    return optimize_linear(prices, lm, config, soc)


def optimize_pbm(prices, params, config: ObjectiveConfig, initial_state: SpmCellState,
                 seed_schedule=None, search: SearchConfig = SearchConfig(), start_time=None):
    """Local improvement of ``seed_schedule`` under the SPM rollout objective.

    ``params`` is an SpmParams or a ready SpmModel. Starts from the seed
    (the linear-model optimum when omitted) and from the zero schedule and
    returns the better result. With ``config.terminal_soc`` a final SoC
    below min(initial, seed end, idle end) is penalised at a price above
    any sale in the window; the returned objective is the plain one and is
    never below the seed's.
    """
    model = params if isinstance(params, SpmModel) else SpmModel(params)
    if isinstance(prices, PricePeriodSeries):
        start_time = prices.start_time
        lam = prices.prices
    else:
        lam = np.asarray(prices, dtype=float)
    if seed_schedule is None:
        seed_schedule = seed_from_linear(lam, model, initial_state, config, search.power_limit)
    seed = np.asarray(getattr(seed_schedule, "powers", seed_schedule), dtype=float)
    if seed.shape != lam.shape:
        raise ValueError("seed schedule and prices differ in length")
    zero = np.zeros_like(seed)

    s = _Search(model, initial_state, lam, config, search)
    if config.terminal_soc:
        ends = [model.soc(initial_state)]
        for x in (seed, zero):
            fault, states, _ = s.full(np.clip(x, -search.power_limit, search.power_limit))
            if fault == K.OK:
                ends.append(model.soc(SpmCellState(states[-1])))
        s.soc_required = min(ends)

    best_x, best_J = None, -np.inf
    for x0 in (seed, zero):
        x, J = s.descend(x0)
        if x is not None and J > best_J:
            best_x, best_J = x, J
    if best_x is None:
        raise RuntimeError("no start of the search could be simulated")
    rollout = SpmRollout(model, initial_state, search.v_min, search.v_max, search.substeps)
    return make_schedule(start_time, best_x, lam, rollout, config)
