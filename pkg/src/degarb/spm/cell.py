"""Single particle model with lumped thermal dynamics and SEI growth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import (
    CellFault,
    KineticsStallFault,
    PowerFault,
    SaturationFault,
    ThermalFault,
    VoltageFault,
)
from . import kernel as K
from .params import SpmParams

_FAULTS = {
    K.FAULT_SATURATION: (SaturationFault, "electrode concentration saturated"),
    K.FAULT_KINETICS: (KineticsStallFault, "exchange current density vanished"),
    K.FAULT_THERMAL: (ThermalFault, "temperature outside guard window"),
    K.FAULT_VOLTAGE: (VoltageFault, "terminal voltage outside hard bounds"),
    K.FAULT_POWER: (PowerFault, "commanded power not deliverable"),
}


def raise_fault(code, step=None, timestamp=None):
    if code == K.OK:
        return
    cls, msg = _FAULTS.get(code, (CellFault, f"cell fault {code}"))
    where = f" at step {step}" if step is not None else ""
    raise cls(msg + where, step=step, timestamp=timestamp)


@dataclass(frozen=True, eq=False)
class SpmCellState:
    """Radial concentrations on the shell grid plus lumped scalars.

    ``vector`` holds ``[c_n, c_p, T, delta_sei, capacity_lost_wh,
    throughput_ah]``; the named properties are views into it.
    """

    vector: np.ndarray

    @property
    def n_shells(self):
        return (self.vector.shape[0] - 4) // 2

    @property
    def conc_n(self):
        return self.vector[: self.n_shells]

    @property
    def conc_p(self):
        return self.vector[self.n_shells : 2 * self.n_shells]

    @property
    def temperature(self):
        return float(self.vector[2 * self.n_shells])

    @property
    def delta_sei(self):
        return float(self.vector[2 * self.n_shells + 1])

    @property
    def capacity_lost(self):
        return float(self.vector[2 * self.n_shells + 2])

    @property
    def charge_throughput(self):
        return float(self.vector[2 * self.n_shells + 3])

    def copy(self):
        return SpmCellState(self.vector.copy())


class SpmModel:
    """Binds a parameter set to its compiled-kernel representation.

    Holds the flat parameter vector, OCV tables and shell geometry so that
    stepping does not rebuild them. Instances are immutable in practice and
    can be shared between threads; states are plain values.
    """

    def __init__(self, params: SpmParams):
        self.params = params
        self.pvec = params.vector()
        self.tables = params.ocv.tables()
        self.geo_n = K.shell_geometry(params.radius_n, params.n_shells)
        self.geo_p = K.shell_geometry(params.radius_p, params.n_shells)

    # -- construction -------------------------------------------------------
    def fresh_state(self, soc=0.5, temperature=None):
        p = self.params
        n = p.n_shells
        v = np.empty(2 * n + 4)
        v[:n] = (p.x_n_0 + soc * (p.x_n_100 - p.x_n_0)) * p.c_max_n
        v[n : 2 * n] = (p.y_p_0 - soc * (p.y_p_0 - p.y_p_100)) * p.c_max_p
        v[2 * n] = p.t_env if temperature is None else temperature
        v[2 * n + 1] = p.delta_sei_0
        v[2 * n + 2] = 0.0
        v[2 * n + 3] = 0.0
        return SpmCellState(v)

    # -- bookkeeping --------------------------------------------------------
    def lithium_moles(self, state):
        """Total cyclable lithium in both electrodes [mol]."""
        p = self.params
        n_part = p.surface_n / self.geo_n[1, -1]
        p_part = p.surface_p / self.geo_p[1, -1]
        return (K.total_moles(state.conc_n, self.geo_n) * n_part
                + K.total_moles(state.conc_p, self.geo_p) * p_part)

    def soc(self, state):
        """Affine map of the mean anode stoichiometry onto [0, 1]."""
        p = self.params
        x = K.total_moles(state.conc_n, self.geo_n) / (self.geo_n[0, : p.n_shells].sum() * p.c_max_n)
        return (x - p.x_n_0) / (p.x_n_100 - p.x_n_0)

    def ocv(self, state):
        """Open-circuit voltage from the current outermost-shell stoichiometries."""
        p = self.params
        return float(K.open_circuit(state.conc_n[-1] / p.c_max_n, state.conc_p[-1] / p.c_max_p,
                                    state.temperature, self.pvec, self.tables))

    # -- stepping -----------------------------------------------------------
    def step(self, state, current, dt):
        """One coupled step at constant current; returns (state', V)."""
        if abs(current) > self.params.rated_current:
            raise ValueError(f"|I|={abs(current):.3g} A exceeds rated current")
        if dt <= 0:
            raise ValueError("dt must be > 0")
        v = state.vector.copy()
        buf = np.empty((K.NBUF, self.params.n_shells))
        ctx = np.empty(K.NCTX)
        fault, I, V, T, P, _ = K.step(v, 1, float(current), float(dt), 0.0, 0.0, False,
                                      self.pvec, self.geo_n, self.geo_p, self.tables, buf, ctx)
        raise_fault(fault)
        return SpmCellState(v), V

    def run(self, state, values, dt, n_sub=1, mode="power", v_min=None, v_max=None):
        """Run a command sequence, each value held for ``n_sub`` steps of ``dt``.

        With ``v_min``/``v_max`` given, the voltage is clamped (constant-
        voltage hold) rather than faulting. Returns (state', log) where log
        columns follow ``kernel.L_*``. Raises a CellFault on model faults;
        the partial log is attached as ``fault.log`` and the state reached
        as ``fault.state``.
        """
        values = np.ascontiguousarray(values, dtype=np.float64)
        clamp = v_min is not None or v_max is not None
        lo = -1e9 if v_min is None else float(v_min)
        hi = 1e9 if v_max is None else float(v_max)
        v = state.vector.copy()
        log = np.zeros((values.shape[0] * n_sub, K.NLOG))
        fault, row = K.run_profile(v, 0 if mode == "power" else 1, values, int(n_sub), float(dt),
                                   lo, hi, clamp, self.pvec, self.geo_n, self.geo_p, self.tables, log)
        if fault != K.OK:
            try:
                raise_fault(fault, step=row)
            except CellFault as exc:
                exc.log = log[: row + 1]
                exc.state = SpmCellState(v)
                raise
        return SpmCellState(v), log

    def cccv(self, state, current, v_limit, cutoff, dt=30.0, max_hours=6.0):
        """CC phase at ``current`` then CV hold at ``v_limit`` until |I| < cutoff.

        Returns (state', charge_ah, energy_wh, duration_s).
        """
        v = state.vector.copy()
        max_steps = int(max_hours * 3600 / dt)
        fault, q, e, steps = K.run_cccv(v, float(current), float(v_limit), float(cutoff), float(dt),
                                        max_steps, self.pvec, self.geo_n, self.geo_p, self.tables)
        raise_fault(fault, step=steps)
        return SpmCellState(v), q, e, steps * dt


# ---------------------------------------------------------------------------
# operation-level functions


def arrhenius_scale(ref_value, activation_energy, T, T_ref):
    """Scale a rate constant to temperature T; rises with T when E > 0."""
    if T <= 0 or T_ref <= 0:
        raise ValueError("temperatures must be > 0")
    return K.arrhenius(float(ref_value), float(activation_energy), float(T), float(T_ref))


def exchange_current_density(surface_conc, params: SpmParams, T, electrode="n"):
    """Exchange density of one electrode as a molar flux [mol m^-2 s^-1]."""
    if electrode == "n":
        k_ref, e_k, c_max = params.rate_ref_n, params.e_rate_n, params.c_max_n
    else:
        k_ref, e_k, c_max = params.rate_ref_p, params.e_rate_p, params.c_max_p
    k = arrhenius_scale(k_ref, e_k, T, params.t_ref)
    j0 = K.exchange_flux(float(surface_conc), c_max, params.c_e, k, params.alpha)
    if j0 <= 0.0:
        raise KineticsStallFault(f"surface concentration {surface_conc} at a bound of [0, {c_max}]")
    return j0


def butler_volmer_overpotential(flux, exchange_density, T, alpha=0.5):
    """Overpotential [V] driving insertion flux ``flux`` at the given exchange density."""
    if exchange_density <= 0:
        raise ValueError("exchange density must be > 0")
    return K.bv_overpotential(float(flux), float(exchange_density), float(T), float(alpha))


def sei_flux(overpotential, sei_thickness, T, params: SpmParams):
    """SEI side-reaction flux [mol m^-2 s^-1] for the given reaction overpotential.

    Kinetic rate ``beta3/F * exp(-alpha_sei F eta / RT)`` in series with
    solvent diffusion through the film ``D_sei c_sei / delta``.
    """
    if sei_thickness < 0:
        raise ValueError("SEI thickness must be >= 0")
    beta3 = arrhenius_scale(params.beta3, params.e_k_sei, T, params.t_ref)
    d_sei = arrhenius_scale(params.d_sei_ref, params.e_d_sei, T, params.t_ref)
    return K.sei_flux(float(overpotential), float(sei_thickness), float(T), beta3,
                      params.alpha_sei, d_sei, params.c_sei)


def sei_apply(state: SpmCellState, j_sei, dt, params: SpmParams):
    """Book the lithium consumed by SEI growth over dt.

    Moves lithium out of the outermost anode shell (the augmented surface
    flux), grows the film and adds the nominal-voltage energy equivalent to
    ``capacity_lost``.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    v = state.vector.copy()
    n = state.n_shells
    geo = K.shell_geometry(params.radius_n, n)
    # particle-level flux through the surface into the last shell volume
    v[n - 1] -= j_sei * geo[1, -1] * dt / geo[0, n - 1]
    if v[n - 1] < 0:
        raise SaturationFault("SEI consumption emptied the anode surface shell")
    v[2 * n + 1] += j_sei * params.molar_volume_sei * dt
    v[2 * n + 2] += params.nominal_voltage * j_sei * K.FARADAY * params.surface_n * dt / 3600.0
    return SpmCellState(v)


def diffusion_step(state: SpmCellState, flux_n, flux_p, dt, params: SpmParams):
    """Advance both particle profiles by dt under the given surface insertion fluxes."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if not (np.isfinite(flux_n) and np.isfinite(flux_p)):
        raise ValueError("fluxes must be finite")
    n = state.n_shells
    v = state.vector.copy()
    T = state.temperature
    out = np.empty((6, n))
    for conc, flux, R, D_ref, E_D, c_max, offset in (
        (state.conc_n, flux_n, params.radius_n, params.diffusion_ref_n, params.e_diffusion_n, params.c_max_n, 0),
        (state.conc_p, flux_p, params.radius_p, params.diffusion_ref_p, params.e_diffusion_p, params.c_max_p, n),
    ):
        D = arrhenius_scale(D_ref, E_D, T, params.t_ref)
        geo = K.shell_geometry(R, n)
        K.diffusion_solve(np.ascontiguousarray(conc), D, float(dt), geo, out[0], out[1], out[2:6])
        new = out[0] + flux * out[1]
        if np.any(new < 0) or np.any(new > c_max):
            raise SaturationFault("concentration left [0, c_max] during diffusion")
        v[offset : offset + n] = new
    return SpmCellState(v)


def thermal_step(state: SpmCellState, current, overpotentials, dt, params: SpmParams, dudt=0.0):
    """Advance the lumped cell temperature by dt.

    ``overpotentials`` is ``(eta_n, eta_p)``; ``dudt`` is the entropic
    coefficient [V/K] at the present SoC.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    eta_n, eta_p = overpotentials
    c_th = params.rho * params.cell_area * params.cell_thickness * params.heat_capacity
    T = K.thermal_update(state.temperature, float(current), float(eta_n), float(eta_p), float(dudt),
                         float(dt), params.r_tot, c_th, params.h_conv * params.cell_area, params.t_env)
    if not params.t_min <= T <= params.t_max:
        raise ThermalFault(f"temperature {T:.1f} K outside [{params.t_min}, {params.t_max}]")
    v = state.vector.copy()
    v[2 * state.n_shells] = T
    return SpmCellState(v)


def spm_step(state: SpmCellState, current, dt, model: SpmModel):
    """One fully coupled step at constant current; returns (state', V)."""
    return model.step(state, current, dt)


def soc_estimate(state: SpmCellState, model: SpmModel):
    return float(model.soc(state))
