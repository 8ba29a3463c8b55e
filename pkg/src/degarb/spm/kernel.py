"""Compiled core of the single particle model.

Everything that runs inside a time loop lives here as ``numba.njit``
functions operating on flat float arrays, so that rollouts of a full year
(or thousands of candidate schedules inside the optimizer) stay cheap.
The public, dataclass-based API in :mod:`degarb.spm.cell` wraps these.

State vector layout (length ``2N + 4``)::

    [c_n(0..N-1), c_p(0..N-1), T, delta_sei, capacity_lost_wh, throughput_ah]

Sign conventions: current ``I > 0`` discharges the cell. Particle fluxes
are insertion fluxes (mol m^-2 s^-1, positive = lithium entering the
particle), so on discharge the anode flux is negative and the cathode flux
positive.
"""

import math

import numpy as np
from numba import njit

FARADAY = 96485.33212
GAS_CONSTANT = 8.314462618

# parameter vector indices
P_R_N = 0
P_R_P = 1
P_DREF_N = 2
P_DREF_P = 3
P_ED_N = 4
P_ED_P = 5
P_KREF_N = 6
P_KREF_P = 7
P_EK_N = 8
P_EK_P = 9
P_CMAX_N = 10
P_CMAX_P = 11
P_S_N = 12  # total particle surface a_n * A_n * tau_n  [m^2]
P_S_P = 13
P_CE = 14
P_ALPHA = 15
P_TREF = 16
P_RTOT = 17
P_CTH = 18  # lumped heat capacity rho * A * tau * C_p  [J/K]
P_HA = 19  # h * A  [W/K]
P_TENV = 20
P_BETA3 = 21
P_ALPHA_SEI = 22
P_DSEI_REF = 23
P_ED_SEI = 24
P_EK_SEI = 25
P_CSEI = 26
P_VM_SEI = 27
P_U_SEI = 28
P_VNOM = 29
P_X0 = 30
P_X100 = 31
P_Y0 = 32
P_Y100 = 33
P_VSOL_N = 34  # solid volume of the electrode  [m^3]
P_VSOL_P = 35
P_T_LO = 36
P_T_HI = 37
P_V_LO = 38
P_V_HI = 39
NPARAM = 40

# fault codes
OK = 0
FAULT_SATURATION = 1
FAULT_KINETICS = 2
FAULT_THERMAL = 3
FAULT_VOLTAGE = 4
FAULT_POWER = 5

# log columns written by the run kernels
L_CURRENT = 0
L_VOLTAGE = 1
L_TEMPERATURE = 2
L_POWER = 3
L_CLAMPED = 4
NLOG = 5


# ---------------------------------------------------------------------------
# scalar physics


@njit(cache=True)
def arrhenius(ref_value, activation_energy, T, T_ref):
    """Arrhenius scaling, increasing with T for positive activation energy."""
    return ref_value * math.exp(-(activation_energy / GAS_CONSTANT) * (1.0 / T - 1.0 / T_ref))


@njit(cache=True)
def exchange_flux(c_surf, c_max, c_e, k, alpha):
    # n = 1 electron per reaction
    if c_surf <= 0.0 or c_surf >= c_max:
        return 0.0
    return FARADAY * k * c_surf**alpha * c_e ** (1.0 - alpha) * (c_max - c_surf) ** (1.0 - alpha)


@njit(cache=True)
def bv_flux(eta, j0, T, alpha):
    f = FARADAY / (GAS_CONSTANT * T)
    return j0 * (math.exp(-alpha * f * eta) - math.exp((1.0 - alpha) * f * eta))


@njit(cache=True)
def bv_overpotential(j, j0, T, alpha):
    """Invert the Butler-Volmer relation for the overpotential."""
    f = FARADAY / (GAS_CONSTANT * T)
    if alpha == 0.5:
        return -(2.0 / f) * math.asinh(j / (2.0 * j0))
    # bv_flux is strictly decreasing in eta: bracket then bisect
    lo = -1.0
    hi = 1.0
    while bv_flux(lo, j0, T, alpha) < j:
        lo *= 2.0
    while bv_flux(hi, j0, T, alpha) > j:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if bv_flux(mid, j0, T, alpha) > j:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


@njit(cache=True)
def sei_flux(eta_sei, delta, T, beta3, alpha_sei, d_sei, c_sei):
    """Series kinetic/diffusion-limited SEI side-reaction flux (>= 0)."""
    j_kin = (beta3 / FARADAY) * math.exp(-alpha_sei * FARADAY * eta_sei / (GAS_CONSTANT * T))
    if j_kin == 0.0:
        return 0.0
    return j_kin / (1.0 + j_kin * delta / (d_sei * c_sei))


@njit(cache=True)
def thermal_update(T, I, eta_n, eta_p, dudt, dt, R_tot, C_th, hA, T_env):
    """Exact integration of the lumped energy balance over dt.

    The right-hand side is affine in T (the reversible term carries T), so
    the step is closed-form and unconditionally stable.
    """
    q0 = I * I * R_tot + I * (eta_n - eta_p)
    a = (I * dudt - hA) / C_th
    b = (q0 + hA * T_env) / C_th
    if a == 0.0:
        return T + b * dt
    return T * math.exp(a * dt) + (b / a) * math.expm1(a * dt)


# ---------------------------------------------------------------------------
# radial diffusion


def shell_geometry(radius, n_shells):
    """Equal-volume shell geometry as a (4, N+1) array.

    Rows: shell volumes, face areas (r_0 .. r_N), centre-to-centre
    distances, and in ``[3, 0]`` the distance from the outermost centre to
    the particle surface.
    """
    k = np.arange(n_shells + 1, dtype=np.float64)
    faces = radius * (k / n_shells) ** (1.0 / 3.0)
    centres = 0.5 * (faces[:-1] + faces[1:])
    geo = np.zeros((4, n_shells + 1))
    geo[0, :n_shells] = (4.0 / 3.0) * math.pi * (faces[1:] ** 3 - faces[:-1] ** 3)
    geo[1, :] = 4.0 * math.pi * faces**2
    geo[2, : n_shells - 1] = np.diff(centres)
    geo[3, 0] = radius - centres[-1]
    return geo


@njit(cache=True)
def diffusion_solve(c, D, dt, geo, x_free, x_unit, scratch):
    """Backward-Euler finite-volume step, split into two solutions.

    Fills ``x_free`` with the new profile under zero surface flux and
    ``x_unit`` with the response to a unit surface insertion flux, so the
    profile for flux j is ``x_free + j * x_unit`` (the step is affine in j).
    """
    n = c.shape[0]
    lower = scratch[0]
    diag = scratch[1]
    upper = scratch[2]
    for k in range(n):
        vk = geo[0, k] / dt
        d = vk
        lo = 0.0
        up = 0.0
        if k > 0:
            lo = -D * geo[1, k] / geo[2, k - 1]
            d -= lo
        if k < n - 1:
            up = -D * geo[1, k + 1] / geo[2, k]
            d -= up
        lower[k] = lo
        diag[k] = d
        upper[k] = up
        x_free[k] = vk * c[k]
        x_unit[k] = 0.0
    x_unit[n - 1] = geo[1, n]
    # Thomas algorithm, two right-hand sides
    cp = scratch[3]
    cp[0] = upper[0] / diag[0]
    x_free[0] = x_free[0] / diag[0]
    x_unit[0] = x_unit[0] / diag[0]
    for k in range(1, n):
        m = diag[k] - lower[k] * cp[k - 1]
        cp[k] = upper[k] / m
        x_free[k] = (x_free[k] - lower[k] * x_free[k - 1]) / m
        x_unit[k] = (x_unit[k] - lower[k] * x_unit[k - 1]) / m
    for k in range(n - 2, -1, -1):
        x_free[k] -= cp[k] * x_free[k + 1]
        x_unit[k] -= cp[k] * x_unit[k + 1]


@njit(cache=True)
def surface_conc(c_last, flux, D, geo):
    return c_last + flux * geo[3, 0] / D


@njit(cache=True)
def total_moles(c, geo):
    s = 0.0
    for k in range(c.shape[0]):
        s += c[k] * geo[0, k]
    return s


# ---------------------------------------------------------------------------
# coupled step


@njit(cache=True)
def interp_table(x, xs, ys):
    """Piecewise-linear lookup, constant beyond the ends (like np.interp)."""
    m = xs.shape[0]
    if x <= xs[0]:
        return ys[0]
    if x >= xs[m - 1]:
        return ys[m - 1]
    lo = 0
    hi = m - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if xs[mid] <= x:
            lo = mid
        else:
            hi = mid
    w = (x - xs[lo]) / (xs[hi] - xs[lo])
    return ys[lo] + w * (ys[hi] - ys[lo])


@njit(cache=True)
def entropic(x_surf_n, params, ent_soc, ent_dudt):
    if ent_soc.shape[0] == 0:
        return 0.0
    soc = (x_surf_n - params[P_X0]) / (params[P_X100] - params[P_X0])
    return interp_table(soc, ent_soc, ent_dudt)


@njit(cache=True)
def open_circuit(xs_n, ys_p, T, params, tables):
    """Full-cell open-circuit voltage at the given surface stoichiometries."""
    un = interp_table(xs_n, tables[0], tables[1])
    up = interp_table(ys_p, tables[2], tables[3])
    dudt = entropic(xs_n, params, tables[4], tables[5])
    return up - un + (T - params[P_TREF]) * dudt


# rows 0-3 of the step buffer hold the affine diffusion solutions, 4-7 scratch
NBUF = 8

# per-step context slots (current-independent quantities)
C_DN = 0
C_DP = 1
C_J0N = 2
C_J0P = 3
C_BETA3 = 4
C_DSEI = 5
C_UN0 = 6
NCTX = 7


@njit(cache=True)
def prepare(state, dt, params, geo_n, geo_p, tables, buf, ctx):
    """Fill ``buf`` (NBUF, N) with the affine diffusion solutions and ``ctx``
    with the current-independent scalars of this step. Returns a fault code.
    """
    n = (state.shape[0] - 4) // 2
    T = state[2 * n]
    Tref = params[P_TREF]
    D_n = arrhenius(params[P_DREF_N], params[P_ED_N], T, Tref)
    D_p = arrhenius(params[P_DREF_P], params[P_ED_P], T, Tref)
    k_n = arrhenius(params[P_KREF_N], params[P_EK_N], T, Tref)
    k_p = arrhenius(params[P_KREF_P], params[P_EK_P], T, Tref)
    diffusion_solve(state[:n], D_n, dt, geo_n, buf[0], buf[1], buf[4:8])
    diffusion_solve(state[n : 2 * n], D_p, dt, geo_p, buf[2], buf[3], buf[4:8])
    # exchange densities use the outermost shell value at the start of the step
    cs_n = state[n - 1]
    cs_p = state[2 * n - 1]
    ctx[C_DN] = D_n
    ctx[C_DP] = D_p
    ctx[C_J0N] = exchange_flux(cs_n, params[P_CMAX_N], params[P_CE], k_n, params[P_ALPHA])
    ctx[C_J0P] = exchange_flux(cs_p, params[P_CMAX_P], params[P_CE], k_p, params[P_ALPHA])
    ctx[C_BETA3] = arrhenius(params[P_BETA3], params[P_EK_SEI], T, Tref)
    ctx[C_DSEI] = arrhenius(params[P_DSEI_REF], params[P_ED_SEI], T, Tref)
    ctx[C_UN0] = interp_table(cs_n / params[P_CMAX_N], tables[0], tables[1])
    if ctx[C_J0N] <= 0.0 or ctx[C_J0P] <= 0.0:
        return FAULT_KINETICS
    return OK


@njit(cache=True)
def evaluate(I, state, params, geo_n, geo_p, tables, buf, ctx):
    """Terminal voltage at the end of a step carrying current I.

    Returns (V, eta_n, eta_p, j_sei, xs_n, ys_p).
    """
    n = (state.shape[0] - 4) // 2
    T = state[2 * n]
    alpha = params[P_ALPHA]
    j_n = -I / (FARADAY * params[P_S_N])
    j_p = I / (FARADAY * params[P_S_P])
    eta_n = bv_overpotential(j_n, ctx[C_J0N], T, alpha)
    eta_p = bv_overpotential(j_p, ctx[C_J0P], T, alpha)
    j_sei = 0.0
    if ctx[C_BETA3] > 0.0:
        eta_sei = ctx[C_UN0] + eta_n - params[P_U_SEI]
        j_sei = sei_flux(eta_sei, state[2 * n + 1], T, ctx[C_BETA3], params[P_ALPHA_SEI],
                         ctx[C_DSEI], params[P_CSEI])
    flux_n = j_n - j_sei
    c_last_n = buf[0, n - 1] + flux_n * buf[1, n - 1]
    c_last_p = buf[2, n - 1] + j_p * buf[3, n - 1]
    xs_n = surface_conc(c_last_n, flux_n, ctx[C_DN], geo_n) / params[P_CMAX_N]
    ys_p = surface_conc(c_last_p, j_p, ctx[C_DP], geo_p) / params[P_CMAX_P]
    V = open_circuit(xs_n, ys_p, T, params, tables) - (eta_n - eta_p) - I * params[P_RTOT]
    return V, eta_n, eta_p, j_sei, xs_n, ys_p


@njit(cache=True)
def commit(I, dt, state, params, tables, buf, eta_n, eta_p, j_sei, xs_n, ys_p, V):
    """Write the stepped state into ``state`` in place; returns a fault code."""
    n = (state.shape[0] - 4) // 2
    j_n = -I / (FARADAY * params[P_S_N])
    j_p = I / (FARADAY * params[P_S_P])
    flux_n = j_n - j_sei
    cmax_n = params[P_CMAX_N]
    cmax_p = params[P_CMAX_P]
    fault = OK
    for k in range(n):
        cn = buf[0, k] + flux_n * buf[1, k]
        cp = buf[2, k] + j_p * buf[3, k]
        if cn < 0.0 or cn > cmax_n or cp < 0.0 or cp > cmax_p:
            fault = FAULT_SATURATION
        state[k] = cn
        state[n + k] = cp
    if xs_n <= 0.0 or xs_n >= 1.0 or ys_p <= 0.0 or ys_p >= 1.0:
        fault = FAULT_SATURATION
    T = state[2 * n]
    dudt = entropic(xs_n, params, tables[4], tables[5])
    T_new = thermal_update(
        T, I, eta_n, eta_p, dudt, dt, params[P_RTOT], params[P_CTH], params[P_HA], params[P_TENV]
    )
    state[2 * n] = T_new
    if T_new < params[P_T_LO] or T_new > params[P_T_HI]:
        fault = FAULT_THERMAL
    state[2 * n + 1] += j_sei * params[P_VM_SEI] * dt
    state[2 * n + 2] += params[P_VNOM] * j_sei * FARADAY * params[P_S_N] * dt / 3600.0
    state[2 * n + 3] += abs(I) * dt / 3600.0
    if fault == OK and (V < params[P_V_LO] or V > params[P_V_HI]):
        fault = FAULT_VOLTAGE
    return fault


@njit(cache=True)
def current_for_power(P, state, params, geo_n, geo_p, tables, buf, ctx):
    """Solve I * V(I) = P by the secant method; returns (I, ok)."""
    if P == 0.0:
        return 0.0, True
    v0 = evaluate(0.0, state, params, geo_n, geo_p, tables, buf, ctx)[0]
    if v0 <= 0.0:
        return 0.0, False
    I0 = P / v0
    V = evaluate(I0, state, params, geo_n, geo_p, tables, buf, ctx)[0]
    g0 = I0 * V - P
    I1 = P / V
    for _ in range(50):
        V = evaluate(I1, state, params, geo_n, geo_p, tables, buf, ctx)[0]
        if not math.isfinite(V) or V <= 0.0:
            return I1, False
        g1 = I1 * V - P
        if abs(g1) <= 1e-13 * abs(P) or g1 == g0:
            return I1, abs(g1) <= 1e-9 * abs(P)
        I2 = I1 - g1 * (I1 - I0) / (g1 - g0)
        I0 = I1
        g0 = g1
        I1 = I2
    return I1, False


@njit(cache=True)
def clamp_current(I, v_min, v_max, state, params, geo_n, geo_p, tables, buf, ctx):
    """Reduce |I| so the end-of-step voltage stays inside [v_min, v_max].

    The one-step voltage map is decreasing in I, so the limit current is
    found by bisection between the commanded current and zero. Returns
    (I_clamped, clamped_flag).
    """
    V = evaluate(I, state, params, geo_n, geo_p, tables, buf, ctx)[0]
    if V > v_max and I < 0.0:
        target = v_max
    elif V < v_min and I > 0.0:
        target = v_min
    else:
        return I, False
    v_rest = evaluate(0.0, state, params, geo_n, geo_p, tables, buf, ctx)[0]
    if (target == v_max and v_rest >= v_max) or (target == v_min and v_rest <= v_min):
        return 0.0, True
    lo = I
    hi = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        Vm = evaluate(mid, state, params, geo_n, geo_p, tables, buf, ctx)[0]
        # keep `lo` on the violating side, `hi` on the admissible side
        if (target == v_max and Vm > v_max) or (target == v_min and Vm < v_min):
            lo = mid
        else:
            hi = mid
            if abs(Vm - target) < 1e-7:
                break
        if abs(hi - lo) <= 1e-13 * max(1.0, abs(I)):
            break
    return hi, True


@njit(cache=True)
def step(state, mode, value, dt, v_min, v_max, clamp, params, geo_n, geo_p, tables, buf, ctx):
    """Advance ``state`` in place by one step.

    ``mode`` 0 commands power ``value`` [W], mode 1 commands current [A].
    Returns (fault, I, V, T, P_delivered, clamped).
    """
    n = (state.shape[0] - 4) // 2
    fault = prepare(state, dt, params, geo_n, geo_p, tables, buf, ctx)
    if fault != OK:
        return fault, 0.0, 0.0, state[2 * n], 0.0, False
    if mode == 0:
        I, ok = current_for_power(value, state, params, geo_n, geo_p, tables, buf, ctx)
    else:
        I = value
        ok = True
    clamped = False
    if clamp:
        I, clamped = clamp_current(I, v_min, v_max, state, params, geo_n, geo_p, tables, buf, ctx)
    elif not ok:
        return FAULT_POWER, I, 0.0, state[2 * n], 0.0, False
    V, eta_n, eta_p, j_sei, xs_n, ys_p = evaluate(I, state, params, geo_n, geo_p, tables, buf, ctx)
    fault = commit(I, dt, state, params, tables, buf, eta_n, eta_p, j_sei, xs_n, ys_p, V)
    return fault, I, V, state[2 * n], I * V, clamped


# ---------------------------------------------------------------------------
# loops


@njit(cache=True)
def run_profile(state, mode, values, n_sub, dt, v_min, v_max, clamp, params, geo_n, geo_p, tables, log):
    """Apply each command in ``values`` for ``n_sub`` steps of ``dt``.

    Writes one log row per step into ``log`` (shape (len(values)*n_sub, NLOG)).
    Returns (fault, index of the faulting step or -1).
    """
    n = (state.shape[0] - 4) // 2
    buf = np.empty((NBUF, n))
    ctx = np.empty(NCTX)
    row = 0
    for h in range(values.shape[0]):
        for _ in range(n_sub):
            fault, I, V, T, P, clamped = step(
                state, mode, values[h], dt, v_min, v_max, clamp, params, geo_n, geo_p, tables, buf, ctx
            )
            log[row, L_CURRENT] = I
            log[row, L_VOLTAGE] = V
            log[row, L_TEMPERATURE] = T
            log[row, L_POWER] = P
            log[row, L_CLAMPED] = 1.0 if clamped else 0.0
            if fault != OK:
                return fault, row
            row += 1
    return OK, -1


@njit(cache=True)
def run_cccv(state, current, v_limit, cutoff, dt, max_steps, params, geo_n, geo_p, tables):
    """Constant current until the voltage limit, then constant voltage.

    Stops once the clamped current magnitude falls below ``cutoff``.
    Returns (fault, charge_ah, energy_wh, steps) with charge/energy signed
    like the current (positive when discharging).
    """
    n = (state.shape[0] - 4) // 2
    buf = np.empty((NBUF, n))
    ctx = np.empty(NCTX)
    v_lo = v_limit if current > 0.0 else -1e9
    v_hi = v_limit if current < 0.0 else 1e9
    charge = 0.0
    energy = 0.0
    for s in range(max_steps):
        fault, I, V, T, P, clamped = step(state, 1, current, dt, v_lo, v_hi, True, params, geo_n, geo_p, tables, buf, ctx)
        if fault != OK:
            return fault, charge, energy, s
        charge += I * dt / 3600.0
        energy += P * dt / 3600.0
        if clamped and abs(I) < cutoff:
            return OK, charge, energy, s + 1
    return OK, charge, energy, max_steps


@njit(cache=True)
def rollout(state, powers, n_sub, dt, v_min, v_max, params, geo_n, geo_p, tables, hour_states, hour_energy):
    """Clamped hourly power-profile rollout used by the trajectory optimizer.

    ``hour_states`` (H+1, L) receives the state at every hour boundary and
    ``hour_energy`` (H,) the energy delivered in each hour [Wh], positive
    when discharging. Returns (fault, index of the faulting hour or -1).
    """
    n = (state.shape[0] - 4) // 2
    buf = np.empty((NBUF, n))
    ctx = np.empty(NCTX)
    hour_states[0, :] = state
    for h in range(powers.shape[0]):
        e = 0.0
        for _ in range(n_sub):
            fault, I, V, T, P, clamped = step(
                state, 0, powers[h], dt, v_min, v_max, True, params, geo_n, geo_p, tables, buf, ctx
            )
            if fault != OK:
                return fault, h
            e += P * dt / 3600.0
        hour_energy[h] = e
        hour_states[h + 1, :] = state
    return OK, -1
