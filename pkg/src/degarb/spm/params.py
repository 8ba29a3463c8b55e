"""SPM parameter packs: physical constants, OCV tables and their loaders.

A pack is a directory holding an INI file of key-value parameters plus the
half-cell open-circuit curves as two-column CSV files
(``stoichiometry,potential_V``). The default pack ships with the package.
"""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernel as K

OCV_HEADER = ("stoichiometry", "potential_V")
ENTROPIC_HEADER = ("soc", "dUdT_V_per_K")


class PackError(ValueError):
    """A parameter pack is malformed or violates a physical invariant."""


def read_table(path, header=OCV_HEADER):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(h.strip() for h in rows[0]) != header:
        raise PackError(f"{path}: expected header {','.join(header)}")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float)
    except ValueError as exc:
        raise PackError(f"{path}: {exc}") from exc
    if data.shape[0] < 2:
        raise PackError(f"{path}: need at least two rows")
    return data[:, 0].copy(), data[:, 1].copy()


def write_table(path, xs, ys, header=OCV_HEADER):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x, y in zip(xs, ys):
            w.writerow([repr(float(x)), repr(float(y))])


@dataclass(frozen=True, eq=False)
class OcvCurve:
    """Tabulated half-cell potentials, interpolated linearly (monotone)."""

    x_n: np.ndarray
    u_n: np.ndarray
    y_p: np.ndarray
    u_p: np.ndarray
    entropic_soc: np.ndarray = field(default_factory=lambda: np.zeros(0))
    entropic_dudt: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name in ("x_n", "y_p", "entropic_soc"):
            xs = getattr(self, name)
            if xs.size and np.any(np.diff(xs) <= 0):
                raise PackError(f"{name} grid must be strictly increasing")
        if np.any(np.diff(self.u_p) > 0):
            raise PackError("positive electrode potential must be non-increasing in stoichiometry")
        if self.entropic_soc.size != self.entropic_dudt.size:
            raise PackError("entropic table columns differ in length")

    def negative(self, x):
        return np.interp(x, self.x_n, self.u_n)

    def positive(self, y):
        return np.interp(y, self.y_p, self.u_p)

    def tables(self):
        return (
            np.ascontiguousarray(self.x_n, dtype=np.float64),
            np.ascontiguousarray(self.u_n, dtype=np.float64),
            np.ascontiguousarray(self.y_p, dtype=np.float64),
            np.ascontiguousarray(self.u_p, dtype=np.float64),
            np.ascontiguousarray(self.entropic_soc, dtype=np.float64),
            np.ascontiguousarray(self.entropic_dudt, dtype=np.float64),
        )


# INI section for every scalar field; fields not listed are not scalars
_SECTIONS = {
    "negative": (
        "radius_n", "diffusion_ref_n", "e_diffusion_n", "rate_ref_n", "e_rate_n",
        "c_max_n", "a_n", "area_n", "thickness_n", "x_n_0", "x_n_100",
    ),
    "positive": (
        "radius_p", "diffusion_ref_p", "e_diffusion_p", "rate_ref_p", "e_rate_p",
        "c_max_p", "a_p", "area_p", "thickness_p", "y_p_0", "y_p_100",
    ),
    "cell": (
        "c_e", "alpha", "t_ref", "r_tot", "nominal_voltage", "nominal_capacity_ah",
        "nominal_energy_wh", "rated_current", "n_shells",
    ),
    "thermal": ("rho", "heat_capacity", "cell_area", "cell_thickness", "h_conv", "t_env"),
    "sei": (
        "beta3", "alpha_sei", "e_k_sei", "d_sei_ref", "e_d_sei", "c_sei",
        "molar_volume_sei", "u_sei", "delta_sei_0",
    ),
    "guards": ("t_min", "t_max", "v_hard_min", "v_hard_max"),
}


@dataclass(frozen=True, eq=False)
class SpmParams:
    """Single particle model parameters (SI units, energies in Wh).

    ``rate_ref_*`` is scaled so that the exchange density from
    ``F * k * c^alpha * c_e^(1-alpha) * (c_max - c)^(1-alpha)`` comes out as
    a molar flux [mol m^-2 s^-1], the same unit as the intercalation flux.
    ``beta3`` is a current density [A m^-2]; ``u_sei`` is the equilibrium
    potential of the SEI side reaction versus Li [V].
    """

    ocv: OcvCurve
    radius_n: float
    radius_p: float
    diffusion_ref_n: float
    diffusion_ref_p: float
    e_diffusion_n: float
    e_diffusion_p: float
    rate_ref_n: float
    rate_ref_p: float
    e_rate_n: float
    e_rate_p: float
    c_max_n: float
    c_max_p: float
    a_n: float
    a_p: float
    area_n: float
    area_p: float
    thickness_n: float
    thickness_p: float
    x_n_0: float
    x_n_100: float
    y_p_0: float
    y_p_100: float
    c_e: float = 1000.0
    alpha: float = 0.5
    t_ref: float = 298.15
    r_tot: float = 0.02
    nominal_voltage: float = 3.7
    nominal_capacity_ah: float = 2.7
    nominal_energy_wh: float = 10.0
    rated_current: float = 5.4
    n_shells: int = 30
    rho: float = 2500.0
    heat_capacity: float = 1000.0
    cell_area: float = 0.01
    cell_thickness: float = 0.002
    h_conv: float = 10.0
    t_env: float = 298.15
    beta3: float = 0.0
    alpha_sei: float = 0.5
    e_k_sei: float = 0.0
    d_sei_ref: float = 1e-19
    e_d_sei: float = 0.0
    c_sei: float = 4541.0
    molar_volume_sei: float = 9.585e-5
    u_sei: float = 0.4
    delta_sei_0: float = 5e-9
    t_min: float = 250.0
    t_max: float = 350.0
    v_hard_min: float = 2.0
    v_hard_max: float = 4.5

    def __post_init__(self):
        positive = (
            "radius_n", "radius_p", "diffusion_ref_n", "diffusion_ref_p", "rate_ref_n",
            "rate_ref_p", "c_max_n", "c_max_p", "a_n", "a_p", "area_n", "area_p",
            "thickness_n", "thickness_p", "c_e", "t_ref", "r_tot", "nominal_voltage",
            "nominal_capacity_ah", "nominal_energy_wh", "rated_current", "rho",
            "heat_capacity", "cell_area", "cell_thickness", "h_conv", "t_env", "d_sei_ref",
            "c_sei", "molar_volume_sei",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise PackError(f"{name} must be > 0")
        for name in ("e_diffusion_n", "e_diffusion_p", "e_rate_n", "e_rate_p", "beta3",
                     "e_k_sei", "e_d_sei", "delta_sei_0", "alpha_sei"):
            if getattr(self, name) < 0:
                raise PackError(f"{name} must be >= 0")
        if not 0 < self.alpha < 1:
            raise PackError("alpha must lie in (0, 1)")
        for name in ("x_n_0", "x_n_100", "y_p_0", "y_p_100"):
            if not 0 < getattr(self, name) < 1:
                raise PackError(f"{name} must lie in (0, 1)")
        if not self.x_n_0 < self.x_n_100 or not self.y_p_100 < self.y_p_0:
            raise PackError("stoichiometry windows are reversed")
        if self.n_shells < 3:
            raise PackError("n_shells must be >= 3")

    # derived geometry
    @property
    def surface_n(self):
        return self.a_n * self.area_n * self.thickness_n

    @property
    def surface_p(self):
        return self.a_p * self.area_p * self.thickness_p

    @property
    def solid_volume_n(self):
        return self.surface_n * self.radius_n / 3.0

    @property
    def solid_volume_p(self):
        return self.surface_p * self.radius_p / 3.0

    @property
    def one_c(self):
        return self.nominal_capacity_ah

    def full_ocv(self, soc):
        """Equilibrium cell voltage at uniform concentrations for the given SoC."""
        soc = np.asarray(soc, dtype=float)
        x = self.x_n_0 + soc * (self.x_n_100 - self.x_n_0)
        y = self.y_p_0 - soc * (self.y_p_0 - self.y_p_100)
        return self.ocv.positive(y) - self.ocv.negative(x)

    def without_sei(self):
        return replace(self, beta3=0.0)

    def vector(self):
        """Pack into the flat array consumed by :mod:`degarb.spm.kernel`."""
        p = np.zeros(K.NPARAM)
        p[K.P_R_N] = self.radius_n
        p[K.P_R_P] = self.radius_p
        p[K.P_DREF_N] = self.diffusion_ref_n
        p[K.P_DREF_P] = self.diffusion_ref_p
        p[K.P_ED_N] = self.e_diffusion_n
        p[K.P_ED_P] = self.e_diffusion_p
        p[K.P_KREF_N] = self.rate_ref_n
        p[K.P_KREF_P] = self.rate_ref_p
        p[K.P_EK_N] = self.e_rate_n
        p[K.P_EK_P] = self.e_rate_p
        p[K.P_CMAX_N] = self.c_max_n
        p[K.P_CMAX_P] = self.c_max_p
        p[K.P_S_N] = self.surface_n
        p[K.P_S_P] = self.surface_p
        p[K.P_CE] = self.c_e
        p[K.P_ALPHA] = self.alpha
        p[K.P_TREF] = self.t_ref
        p[K.P_RTOT] = self.r_tot
        p[K.P_CTH] = self.rho * self.cell_area * self.cell_thickness * self.heat_capacity
        p[K.P_HA] = self.h_conv * self.cell_area
        p[K.P_TENV] = self.t_env
        p[K.P_BETA3] = self.beta3
        p[K.P_ALPHA_SEI] = self.alpha_sei
        p[K.P_DSEI_REF] = self.d_sei_ref
        p[K.P_ED_SEI] = self.e_d_sei
        p[K.P_EK_SEI] = self.e_k_sei
        p[K.P_CSEI] = self.c_sei
        p[K.P_VM_SEI] = self.molar_volume_sei
        p[K.P_U_SEI] = self.u_sei
        p[K.P_VNOM] = self.nominal_voltage
        p[K.P_X0] = self.x_n_0
        p[K.P_X100] = self.x_n_100
        p[K.P_Y0] = self.y_p_0
        p[K.P_Y100] = self.y_p_100
        p[K.P_VSOL_N] = self.solid_volume_n
        p[K.P_VSOL_P] = self.solid_volume_p
        p[K.P_T_LO] = self.t_min
        p[K.P_T_HI] = self.t_max
        p[K.P_V_LO] = self.v_hard_min
        p[K.P_V_HI] = self.v_hard_max
        return p


def _scalar_names():
    return [f.name for f in fields(SpmParams) if f.name != "ocv"]


def load_pack(path=None, **overrides) -> SpmParams:
    """Load a parameter pack directory (or its INI file); default pack if None."""
    if path is None:
        with resources.as_file(resources.files("degarb.spm") / "data" / "nmc_graphite.ini") as p:
            return load_pack(p, **overrides)
    path = Path(path)
    ini = path if path.is_file() else path / "pack.ini"
    cfg = configparser.ConfigParser()
    if not cfg.read(ini):
        raise PackError(f"cannot read parameter pack {ini}")
    values = {}
    known = set(_scalar_names())
    for section in cfg.sections():
        if section == "ocv":
            continue
        for key, raw in cfg.items(section):
            if key not in known:
                raise PackError(f"{ini}: unknown parameter {section}.{key}")
            try:
                values[key] = int(raw) if key == "n_shells" else float(raw)
            except ValueError as exc:
                raise PackError(f"{ini}: {section}.{key}: {exc}") from exc
    if "ocv" not in cfg:
        raise PackError(f"{ini}: missing [ocv] section")
    base = ini.parent
    x_n, u_n = read_table(base / cfg["ocv"]["negative"])
    y_p, u_p = read_table(base / cfg["ocv"]["positive"])
    ent = cfg["ocv"].get("entropic")
    if ent:
        es, ed = read_table(base / ent, ENTROPIC_HEADER)
    else:
        es, ed = np.zeros(0), np.zeros(0)
    values.update(overrides)
    try:
        params = SpmParams(ocv=OcvCurve(x_n, u_n, y_p, u_p, es, ed), **values)
    except TypeError as exc:
        raise PackError(f"{ini}: {exc}") from exc
    check_ocv_window(params)
    return params


def check_ocv_window(params: SpmParams, tol=0.05):
    """Full-cell OCV must rise strictly with SoC and span roughly 2.7-4.2 V."""
    v = params.full_ocv(np.linspace(0.0, 1.0, 401))
    if np.any(np.diff(v) <= 0):
        raise PackError("full-cell OCV is not strictly increasing in SoC")
    if abs(v[0] - 2.7) > tol or abs(v[-1] - 4.2) > tol:
        raise PackError(f"full-cell OCV spans {v[0]:.3f}-{v[-1]:.3f} V, expected about 2.7-4.2 V")


def write_pack(params: SpmParams, directory, name="pack.ini"):
    """Write ``params`` as a pack directory; returns the INI path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    cfg = configparser.ConfigParser()
    for section, keys in _SECTIONS.items():
        cfg[section] = {k: repr(getattr(params, k)) for k in keys}
    cfg["ocv"] = {"negative": "ocv_negative.csv", "positive": "ocv_positive.csv"}
    write_table(directory / "ocv_negative.csv", params.ocv.x_n, params.ocv.u_n)
    write_table(directory / "ocv_positive.csv", params.ocv.y_p, params.ocv.u_p)
    if params.ocv.entropic_soc.size:
        cfg["ocv"]["entropic"] = "entropic.csv"
        write_table(directory / "entropic.csv", params.ocv.entropic_soc,
                    params.ocv.entropic_dudt, ENTROPIC_HEADER)
    ini = directory / name
    with open(ini, "w") as fh:
        cfg.write(fh)
    return ini
