"""Study configuration (INI) and the four dispatch scenarios."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from datetime import datetime, timedelta
from pathlib import Path

from .errors import DataError
from .harness import CheckupProtocol, TesterLimits
from .linear_cell import LinearCellParams
from .optimizer.objective import ObjectiveConfig
from .optimizer.pbm import SearchConfig

# INI section of every StudyConfig field
_SECTIONS = {
    "cell": ("pack", "power_limit", "initial_soc", "profit_soc_min", "profit_soc_max"),
    "tester": ("v_min", "v_max", "profit_v_min", "profit_v_max", "log_minutes", "sim_minutes",
               "checkup_days", "count_checkup_fec"),
    "objective": ("degradation_price", "profit_theta", "horizon_hours", "commit_hours", "search_substeps"),
    "market": ("seed", "days", "start", "prices_csv"),
}


@dataclass(frozen=True)
class StudyConfig:
    pack: str = ""  # SPM parameter pack; empty selects the bundled one
    power_limit: float = 10.0  # W
    initial_soc: float = 0.5
    profit_soc_min: float = 0.1
    profit_soc_max: float = 0.9
    v_min: float = 2.7
    v_max: float = 4.2
    profit_v_min: float = 3.42
    profit_v_max: float = 4.08
    log_minutes: int = 15
    sim_minutes: int = 5
    checkup_days: int = 30
    count_checkup_fec: bool = True
    degradation_price: float = 330.0  # EUR/kWh
    profit_theta: float = 0.5
    horizon_hours: int = 48
    commit_hours: int = 24
    search_substeps: int = 4
    seed: int = 7
    days: int = 365
    start: str = "2014-01-01T00:00:00"
    prices_csv: str = ""

    @property
    def start_time(self):
        return datetime.fromisoformat(self.start)


def load_config(path=None, **overrides) -> StudyConfig:
    """Read a StudyConfig from an INI file; unknown keys are an error."""
    values = {}
    if path is not None:
        cp = configparser.ConfigParser()
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise DataError(f"{path}: {exc}") from exc
        types = {f.name: f.type for f in fields(StudyConfig)}
        for section in cp.sections():
            if section not in _SECTIONS:
                raise DataError(f"{path}: unknown section [{section}]")
            for key, raw in cp[section].items():
                if key not in _SECTIONS[section]:
                    raise DataError(f"{path}: unknown key {key} in [{section}]")
                values[key] = _convert(raw, types[key], path, key)
        if values.get("pack"):
            pack = Path(values["pack"])
            if not pack.is_absolute():
                values["pack"] = str((Path(path).parent / pack).resolve())
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = StudyConfig(**values)
        cfg.start_time
    except (TypeError, ValueError) as exc:
        raise DataError(f"invalid configuration: {exc}") from exc
    return cfg


def _convert(raw, typ, path, key):
    try:
        if typ == "bool":
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise DataError(f"{path}: bad value for {key}: {raw!r}") from exc


def save_config(cfg: StudyConfig, path):
    cp = configparser.ConfigParser()
    for section, keys in _SECTIONS.items():
        cp[section] = {k: str(getattr(cfg, k)) for k in keys}
    with open(path, "w") as fh:
        cp.write(fh)


@dataclass(frozen=True)
class Scenario:
    name: str
    model: str  # "linear" or "pbm"
    theta: float
    soc_window: tuple
    limits: tuple  # tester voltage limits for the replay


SCENARIOS = ("lm-revenue", "lm-profit", "pbm-profit", "pbm-revenue")
STUDY_SCENARIOS = ("lm-revenue", "lm-profit", "pbm-profit")


def scenario(name, cfg: StudyConfig) -> Scenario:
    full = (cfg.v_min, cfg.v_max)
    if name == "lm-revenue":
        return Scenario(name, "linear", 1.0, (0.0, 1.0), full)
    if name == "lm-profit":
        return Scenario(name, "linear", cfg.profit_theta, (cfg.profit_soc_min, cfg.profit_soc_max),
                        (cfg.profit_v_min, cfg.profit_v_max))
    if name == "pbm-profit":
        return Scenario(name, "pbm", cfg.profit_theta, (0.0, 1.0), full)
    if name == "pbm-revenue":
        return Scenario(name, "pbm", 1.0, (0.0, 1.0), full)
    raise ValueError(f"unknown scenario {name!r}")


def objective_config(sc: Scenario, cfg: StudyConfig) -> ObjectiveConfig:
    return ObjectiveConfig(theta=sc.theta, degradation_price=cfg.degradation_price,
                           horizon=timedelta(hours=cfg.horizon_hours),
                           commit=timedelta(hours=cfg.commit_hours))


def linear_params(sc: Scenario, cfg: StudyConfig, nominal_energy=10.0) -> LinearCellParams:
    return LinearCellParams(nominal_energy=nominal_energy, power_limit=cfg.power_limit,
                            soc_min=sc.soc_window[0], soc_max=sc.soc_window[1])


def search_config(sc: Scenario, cfg: StudyConfig) -> SearchConfig:
    return SearchConfig(power_limit=cfg.power_limit, v_min=sc.limits[0], v_max=sc.limits[1],
                        substeps=cfg.search_substeps)


def tester_limits(sc: Scenario, cfg: StudyConfig) -> TesterLimits:
    return TesterLimits(v_min=sc.limits[0], v_max=sc.limits[1],
                        log_period=timedelta(minutes=cfg.log_minutes),
                        sim_step=timedelta(minutes=cfg.sim_minutes))


def checkup_protocol(cfg: StudyConfig) -> CheckupProtocol:
    return CheckupProtocol(v_min=cfg.v_min, v_max=cfg.v_max)


__all__ = [
    "StudyConfig", "load_config", "save_config", "Scenario", "SCENARIOS", "STUDY_SCENARIOS",
    "scenario", "objective_config", "linear_params", "search_config", "tester_limits",
    "checkup_protocol",
]
