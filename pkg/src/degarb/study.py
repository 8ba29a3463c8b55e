"""End-to-end scenario study: prices, schedules, replays and reports.

Every stage reads and writes plain CSV under one output directory:
``schedules/``, ``ledgers/``, ``reports/`` and ``figures/``. The report stage
uses only those files, so it can be re-run on saved results.
"""

from __future__ import annotations

from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from . import econ
from .config import (
    STUDY_SCENARIOS,
    StudyConfig,
    checkup_protocol,
    linear_params,
    objective_config,
    scenario,
    search_config,
    tester_limits,
)
from .harness import LedgerWriter, LinearTester, SpmTester, read_ledger, run_experiment
from .market import PricePeriodSeries, load_prices, save_prices, synthesize_prices
from .optimizer.horizon import LinearPlanner, PbmPlanner, schedule_year
from .optimizer.objective import EUR_PER_WH_MWH, DispatchSchedule, load_schedule, save_schedule
from .spm import kernel as K
from .spm.cell import SpmModel
from .spm.params import load_pack

HOUR = timedelta(hours=1)


def spm_model(cfg: StudyConfig) -> SpmModel:
    return SpmModel(load_pack(cfg.pack or None))


def prices_for(cfg: StudyConfig) -> PricePeriodSeries:
    if cfg.prices_csv:
        series = load_prices(cfg.prices_csv)
        n = min(len(series), cfg.days * 24)
        return series.window(0, n)
    return synthesize_prices(cfg.seed, cfg.days, cfg.start_time)


def _dirs(out):
    out = Path(out)
    d = {k: out / k for k in ("schedules", "ledgers", "reports", "figures")}
    for p in d.values():
        p.mkdir(parents=True, exist_ok=True)
    return d


def optimize_scenario(name, prices: PricePeriodSeries, cfg: StudyConfig, model=None) -> DispatchSchedule:
    sc = scenario(name, cfg)
    model = model or spm_model(cfg)
    ocfg = objective_config(sc, cfg)
    if sc.model == "linear":
        planner = LinearPlanner(linear_params(sc, cfg, model.params.nominal_energy_wh))
        state = planner.initial_state(cfg.initial_soc)
    else:
        planner = PbmPlanner(model, search_config(sc, cfg))
        state = planner.initial_state(cfg.initial_soc)
    annual, _, _ = schedule_year(prices, planner, ocfg, state)
    return annual


def replay_scenario(name, schedule, prices: PricePeriodSeries, cfg: StudyConfig, ledger_dir, model=None):
    """Replay a schedule on the SPM cell with the scenario's tester limits."""
    sc = scenario(name, cfg)
    model = model or spm_model(cfg)
    ledger_dir = Path(ledger_dir)
    for suffix in ("_ledger.csv", "_checkups.csv"):
        (ledger_dir / f"{name}{suffix}").unlink(missing_ok=True)
    writer = LedgerWriter(ledger_dir, name)
    ledger, _ = run_experiment(SpmTester(model), model.fresh_state(cfg.initial_soc), schedule, prices,
                               tester_limits(sc, cfg), timedelta(days=cfg.checkup_days),
                               checkup_protocol(cfg), cfg.count_checkup_fec, writer)
    return ledger


# --- simulated (optimizer-model) totals, recomputed from a schedule -----------------


def commit_blocks(n, commit, horizon):
    """Start/end of the committed blocks of a receding-horizon run."""
    blocks, t = [], 0
    while t < n:
        end = n if t + min(horizon, n - t) >= n else t + commit
        blocks.append((t, end))
        t = end
    return blocks


def simulated_totals(name, powers, prices, cfg: StudyConfig, model: SpmModel):
    """(revenue EUR, capacity lost Wh, FEC) under the scenario's own model."""
    sc = scenario(name, cfg)
    powers = np.asarray(powers, dtype=float)
    if sc.model == "linear":
        p = linear_params(sc, cfg, model.params.nominal_energy_wh)
        lost = p.beta1 * np.abs(powers).sum()
        for a, b in commit_blocks(powers.size, cfg.commit_hours, cfg.horizon_hours):
            lost += p.beta2 * np.abs(powers[a:b]).max(initial=0.0)
        revenue = float(np.dot(powers, prices)) * EUR_PER_WH_MWH
        return revenue, float(lost), float(np.abs(powers).sum() / (2 * p.nominal_energy))
    scfg = search_config(sc, cfg)
    v = model.fresh_state(cfg.initial_soc).vector.copy()
    states = np.empty((powers.size + 1, v.size))
    energy = np.zeros(powers.size)
    K.rollout(v, np.ascontiguousarray(powers), scfg.substeps, 3600.0 / scfg.substeps, scfg.v_min, scfg.v_max,
              model.pvec, model.geo_n, model.geo_p, model.tables, states, energy)
    idx = 2 * model.params.n_shells
    lost = states[-1, idx + 2] - states[0, idx + 2]
    fec = (states[-1, idx + 3] - states[0, idx + 3]) / (2 * model.params.nominal_capacity_ah)
    return float(np.dot(energy, prices)) * EUR_PER_WH_MWH, float(lost), float(fec)


# --- report --------------------------------------------------------------------


def build_report(out, cfg: StudyConfig, names=STUDY_SCENARIOS):
    """Write report and figure CSVs from saved schedules and ledgers."""
    d = _dirs(out)
    model = spm_model(cfg)
    nominal = model.params.nominal_energy_wh
    rows, sim_reports, rep_reports = [], [], []
    cap_time, cap_fec, rev_curve, fig7, fig8 = [], [], [], [], []
    for name in names:
        sched_path = d["schedules"] / f"{name}.csv"
        if not sched_path.exists() or not (d["ledgers"] / f"{name}_ledger.csv").exists():
            continue
        sched, prices = load_schedule(sched_path)
        days = len(sched) / 24.0
        rev_s, lost_s, fec_s = simulated_totals(name, sched.powers, prices, cfg, model)
        sim = econ.ScenarioReport.build(name, rev_s, lost_s, fec_s, nominal, days, cfg.degradation_price)
        led = read_ledger(d["ledgers"], name)
        lost_r = led.reference_capacity - led.checkups[-1][1] if led.checkups else 0.0
        fec_r = led.fec[-1] if led.fec else 0.0
        rev_r = led.revenue[-1] if led.revenue else 0.0
        rep = econ.ScenarioReport.build(name, rev_r, lost_r, fec_r, nominal, days, cfg.degradation_price)
        sim_reports.append(sim)
        rep_reports.append(rep)
        rows.append([name, sim.revenue, rep.revenue, sim.capacity_lost, rep.capacity_lost, sim.fec, rep.fec,
                     sim.lifetime_years, rep.lifetime_years, sim.net_profit, rep.net_profit,
                     _err(sim.revenue, rep.revenue), _err(sim.capacity_lost, rep.capacity_lost)])

        # capacity vs time and vs FEC
        times = np.array(led.times, dtype="datetime64[s]")
        fec_rows = np.asarray(led.fec)
        cap_time.append([name, sched.start_time.isoformat(), led.reference_capacity])
        cap_fec.append([name, 0.0, led.reference_capacity])
        for t, c in led.checkups:
            k = np.searchsorted(times, np.datetime64(t, "s"), side="left")
            cap_time.append([name, t.isoformat(), c])
            cap_fec.append([name, float(fec_rows[k - 1]) if k > 0 else 0.0, c])
        # daily cumulative revenue
        per_day = int(round(24 * 60 / cfg.log_minutes))
        for k in range(per_day - 1, len(led.revenue), per_day):
            rev_curve.append([name, led.times[k].isoformat(), led.revenue[k]])
        # histogram of the replay
        ve, pe, rest, cyc = econ.histogram_2d(led.voltage, led.power)
        econ.write_histogram(d["figures"] / f"fig4_histogram_{name}.csv", ve, pe, rest, cyc)
        # heuristic decomposition per day from the schedule
        cal, cyc_, tot = econ.heuristic_degradation_estimate(sched.powers, sched.soc, nominal_energy_wh=nominal)
        for k in range(23, len(tot), 24):
            fig7.append([name, k // 24 + 1, cal[k], cyc_[k], tot[k]])
        fig8.append([name, rep.capacity_lost, rep.revenue, rep.revenue_per_pct_degradation])

    econ.write_rows(d["reports"] / "table1.csv",
                    ["scenario", "revenue_sim_eur", "revenue_replay_eur", "capacity_lost_sim_pct",
                     "capacity_lost_replay_pct", "fec_sim", "fec_replay", "lifetime_sim_years",
                     "lifetime_replay_years", "net_profit_sim_eur", "net_profit_replay_eur",
                     "revenue_error_pct", "capacity_lost_error_pct"], rows)
    with open(d["reports"] / "table1.txt", "w") as fh:
        fh.write(f"{'scenario':12s} {'rev sim':>9s} {'rev rep':>9s} {'loss sim %':>10s} "
                 f"{'loss rep %':>10s} {'life rep y':>10s}\n")
        for r in rows:
            fh.write(f"{r[0]:12s} {econ.sig2(r[1]):>9s} {econ.sig2(r[2]):>9s} {econ.sig2(r[3]):>10s} "
                     f"{econ.sig2(r[4]):>10s} {econ.sig2(r[8]):>10s}\n")
    econ.write_reports(d["reports"] / "scenarios_simulated.csv", sim_reports)
    econ.write_reports(d["reports"] / "scenarios_replayed.csv", rep_reports)
    econ.write_rows(d["figures"] / "fig5a_capacity_vs_time.csv", ["scenario", "timestamp", "capacity_wh"], cap_time)
    econ.write_rows(d["figures"] / "fig5b_capacity_vs_fec.csv", ["scenario", "fec", "capacity_wh"], cap_fec)
    econ.write_rows(d["figures"] / "fig6_revenue.csv", ["scenario", "timestamp", "revenue_cum_eur"], rev_curve)
    econ.write_rows(d["figures"] / "fig7_heuristic_degradation.csv",
                    ["scenario", "day", "calendar_pct", "cycle_pct", "total_pct"], fig7)
    econ.write_rows(d["figures"] / "fig8_revenue_vs_degradation.csv",
                    ["scenario", "capacity_lost_pct", "revenue_eur", "revenue_per_pct"], fig8)
    return rep_reports


def _err(sim, meas):
    return econ.comparison_error(sim, meas) if meas else float("nan")


def run_all(out, cfg: StudyConfig, names=STUDY_SCENARIOS, log=print):
    d = _dirs(out)
    prices = prices_for(cfg)
    save_prices(prices, Path(out) / "prices.csv")
    model = spm_model(cfg)
    for name in names:
        log(f"optimize {name}")
        sched = optimize_scenario(name, prices, cfg, model)
        save_schedule(sched, prices, d["schedules"] / f"{name}.csv")
        log(f"replay {name}")
        replay_scenario(name, sched, prices, cfg, d["ledgers"], model)
    log("report")
    return build_report(out, cfg, names)
