"""Run the three-scenario study and print the orderings it is judged on.

Equivalent to ``degarb all`` followed by a short summary of replayed
capacity loss, revenue and degradation per full equivalent cycle.

    python scripts/run_study.py --seed 7 --days 365 --out out
"""

import argparse
import time
from pathlib import Path

from degarb import study
from degarb.config import STUDY_SCENARIOS, load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--days", type=int)
    ap.add_argument("--out", type=Path, default=Path("out"))
    args = ap.parse_args()
    cfg = load_config(args.config, seed=args.seed, days=args.days)
    t0 = time.perf_counter()
    reports = study.run_all(args.out, cfg, STUDY_SCENARIOS, log=lambda m: print(f"[{time.perf_counter() - t0:6.0f} s] {m}"))
    print()
    print((args.out / "reports" / "table1.txt").read_text())
    by = {r.scenario: r for r in reports}
    r, p, b = by["lm-revenue"], by["lm-profit"], by["pbm-profit"]
    print(f"capacity loss  LMrev > LMprof > PBM : {r.capacity_lost > p.capacity_lost > b.capacity_lost}")
    print(f"revenue        LMrev > PBM > LMprof : {r.revenue > b.revenue > p.revenue}")
    per = {k: v.capacity_lost / v.fec for k, v in by.items()}
    print(f"loss per FEC   LMprof / LMrev       : {per['lm-profit'] / per['lm-revenue']:.3f}")
    print(f"loss per FEC   PBM lowest           : {per['pbm-profit'] < min(per['lm-profit'], per['lm-revenue'])}")
    print(f"wall time {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
