"""Command line entry point: ``degarb {prices,optimize,replay,report,all}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 model fault (the
faulting timestamp is printed on standard error).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import SCENARIOS, STUDY_SCENARIOS, load_config
from .errors import CellFault, DataError
from .market import load_prices, save_prices
from .optimizer.horizon import WindowError
from .optimizer.objective import load_schedule, save_schedule
from . import study

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FAULT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI study configuration")
    common.add_argument("--seed", type=int, help="synthetic price seed")
    common.add_argument("--days", type=int, help="number of days to schedule")
    common.add_argument("--prices", type=Path, help="price CSV instead of synthetic prices")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p = _Parser(prog="degarb", description="Degradation-aware battery arbitrage study.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("prices", parents=[common], help="write (or validate) the price series")
    for name, text in (("optimize", "compute a scenario's annual schedule"),
                       ("replay", "replay a saved schedule on the virtual tester")):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("--scenario", choices=SCENARIOS, required=True)
    sp = sub.add_parser("report", parents=[common], help="build reports from saved ledgers")
    sp.add_argument("--scenario", choices=SCENARIOS, action="append")
    sp = sub.add_parser("all", parents=[common], help="run the three-scenario study end to end")
    sp.add_argument("--scenario", choices=SCENARIOS, action="append")
    return p


def _prices(args, cfg):
    path = args.out / "prices.csv"
    if args.command in ("replay", "report") and path.exists() and not args.prices:
        return load_prices(path)
    return study.prices_for(cfg)


def run(args):
    cfg = load_config(args.config, seed=args.seed, days=args.days,
                      prices_csv=str(args.prices) if args.prices else None)
    args.out.mkdir(parents=True, exist_ok=True)
    if args.command == "prices":
        save_prices(study.prices_for(cfg), args.out / "prices.csv")
    elif args.command == "optimize":
        prices = study.prices_for(cfg)
        save_prices(prices, args.out / "prices.csv")
        sched = study.optimize_scenario(args.scenario, prices, cfg)
        (args.out / "schedules").mkdir(exist_ok=True)
        save_schedule(sched, prices, args.out / "schedules" / f"{args.scenario}.csv")
    elif args.command == "replay":
        sched, _ = load_schedule(args.out / "schedules" / f"{args.scenario}.csv")
        study.replay_scenario(args.scenario, sched, _prices(args, cfg), cfg, args.out / "ledgers")
    elif args.command == "report":
        study.build_report(args.out, cfg, tuple(args.scenario or STUDY_SCENARIOS))
    elif args.command == "all":
        study.run_all(args.out, cfg, tuple(args.scenario or STUDY_SCENARIOS),
                      log=lambda m: print(m, file=sys.stderr))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except WindowError as exc:
        if isinstance(exc.__cause__, CellFault):
            print(f"model fault at {exc.timestamp.isoformat()}: {exc}", file=sys.stderr)
            return EXIT_FAULT
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CellFault as exc:
        when = exc.timestamp.isoformat() if exc.timestamp is not None else "unknown time"
        print(f"model fault at {when}: {exc}", file=sys.stderr)
        return EXIT_FAULT
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
