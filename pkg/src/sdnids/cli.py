"""Command-line entry point.

    sdnids run --scenario I --seed 42 --out out/
    sdnids rules-check rules.txt
    sdnids report out/
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .dataplane import SimulationFault
from .ids import RuleSyntaxError, parse_ruleset
from .simkit.config import SCENARIOS, ConfigError, ScenarioConfig, load_config, preset
from .simkit.metrics import SUMMARY_HEADER, summary_row
from .simkit.run import run

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAULT = 2


def build_config(args) -> ScenarioConfig:
    if args.scenario is None and args.config is None:
        raise ConfigError("need --scenario or --config")
    base = preset(args.scenario) if args.scenario is not None else None
    cfg = load_config(args.config, base) if args.config is not None else base
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.rules is not None:
        changes["ruleset_path"] = str(args.rules)
    if args.no_defense:
        changes["defense"] = False
    cfg = dataclasses.replace(cfg, **changes).validate()
    try:
        parse_ruleset(cfg.load_rules())
    except RuleSyntaxError as exc:
        raise ConfigError(f"ruleset: {exc}") from None
    return cfg


def cmd_run(args) -> int:
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(cfg, out_dir=args.out)
    except SimulationFault as exc:
        print(f"simulation fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    w.writerow(summary_row(result.report))
    return EXIT_OK


def cmd_rules_check(args) -> int:
    try:
        text = Path(args.path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"{args.path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rules = parse_ruleset(text)
    except RuleSyntaxError as exc:
        print(f"{args.path}:{exc.line}:{exc.column}: {exc.message}", file=sys.stderr)
        return EXIT_CONFIG
    for rule in rules:
        print(rule.format())
    print(f"{len(rules)} rules OK")
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.out_dir)
    try:
        with open(out / "metrics.csv", newline="") as f:
            rows = list(csv.reader(f))
        with open(out / "timeseries.csv", newline="") as f:
            series = list(csv.DictReader(f))
    except OSError as exc:
        print(f"cannot read report files: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    for r in rows:
        print("  ".join(cell.ljust(wd) for cell, wd in zip(r, widths)).rstrip())
    totals = {}
    peak = {}
    for row in series:
        n = int(row["pps"])
        totals[row["src"]] = totals.get(row["src"], 0) + n
        peak[row["src"]] = max(peak.get(row["src"], 0), n)
    print()
    print("forwarded to gateway (src, packets, peak pps):")
    for src in sorted(totals):
        print(f"  {src:<15} {totals[src]:>8} {peak[src]:>8}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdnids", description="Simulated SDN-based DDoS detection and mitigation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write metrics, dumps and the event log")
    p.add_argument("--scenario", help=f"one of {', '.join(SCENARIOS)}")
    p.add_argument("--config", type=Path, help="key = value overrides")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default 42)")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--rules", type=Path, help="ruleset file (default: built-in rules)")
    p.add_argument("--no-defense", action="store_true",
                   help="IDS alerts are logged but never reach the controller")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("rules-check", help="parse a ruleset and print its normal form")
    p.add_argument("path", type=Path)
    p.set_defaults(func=cmd_rules_check)

    p = sub.add_parser("report", help="print the metrics of a finished run")
    p.add_argument("out_dir", type=Path)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
