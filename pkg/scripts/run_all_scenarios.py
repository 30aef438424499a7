"""Run every scenario preset and print one summary row per scenario.

    python scripts/run_all_scenarios.py --out results/ --seed 42
"""

import argparse
import csv
import sys
import time
from pathlib import Path

from sdnids.simkit import preset, run
from sdnids.simkit.config import SCENARIOS
from sdnids.simkit.metrics import SUMMARY_HEADER, summary_row


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args(argv)

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(SUMMARY_HEADER + ("alerts", "switch_drops", "server_drops", "wall_s"))
    for name in SCENARIOS:
        t0 = time.perf_counter()
        res = run(preset(name, seed=args.seed), out_dir=args.out / name)
        rep = res.report
        w.writerow(summary_row(rep) + (rep.alerts_passed, rep.switch_drops, rep.server_drops,
                                       f"{time.perf_counter() - t0:.1f}"))
        for a in rep.attackers.values():
            print(f"#   {name} {a.host}: first packet {a.first_packet_at_us} us, "
                  f"alert {a.alert_at_us} us, block {a.block_at_us} us")


if __name__ == "__main__":
    main()
