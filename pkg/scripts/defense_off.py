"""Same flood with and without the IDS-to-controller path.

Shows what the drop rule buys: without it the server queue saturates,
benign RTT climbs by orders of magnitude and requests are dropped.
"""

import argparse

from sdnids.simkit import preset, run


def describe(label, rep):
    h = [x for x in rep.benign if x.rtt_samples]
    worst = max(rtt for x in h for _, rtt in x.rtt_samples) / 1000
    print(f"{label:<10} avg_rtt={rep.mean_rtt_ms():9.3f} ms  worst={worst:9.3f} ms  "
          f"loss={rep.benign_loss_pct():5.1f}%  server_drops={rep.server_drops}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="III")
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args(argv)
    describe("defended", run(preset(args.scenario, seed=args.seed)).report)
    describe("open", run(preset(args.scenario, seed=args.seed, defense=False)).report)


if __name__ == "__main__":
    main()
