"""Mitigation time against controller processing latency.

The rate rule's fill time is fixed by the flood rate, so mitigation should
grow one-for-one with the controller delay.
"""

import argparse
import dataclasses

from sdnids.simkit import preset, run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="II")
    ap.add_argument("--latencies", default="0,200,1000,5000,20000",
                    help="controller latencies in us")
    args = ap.parse_args(argv)
    base = preset(args.scenario)
    print("controller_us,mitigation_us")
    for lat in (int(x) for x in args.latencies.split(",")):
        cfg = dataclasses.replace(base, latencies=dataclasses.replace(base.latencies,
                                                                      controller=lat))
        rep = run(cfg).report
        vals = [a.mitigation_s for a in rep.attackers.values()]
        print(f"{lat},{'/'.join(f'{v * 1e6:.0f}' for v in vals)}")


if __name__ == "__main__":
    main()
