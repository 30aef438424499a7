"""Scenario driver: builds the world, schedules traffic, writes artifacts."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

from .config import ScenarioConfig, seconds_to_us
from .engine import EventLog
from .metrics import MetricsReport, build_report, metrics_csv, timeseries_csv
from .traffic import generate_flood, generate_ping, pingall
from .world import SERVER_IP, World, build_topology

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    report: MetricsReport
    dumps: Dict[str, str]
    event_digest: str
    event_count: int
    out_dir: Optional[Path] = None
    world: Optional[World] = None


def schedule(world: World) -> None:
    cfg = world.cfg
    if cfg.pingall:
        pingall(world, start=0, spacing=cfg.pingall_spacing_us)
    ping_start = seconds_to_us(cfg.ping_start_s)
    world.sim.at(ping_start, "checkpoint", world.on_checkpoint, "postpingall")
    if cfg.attackers:
        first = min(seconds_to_us(a.start_s) for a in cfg.attackers.values())
        world.sim.at(first, "checkpoint", world.on_checkpoint, "preattack")

    interval = seconds_to_us(cfg.ping_interval_s)
    # distinct millisecond phases keep benign pings from queueing behind each other
    slots = max(1, interval // 1000)
    hosts = list(cfg.benign_hosts)
    if len(hosts) <= slots:
        phases = world.rng.sample(range(slots), len(hosts))
    else:
        phases = [world.rng.randrange(slots) for _ in hosts]
    for name, phase in zip(hosts, phases):
        generate_ping(world, world.hosts[name], SERVER_IP, interval,
                      start=ping_start + phase * 1000, payload=cfg.ping_payload_bytes)

    for name, a in cfg.attackers.items():
        generate_flood(world, world.hosts[name], SERVER_IP, a.rate_pps, a.payload_bytes,
                       a.spoofed_src, start=seconds_to_us(a.start_s),
                       stop=seconds_to_us(a.stop_s))


def run(cfg: ScenarioConfig, out_dir=None, keep_world: bool = False) -> RunResult:
    """Run one scenario to completion.

    With ``out_dir`` set, writes ``metrics.csv``, ``timeseries.csv``,
    ``flowtable_<checkpoint>.txt`` and ``events.jsonl`` there.
    """
    cfg.validate()
    out = Path(out_dir) if out_dir is not None else None
    stream = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        stream = open(out / "events.jsonl", "w", encoding="utf-8", newline="\n")
    try:
        events = EventLog(stream)
        world = build_topology(cfg, events)
        schedule(world)
        world.sim.run()
        world.checkpoint("end")
    finally:
        if stream is not None:
            stream.close()

    report = build_report(world)
    log.info("scenario %s: %d events, digest %s", cfg.scenario, events.count,
             events.hexdigest()[:12])
    if out is not None:
        (out / "metrics.csv").write_text(metrics_csv(report), encoding="utf-8")
        (out / "timeseries.csv").write_text(timeseries_csv(report), encoding="utf-8")
        for name, text in world.dumps.items():
            (out / f"flowtable_{name}.txt").write_text(text, encoding="utf-8")
    return RunResult(report, dict(world.dumps), events.hexdigest(), events.count, out,
                     world if keep_world else None)
