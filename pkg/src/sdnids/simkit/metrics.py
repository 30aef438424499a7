"""Per-run QoS and mitigation metrics plus their CSV renderings."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from statistics import fmean
from typing import Dict, List, Optional, Tuple

from .config import US_PER_S
from .world import World

MISSING = "-"


@dataclass
class HostMetrics:
    host: str
    role: str
    sent: int = 0
    received: int = 0
    avg_rtt_ms: Optional[float] = None
    loss_pct: Optional[float] = None
    rtt_samples: List[Tuple[int, int]] = field(default_factory=list)


@dataclass
class AttackerMetrics:
    host: str
    packets_sent: int
    first_packet_at_us: Optional[int]
    alert_at_us: Optional[int]
    block_at_us: Optional[int]

    @property
    def mitigation_s(self) -> Optional[float]:
        if self.block_at_us is None or self.first_packet_at_us is None:
            return None
        return (self.block_at_us - self.first_packet_at_us) / US_PER_S


@dataclass
class MetricsReport:
    scenario: str
    seed: int
    hosts: Dict[str, HostMetrics]
    attackers: Dict[str, AttackerMetrics]
    attack_peak_pps: int
    timeseries: List[Tuple[int, str, int]]
    alerts_passed: int
    firing_packets: int
    switch_drops: int
    server_drops: int
    server_drop_times_us: List[int]
    nat_unsolicited: int
    nat_unresolved: int
    pingall_ok: bool

    @property
    def benign(self) -> List[HostMetrics]:
        return [h for h in self.hosts.values() if h.role == "benign"]

    def mean_mitigation_s(self) -> Optional[float]:
        vals = [a.mitigation_s for a in self.attackers.values() if a.mitigation_s is not None]
        return fmean(vals) if vals else None

    def mean_rtt_ms(self) -> Optional[float]:
        vals = [h.avg_rtt_ms for h in self.benign if h.avg_rtt_ms is not None]
        return fmean(vals) if vals else None

    def benign_loss_pct(self) -> Optional[float]:
        sent = sum(h.sent for h in self.benign)
        if not sent:
            return None
        return 100.0 * (sent - sum(h.received for h in self.benign)) / sent

    def series(self, src: str) -> Dict[int, int]:
        return {b: n for b, s, n in self.timeseries if s == src}


def _fmt(value: Optional[float], digits: int) -> str:
    return MISSING if value is None else f"{value:.{digits}f}"


SUMMARY_HEADER = ("scenario", "mitigation_s", "avg_rtt_ms", "loss_pct")


def summary_row(report: MetricsReport) -> Tuple[str, ...]:
    return (report.scenario, _fmt(report.mean_mitigation_s(), 6),
            _fmt(report.mean_rtt_ms(), 3), _fmt(report.benign_loss_pct(), 1))


def metrics_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["host", "avg_rtt_ms", "loss_pct", "mitigation_s"])
    for name in sorted(report.hosts):
        h = report.hosts[name]
        att = report.attackers.get(name)
        w.writerow([name, _fmt(h.avg_rtt_ms, 3), _fmt(h.loss_pct, 1),
                    _fmt(att.mitigation_s if att else None, 6)])
    return buf.getvalue()


def timeseries_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_bin_s", "src", "pps"])
    w.writerows(report.timeseries)
    return buf.getvalue()


def build_report(world: World) -> MetricsReport:
    cfg = world.cfg
    hosts = {}
    for name in world.hosts:
        if name in cfg.attackers:
            hosts[name] = HostMetrics(name, "attacker")
            continue
        if name not in cfg.benign_hosts:
            hosts[name] = HostMetrics(name, "idle")
            continue
        rec = world.pings[name]
        rtts = [rtt for _, rtt in rec.samples]
        hosts[name] = HostMetrics(
            name, "benign", rec.sent, rec.received,
            avg_rtt_ms=fmean(rtts) / 1000 if rtts else None,
            loss_pct=100.0 * (rec.sent - rec.received) / rec.sent if rec.sent else None,
            rtt_samples=list(rec.samples))
    attackers = {
        name: AttackerMetrics(name, a.packets, a.first_packet_at, a.alert_at, a.block_at)
        for name, a in world.attacks.items()}
    series = sorted(((b, str(src), n) for (b, src), n in world.nat_ingress.items()),
                    key=lambda row: (row[0], tuple(int(x) for x in row[1].split("."))))
    return MetricsReport(
        scenario=cfg.scenario, seed=cfg.seed, hosts=hosts, attackers=attackers,
        attack_peak_pps=max(world.attack_bins.values(), default=0),
        timeseries=series,
        alerts_passed=len(world.alerts),
        firing_packets=sum(world.firings.values()),
        switch_drops=world.switch_drops,
        server_drops=world.server.dropped,
        server_drop_times_us=list(world.server_drop_times),
        nat_unsolicited=world.nat.dropped_unsolicited,
        nat_unresolved=world.nat.dropped_unresolved,
        pingall_ok=all(v is not None for v in world.pingall_results.values()),
    )
