"""Topology builder and event handlers tying the devices together.

Layout (switch ``s1``)::

    port 1  NAT gateway  --(C)-- server 192.168.56.104
    port 2  h1 10.0.0.1
    port 3  h2 10.0.0.2
    port 4  h3 10.0.0.3
    port 5  mirror -> IDS --(D)--> controller --(A)--> s1
"""

from __future__ import annotations

import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..controller import BLOCK_PRIORITY, Controller, FlowMod, PacketOut
from ..dataplane import (
    DropRecord,
    Egress,
    Host,
    Mirror,
    NatGateway,
    PacketIn,
    Server,
    Switch,
)
from ..ids import Alert, DetectionEngine, EventFilter, parse_ruleset
from ..netmodel import Cidr, MacAddress, Packet, Proto, ip, mac
from .config import HOSTS, US_PER_S, ScenarioConfig, seconds_to_us
from .dump import format_flow_table
from .engine import EventLog, Simulator

SWITCH_ID = "s1"
NAT_PORT = 1
HOST_PORTS = {"h1": 2, "h2": 3, "h3": 4}
MIRROR_PORT = 5
NAT_MAC = mac("b2:2a:30:3a:e7:f2")
NAT_INTERNAL_IP = ip("10.0.0.254")
NAT_EXTERNAL_IP = ip("192.168.56.101")
SERVER_IP = ip("192.168.56.104")
SERVER_MAC = mac("08:00:27:c0:a8:68")
HOME_NET = Cidr.parse("10.0.0.0/8")


@dataclass
class PingRecord:
    """Echo requests sent by one host and the RTTs of the replies."""

    sent: int = 0
    received: int = 0
    outstanding: Dict[int, int] = field(default_factory=dict)
    samples: List[Tuple[int, int]] = field(default_factory=list)  # (sent_at, rtt) us


@dataclass
class AttackRecord:
    mac: MacAddress
    first_packet_at: Optional[int] = None
    packets: int = 0
    alert_at: Optional[int] = None
    block_at: Optional[int] = None


class World:
    def __init__(self, cfg: ScenarioConfig, log: Optional[EventLog] = None):
        self.cfg = cfg
        self.lat = cfg.latencies
        self.sim = Simulator(log)
        self.rng = random.Random(cfg.seed)

        self.hosts: Dict[str, Host] = {}
        for n, name in enumerate(HOSTS, start=1):
            self.hosts[name] = Host(name, MacAddress.host(n), ip(f"10.0.0.{n}"),
                                    HOST_PORTS[name], gateway_mac=NAT_MAC)
        ports = {NAT_PORT: "nat"}
        ports.update({h.port: h.name for h in self.hosts.values()})
        self.switch = Switch(SWITCH_ID, ports, mirror_port=MIRROR_PORT,
                             mirror_latency=self.lat.mirror,
                             forward_latency=self.lat.switch_forward)
        self.port_to_host = {h.port: h for h in self.hosts.values()}
        self.nat = NatGateway(HOME_NET, NAT_EXTERNAL_IP, NAT_INTERNAL_IP, NAT_MAC, NAT_PORT,
                              arp={h.ip: h.mac for h in self.hosts.values()})
        self.server = Server(SERVER_IP, SERVER_MAC, cfg.server_capacity_pps,
                             cfg.server_queue_limit)
        self.controller = Controller(self.lat.controller, block_switch=SWITCH_ID)
        self.ids = DetectionEngine(parse_ruleset(cfg.load_rules()),
                                   EventFilter(cfg.event_filter_count, cfg.event_filter_seconds))

        self.pings: Dict[str, PingRecord] = defaultdict(PingRecord)
        self.pingall_results: Dict[Tuple[str, str], Optional[int]] = {}
        self.attacks: Dict[str, AttackRecord] = {
            h: AttackRecord(self.hosts[h].mac) for h in cfg.attackers}
        self.alerts: List[Alert] = []
        self.firings: Counter = Counter()  # source ip -> packets that fired a rule
        self.nat_ingress: Counter = Counter()  # (second, source ip) -> packets
        self.attack_bins: Counter = Counter()  # second -> attack packets emitted
        self.switch_drops = 0
        self.server_drop_times: List[int] = []
        self.dumps: Dict[str, str] = {}
        self._txt: Dict[object, str] = {}
        self._pending_blocks = set(cfg.attackers) if cfg.defense else set()

    # -- helpers --------------------------------------------------------

    def now(self) -> int:
        return self.sim.now

    def cfg_stop(self) -> int:
        """Traffic sources stop emitting at the configured duration."""
        return seconds_to_us(self.cfg.duration_s)

    def text(self, obj) -> str:
        t = self._txt.get(obj)
        if t is None:
            t = self._txt[obj] = str(obj)
        return t

    def describe(self, p: Packet) -> dict:
        return {"smac": self.text(p.src_mac), "dmac": self.text(p.dst_mac),
                "src": self.text(p.src_ip), "dst": self.text(p.dst_ip),
                "proto": p.proto.value, "len": p.total_bytes, "seq": p.seq}

    def node_name(self, port: int) -> str:
        return self.switch.ports[port]

    def checkpoint(self, name: str) -> None:
        self.dumps[name] = format_flow_table(self.switch.flow_table, self.now())

    # -- transmission ---------------------------------------------------

    def host_send(self, host: Host, p: Packet, t: int) -> None:
        self.sim.at(t + self.lat.host_switch, "sw_rx", self.on_switch_rx, host.port, p)

    def nat_send_inside(self, p: Packet, t: int) -> None:
        self.sim.at(t + self.lat.switch_nat, "sw_rx", self.on_switch_rx, NAT_PORT, p)

    def _dispatch(self, outcomes) -> List[str]:
        notes = []
        for o in outcomes:
            kind = type(o)
            if kind is Mirror:
                self.sim.at(o.at, "ids_rx", self.on_ids_rx, o.packet)
            elif kind is Egress:
                notes.append(f"out:{o.port}")
                if o.port == NAT_PORT:
                    self.sim.at(o.at + self.lat.switch_nat, "nat_rx", self.on_nat_rx, o.packet)
                else:
                    host = self.port_to_host[o.port]
                    self.sim.at(o.at + self.lat.host_switch, "host_rx", self.on_host_rx,
                                host, o.packet)
            elif kind is DropRecord:
                notes.append(f"drop:{o.cookie:#x}")
                self.switch_drops += 1
            elif kind is PacketIn:
                notes.append("ctl")
                self.sim.at(self.now() + self.lat.control_link, "ctl_packet_in",
                            self.on_packet_in, o)
        return notes

    # -- handlers -------------------------------------------------------

    def on_switch_rx(self, in_port: int, p: Packet):
        outcomes = self.switch.receive(in_port, p, self.now())
        rec = {"port": in_port}
        rec.update(self.describe(p))
        rec["out"] = ",".join(self._dispatch(outcomes))
        return rec

    def on_ids_rx(self, p: Packet):
        now = self.now()
        alert, firing = self.ids.observe(p, now)
        rec = self.describe(p)
        if firing:
            self.firings[p.src_ip] += 1
            rec["fire"] = firing
        if alert is not None:
            rec["alert"] = alert.sid
            self.alerts.append(alert)
            for att in self.attacks.values():
                if att.mac == alert.src_mac and att.alert_at is None:
                    att.alert_at = now
            if self.cfg.defense:
                self.sim.at(now + self.lat.alert_channel, "ctl_alert", self.on_alert, alert)
        return rec

    def on_packet_in(self, msg: PacketIn):
        done = self.controller.admit(self.now())
        actions = self.controller.handle_packet_in(msg.switch_id, msg.in_port, msg.packet,
                                                   msg.buffer_id)
        self._send_control(actions, done)
        rec = {"port": msg.in_port, "buf": msg.buffer_id}
        rec.update(self.describe(msg.packet))
        return rec

    def on_alert(self, alert: Alert):
        done = self.controller.admit(self.now())
        fm = self.controller.process_alert(alert, self.now())
        self._send_control([fm] if fm else [], done)
        return {"msg": alert.msg, "sid": alert.sid, "src": self.text(alert.src_ip),
                "smac": self.text(alert.src_mac), "block": fm is not None}

    def _send_control(self, actions, done: int) -> None:
        t = done + self.lat.control_link
        for a in actions:
            if isinstance(a, FlowMod):
                self.sim.at(t, "sw_flow_mod", self.on_flow_mod, a)
            elif isinstance(a, PacketOut):
                self.sim.at(t, "sw_packet_out", self.on_packet_out, a)

    def on_flow_mod(self, fm: FlowMod):
        now = self.now()
        rule = fm.rule
        outcomes = self.switch.apply_flow_mod(rule, now)
        installed = next((r for r in self.switch.flow_table if r.same_entry(rule)), rule)
        if rule.priority == BLOCK_PRIORITY:
            for name, att in self.attacks.items():
                if att.mac == rule.match.dl_src and att.block_at is None:
                    att.block_at = installed.installed_at
                    self._pending_blocks.discard(name)
            done = self.cfg.attackers and not self._pending_blocks
            if done and "postmitigation" not in self.dumps:
                self.checkpoint("postmitigation")
        return {"prio": rule.priority, "match": rule.match.render(), "action": str(rule.action),
                "cookie": installed.cookie, "released": ",".join(self._dispatch(outcomes))}

    def on_packet_out(self, po: PacketOut):
        outcomes = self.switch.packet_out(po.buffer_id, po.port, self.now())
        return {"buf": po.buffer_id, "out": ",".join(self._dispatch(outcomes))}

    def on_host_rx(self, host: Host, p: Packet):
        now = self.now()
        rec = {"host": host.name}
        rec.update(self.describe(p))
        if not host.accepts(p):
            rec["ignored"] = True
        elif p.proto is Proto.ICMP_ECHO_REQUEST:
            self.host_send(host, host.echo_reply(p, now), now)
        elif p.proto is Proto.ICMP_ECHO_REPLY:
            self._echo_reply(host.name, p, now)
        return rec

    def _echo_reply(self, name: str, p: Packet, now: int) -> None:
        key = (name, self.text(p.src_ip))
        if key in self.pingall_results and self.pingall_results[key] is None:
            self.pingall_results[key] = now
            return
        rec = self.pings.get(name)
        if rec is None:
            return
        sent_at = rec.outstanding.pop(p.seq, None)
        if sent_at is not None:
            rec.received += 1
            rec.samples.append((sent_at, now - sent_at))

    def on_nat_rx(self, p: Packet):
        now = self.now()
        rec = self.describe(p)
        if p.dst_mac != self.nat.mac:
            rec["ignored"] = True
            return rec
        self.nat_ingress[(now // US_PER_S, p.src_ip)] += 1
        if p.dst_ip == self.nat.internal_ip:
            if p.proto is Proto.ICMP_ECHO_REQUEST:
                reply = Packet(self.nat.mac, p.src_mac, self.nat.internal_ip, p.src_ip,
                               Proto.ICMP_ECHO_REPLY, p.payload_bytes, p.seq, now)
                self.nat_send_inside(reply, now)
            elif p.proto is Proto.ICMP_ECHO_REPLY:
                self._echo_reply("nat", p, now)
            return rec
        if p.dst_ip not in HOME_NET:
            out = self.nat.outward(p, now)
            self.sim.at(now + self.lat.nat_server, "srv_rx", self.on_server_rx, out)
        return rec

    def on_server_rx(self, p: Packet):
        now = self.now()
        rec = self.describe(p)
        if p.dst_ip != self.server.ip:
            rec["ignored"] = True
            return rec
        dropped_before = self.server.dropped
        result = self.server.handle(p, now)
        if self.server.dropped > dropped_before:
            self.server_drop_times.append(now)
            rec["dropped"] = True
        if result is None:
            return rec
        reply, departure = result
        rec["depart"] = departure
        self.sim.at(departure + self.lat.nat_server, "nat_ext_rx", self.on_nat_ext_rx, reply)
        return rec

    def on_nat_ext_rx(self, p: Packet):
        now = self.now()
        rec = self.describe(p)
        inside = self.nat.inward(p, now)
        if inside is None:
            rec["dropped"] = True
        else:
            self.nat_send_inside(inside, now)
        return rec

    def on_checkpoint(self, name: str):
        self.checkpoint(name)
        return {"name": name}


def build_topology(cfg: ScenarioConfig, log: Optional[EventLog] = None) -> World:
    cfg.validate()
    return World(cfg, log)
