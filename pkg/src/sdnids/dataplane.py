"""Emulated network devices: OpenFlow-style switch with port mirroring,
NAT gateway, end hosts and a capacity-limited echo server."""

from __future__ import annotations

import bisect
import dataclasses
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

from .netmodel import (
    Cidr,
    Drop,
    FlowRule,
    Ipv4Addr,
    MacAddress,
    Output,
    Packet,
    Proto,
    ToController,
    packet_matches,
    table_miss_rule,
)

FLOOD = -1  # pseudo-port for packet-out


class SimulationFault(RuntimeError):
    """Configuration or consistency error that aborts a simulation."""


class FlowTable:
    """Priority-ordered rule list; ties go to the earliest installed rule."""

    def __init__(self):
        self.rules: List[FlowRule] = []
        self._keys: List[Tuple[int, int, int]] = []
        self._installs = 0
        self.next_cookie = 0
        self.add(table_miss_rule(), now=0)

    def add(self, rule: FlowRule, now: int) -> FlowRule:
        """Install ``rule`` (stamped with ``now``); an identical entry is kept."""
        for existing in self.rules:
            if existing.same_entry(rule):
                return existing
        rule.installed_at = now
        rule.cookie = self.next_cookie
        self.next_cookie += 1
        key = (-rule.priority, rule.installed_at, self._installs)
        self._installs += 1
        idx = bisect.bisect(self._keys, key)
        self._keys.insert(idx, key)
        self.rules.insert(idx, rule)
        return rule

    def lookup(self, p: Packet, in_port: int) -> Optional[FlowRule]:
        for rule in self.rules:
            if packet_matches(p, rule.match, in_port):
                return rule
        return None

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)


# Switch outcomes, consumed by the simulator.

@dataclass(frozen=True)
class Egress:
    port: int
    packet: Packet
    at: int


@dataclass(frozen=True)
class Mirror:
    port: int
    packet: Packet
    at: int


@dataclass(frozen=True)
class PacketIn:
    switch_id: str
    buffer_id: int
    in_port: int
    packet: Packet


@dataclass(frozen=True)
class DropRecord:
    cookie: int
    packet: Packet
    in_port: int
    at: int


Outcome = Union[Egress, Mirror, PacketIn, DropRecord]


@dataclass
class _Pending:
    in_port: int
    packet: Packet


class Switch:
    def __init__(self, id: str, ports: Dict[int, str], mirror_port: Optional[int] = None,
                 mirror_latency: int = 50, forward_latency: int = 0):
        self.id = id
        self.ports = dict(ports)
        if mirror_port is not None:
            self.ports.setdefault(mirror_port, "mirror")
        self.mirror_port = mirror_port
        self.mirror_latency = mirror_latency
        self.forward_latency = forward_latency
        self.flow_table = FlowTable()
        self.pending: Dict[int, _Pending] = {}
        self._next_buffer = 0

    @property
    def data_ports(self) -> List[int]:
        return sorted(p for p in self.ports if p != self.mirror_port)

    def receive(self, in_port: int, p: Packet, now: int) -> List[Outcome]:
        if in_port not in self.ports:
            raise SimulationFault(f"{self.id}: packet on unknown port {in_port}")
        out: List[Outcome] = []
        if self.mirror_port is not None and in_port != self.mirror_port:
            out.append(Mirror(self.mirror_port, p, now + self.mirror_latency))
        out.extend(self._apply_table(in_port, p, now))
        return out

    def _apply_table(self, in_port: int, p: Packet, now: int) -> List[Outcome]:
        rule = self.flow_table.lookup(p, in_port)
        if rule is None:
            # only possible if the table-miss rule was removed
            return [DropRecord(-1, p, in_port, now)]
        rule.hit(p, now)
        action = rule.action
        if type(action) is Output:
            return [self._egress(action.port, p, now)]
        if type(action) is Drop:
            return [DropRecord(rule.cookie, p, in_port, now)]
        buffer_id = self._next_buffer
        self._next_buffer += 1
        self.pending[buffer_id] = _Pending(in_port, p)
        return [PacketIn(self.id, buffer_id, in_port, p)]

    def _egress(self, port: int, p: Packet, now: int) -> Egress:
        if port not in self.ports or port == self.mirror_port:
            raise SimulationFault(f"{self.id}: output to unknown port {port}")
        return Egress(port, p, now + self.forward_latency)

    def apply_flow_mod(self, rule: FlowRule, now: int) -> List[Outcome]:
        """Install ``rule`` and re-run buffered packets against the new table."""
        self.flow_table.add(rule, now)
        out: List[Outcome] = []
        for buffer_id in list(self.pending):
            entry = self.pending[buffer_id]
            hit = self.flow_table.lookup(entry.packet, entry.in_port)
            if hit is None or isinstance(hit.action, ToController):
                continue
            del self.pending[buffer_id]
            out.extend(self._apply_table(entry.in_port, entry.packet, now))
        return out

    def packet_out(self, buffer_id: int, port: int, now: int) -> List[Egress]:
        entry = self.pending.pop(buffer_id, None)
        if entry is None:
            return []  # already released by a flow mod
        if port == FLOOD:
            return [self._egress(q, entry.packet, now)
                    for q in self.data_ports if q != entry.in_port]
        return [self._egress(port, entry.packet, now)]


def switch_receive(sw: Switch, in_port: int, p: Packet, now: int) -> List[Outcome]:
    return sw.receive(in_port, p, now)


def apply_flow_mod(sw: Switch, rule: FlowRule, now: int) -> List[Outcome]:
    return sw.apply_flow_mod(rule, now)


@dataclass
class Host:
    name: str
    mac: MacAddress
    ip: Ipv4Addr
    port: int
    gateway_mac: Optional[MacAddress] = None
    _seq: int = 0

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def accepts(self, p: Packet) -> bool:
        return p.dst_mac == self.mac and p.dst_ip == self.ip

    def echo_reply(self, request: Packet, now: int) -> Packet:
        return Packet(self.mac, request.src_mac, self.ip, request.src_ip,
                      Proto.ICMP_ECHO_REPLY, request.payload_bytes, request.seq, now)


@dataclass
class Translation:
    internal_ip: Ipv4Addr
    seq: int
    external_seq: int
    created_at: int


class NatGateway:
    """Source NAT keyed on (internal ip, echo seq); the external side sees
    a gateway-unique sequence number in place of the host's."""

    def __init__(self, internal_net: Cidr, external_ip: Ipv4Addr, internal_ip: Ipv4Addr,
                 mac: MacAddress, port: int, arp: Optional[Dict[Ipv4Addr, MacAddress]] = None):
        self.internal_net = internal_net
        self.external_ip = external_ip
        self.internal_ip = internal_ip
        self.mac = mac
        self.port = port
        self.arp: Dict[Ipv4Addr, MacAddress] = dict(arp or {})
        self.translations: Dict[Tuple[Ipv4Addr, int], Translation] = {}
        self._by_external: Dict[int, Translation] = {}
        self._next_external = 0
        self.dropped_unsolicited = 0
        self.dropped_unresolved = 0
        self._seq = 0

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def outward(self, p: Packet, now: int) -> Packet:
        if p.src_ip not in self.internal_net:
            raise SimulationFault(f"NAT: outward packet from external address {p.src_ip}")
        key = (p.src_ip, p.seq)
        entry = self.translations.get(key)
        if entry is None:
            self._next_external += 1
            entry = Translation(p.src_ip, p.seq, self._next_external, now)
            self.translations[key] = entry
            self._by_external[entry.external_seq] = entry
        return dataclasses.replace(p, src_ip=self.external_ip, seq=entry.external_seq)

    def inward(self, p: Packet, now: int) -> Optional[Packet]:
        entry = self._by_external.pop(p.seq, None) if p.dst_ip == self.external_ip else None
        if entry is None:
            self.dropped_unsolicited += 1
            return None
        del self.translations[(entry.internal_ip, entry.seq)]
        dst_mac = self.arp.get(entry.internal_ip)
        if dst_mac is None:
            # e.g. a spoofed source that no host owns
            self.dropped_unresolved += 1
            return None
        return dataclasses.replace(p, src_mac=self.mac, dst_mac=dst_mac,
                                   dst_ip=entry.internal_ip, seq=entry.seq)


def nat_forward(gw: NatGateway, packet: Packet, direction: str, now: int = 0) -> Optional[Packet]:
    if direction == "out":
        return gw.outward(packet, now)
    if direction == "in":
        return gw.inward(packet, now)
    raise ValueError(f"direction must be 'out' or 'in', not {direction!r}")


class Server:
    """Single FIFO queue with deterministic per-packet service time."""

    def __init__(self, ip: Ipv4Addr, mac: MacAddress, capacity_pps: int = 10_000,
                 queue_limit: int = 1_000):
        if capacity_pps <= 0 or queue_limit <= 0:
            raise ValueError("capacity_pps and queue_limit must be positive")
        self.ip = ip
        self.mac = mac
        self.capacity_pps = capacity_pps
        self.queue_limit = queue_limit
        self.queue: deque = deque()  # departure times of requests in the system
        self.busy_until = 0
        self.served = 0
        self.dropped = 0

    @property
    def service_time(self) -> int:
        return 1_000_000 // self.capacity_pps

    def backlog(self, now: int) -> int:
        q = self.queue
        while q and q[0] <= now:
            q.popleft()
        return len(q)

    def handle(self, request: Packet, now: int) -> Optional[Tuple[Packet, int]]:
        if self.backlog(now) >= self.queue_limit:
            self.dropped += 1
            return None
        departure = max(now, self.busy_until) + self.service_time
        self.busy_until = departure
        self.queue.append(departure)
        self.served += 1
        if request.proto is not Proto.ICMP_ECHO_REQUEST:
            return None
        reply = Packet(self.mac, request.src_mac, self.ip, request.src_ip,
                       Proto.ICMP_ECHO_REPLY, request.payload_bytes, request.seq, departure)
        return reply, departure


def server_handle(server: Server, request: Packet, now: int) -> Optional[Tuple[Packet, int]]:
    return server.handle(request, now)
