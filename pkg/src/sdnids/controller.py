"""Learning-switch controller that also turns IDS alerts into drop rules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

from .dataplane import FLOOD
from .ids import Alert
from .netmodel import Drop, FlowRule, Ipv4Addr, MacAddress, Match, Output, Packet, ProtoClass

BLOCK_MSG = "ryu block"
FORWARD_PRIORITY = 1
BLOCK_PRIORITY = 100


@dataclass(frozen=True)
class FlowMod:
    switch_id: str
    rule: FlowRule


@dataclass(frozen=True)
class PacketOut:
    switch_id: str
    buffer_id: int
    port: int


ControlAction = Union[FlowMod, PacketOut]
BlockKey = Tuple[MacAddress, Ipv4Addr, Ipv4Addr]


class Controller:
    def __init__(self, processing_latency: int = 200, block_switch: str = "s1"):
        self.processing_latency = processing_latency
        self.block_switch = block_switch
        self.mac_to_port: Dict[str, Dict[MacAddress, int]] = {}
        self.blocklist: Dict[BlockKey, int] = {}
        self.busy_until = 0

    def admit(self, now: int) -> int:
        """Queue one message behind earlier ones; returns its completion time."""
        done = max(now, self.busy_until) + self.processing_latency
        self.busy_until = done
        return done

    def handle_packet_in(self, switch_id: str, in_port: int, p: Packet,
                         buffer_id: int) -> List[ControlAction]:
        table = self.mac_to_port.setdefault(switch_id, {})
        table[p.src_mac] = in_port
        out_port = table.get(p.dst_mac)
        if out_port is None:
            return [PacketOut(switch_id, buffer_id, FLOOD)]
        # the switch releases the buffered packet once the rule lands
        rule = FlowRule(priority=FORWARD_PRIORITY,
                        match=Match(in_port=in_port, dl_dst=p.dst_mac),
                        action=Output(out_port))
        return [FlowMod(switch_id, rule)]

    def process_alert(self, a: Alert, now: int = 0) -> Optional[FlowMod]:
        if a.msg != BLOCK_MSG:
            return None
        key = (a.src_mac, a.src_ip, a.dst_ip)
        if key in self.blocklist:
            return None
        self.blocklist[key] = now
        rule = FlowRule(priority=BLOCK_PRIORITY,
                        match=Match(proto=ProtoClass.ICMP, dl_src=a.src_mac,
                                    nw_src=a.src_ip, nw_dst=a.dst_ip),
                        action=Drop())
        return FlowMod(self.block_switch, rule)


def handle_packet_in(ctl: Controller, switch_id: str, in_port: int, p: Packet,
                     buffer_id: int = 0) -> List[ControlAction]:
    return ctl.handle_packet_in(switch_id, in_port, p, buffer_id)


def process_alert(ctl: Controller, a: Alert, now: int = 0) -> Optional[FlowMod]:
    return ctl.process_alert(a, now)
