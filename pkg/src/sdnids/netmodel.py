"""Core value types shared by the data plane, IDS, controller and simulator.

Times are integer microseconds of simulated time throughout the package.
"""

from __future__ import annotations

import enum
import ipaddress
from dataclasses import dataclass
from typing import Optional, Union

# Ethernet (14) + IPv4 (20) + ICMP (8) header bytes.
HEADER_BYTES = 42

Ipv4Addr = ipaddress.IPv4Address


def ip(value: Union[str, int, Ipv4Addr]) -> Ipv4Addr:
    return value if isinstance(value, Ipv4Addr) else ipaddress.IPv4Address(value)


@dataclass(frozen=True, order=True, slots=True)
class MacAddress:
    value: int

    def __post_init__(self):
        if not 0 <= self.value < 1 << 48:
            raise ValueError(f"MAC address out of range: {self.value!r}")

    @classmethod
    def parse(cls, text: str) -> "MacAddress":
        parts = text.strip().split(":")
        if len(parts) != 6 or not all(1 <= len(p) <= 2 for p in parts):
            raise ValueError(f"malformed MAC address: {text!r}")
        try:
            octets = [int(p, 16) for p in parts]
        except ValueError:
            raise ValueError(f"malformed MAC address: {text!r}") from None
        return cls(int.from_bytes(bytes(octets), "big"))

    @classmethod
    def host(cls, n: int) -> "MacAddress":
        """00:00:00:00:00:0n, the Mininet-style address of host n."""
        return cls(n)

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.value.to_bytes(6, "big"))

    def __repr__(self) -> str:
        return f"MacAddress('{self}')"


def mac(value: Union[str, int, MacAddress]) -> MacAddress:
    if isinstance(value, MacAddress):
        return value
    if isinstance(value, int):
        return MacAddress(value)
    return MacAddress.parse(value)


@dataclass(frozen=True, slots=True)
class Cidr:
    network: ipaddress.IPv4Network
    negated: bool = False

    @classmethod
    def parse(cls, text: str) -> "Cidr":
        text = text.strip()
        negated = text.startswith("!")
        if negated:
            text = text[1:]
        if text == "any":
            if negated:
                raise ValueError("'!any' matches nothing")
            return cls.any()
        # host bits are masked off, as Snort does
        return cls(ipaddress.IPv4Network(text, strict=False), negated)

    @classmethod
    def any(cls) -> "Cidr":
        return cls(ipaddress.IPv4Network("0.0.0.0/0"))

    @property
    def is_any(self) -> bool:
        return self.network.prefixlen == 0 and not self.negated

    def negate(self) -> "Cidr":
        return Cidr(self.network, not self.negated)

    def __contains__(self, addr) -> bool:
        return cidr_match(ip(addr), self)

    def __str__(self) -> str:
        if self.is_any:
            return "any"
        net = self.network
        body = str(net.network_address) if net.prefixlen == 32 else str(net)
        return ("!" if self.negated else "") + body


def cidr_match(addr: Ipv4Addr, cidr: Cidr) -> bool:
    net = cidr.network
    inside = (int(addr) & int(net.netmask)) == int(net.network_address)
    return inside != cidr.negated


class Proto(enum.Enum):
    ICMP_ECHO_REQUEST = "icmp_echo_request"
    ICMP_ECHO_REPLY = "icmp_echo_reply"
    UDP = "udp"
    OTHER = "other"

    @property
    def is_icmp(self) -> bool:
        return self in (Proto.ICMP_ECHO_REQUEST, Proto.ICMP_ECHO_REPLY)


class ProtoClass(enum.Enum):
    ICMP = "icmp"
    UDP = "udp"
    ANY = "ip"

    def matches(self, proto: Proto) -> bool:
        if self is ProtoClass.ANY:
            return True
        if self is ProtoClass.ICMP:
            return proto.is_icmp
        return proto is Proto.UDP


@dataclass(frozen=True, slots=True)
class Packet:
    src_mac: MacAddress
    dst_mac: MacAddress
    src_ip: Ipv4Addr
    dst_ip: Ipv4Addr
    proto: Proto
    payload_bytes: int = 56
    seq: int = 0
    created_at: int = 0

    def __post_init__(self):
        if self.payload_bytes < 0:
            raise ValueError("payload_bytes must be non-negative")

    @property
    def total_bytes(self) -> int:
        return self.payload_bytes + HEADER_BYTES


@dataclass(frozen=True, slots=True)
class Match:
    """OpenFlow-style match; ``None`` fields are wildcards."""

    in_port: Optional[int] = None
    dl_src: Optional[MacAddress] = None
    dl_dst: Optional[MacAddress] = None
    proto: Optional[ProtoClass] = None
    nw_src: Optional[Ipv4Addr] = None
    nw_dst: Optional[Ipv4Addr] = None

    def render(self) -> str:
        """Field list in ovs-ofctl dump order, e.g. ``icmp,dl_src=...``."""
        parts = []
        if self.proto is not None and self.proto is not ProtoClass.ANY:
            parts.append(self.proto.value)
        if self.in_port is not None:
            parts.append(f"in_port={self.in_port}")
        if self.dl_src is not None:
            parts.append(f"dl_src={self.dl_src}")
        if self.dl_dst is not None:
            parts.append(f"dl_dst={self.dl_dst}")
        if self.nw_src is not None:
            parts.append(f"nw_src={self.nw_src}")
        if self.nw_dst is not None:
            parts.append(f"nw_dst={self.nw_dst}")
        return ",".join(parts)


def packet_matches(p: Packet, m: Match, in_port: int) -> bool:
    if m.in_port is not None and m.in_port != in_port:
        return False
    if m.dl_src is not None and m.dl_src != p.src_mac:
        return False
    if m.dl_dst is not None and m.dl_dst != p.dst_mac:
        return False
    if m.proto is not None and not m.proto.matches(p.proto):
        return False
    if m.nw_src is not None and m.nw_src != p.src_ip:
        return False
    if m.nw_dst is not None and m.nw_dst != p.dst_ip:
        return False
    return True


# OFPP_CONTROLLER with max_len 65535, as printed by ovs-ofctl
CONTROLLER_PORT_TEXT = "CONTROLLER:65535"


@dataclass(frozen=True, slots=True)
class Output:
    port: int

    def __str__(self) -> str:
        return f"output:{self.port}"


@dataclass(frozen=True, slots=True)
class Drop:
    def __str__(self) -> str:
        return "drop"


@dataclass(frozen=True, slots=True)
class ToController:
    def __str__(self) -> str:
        return CONTROLLER_PORT_TEXT


Action = Union[Output, Drop, ToController]


@dataclass(eq=False)
class FlowRule:
    priority: int
    match: Match
    action: Action
    cookie: int = 0
    installed_at: int = 0
    n_packets: int = 0
    n_bytes: int = 0
    last_matched_at: Optional[int] = None

    def __post_init__(self):
        if self.priority < 0:
            raise ValueError("priority must be >= 0")

    def same_entry(self, other: "FlowRule") -> bool:
        return (
            self.priority == other.priority
            and self.match == other.match
            and self.action == other.action
        )

    def hit(self, p: Packet, now: int) -> None:
        self.n_packets += 1
        self.n_bytes += p.total_bytes
        self.last_matched_at = now


def table_miss_rule() -> FlowRule:
    return FlowRule(priority=0, match=Match(), action=ToController())
