"""Traffic sources: ``ping`` loops, an hping3-style ICMP flood, and Mininet ``pingall``."""

from __future__ import annotations

from typing import Optional

from ..dataplane import Host
from ..netmodel import Packet, Proto, ip
from .config import US_PER_S
from .world import SERVER_IP, World


def generate_ping(world: World, host: Host, dst=SERVER_IP, interval: int = US_PER_S,
                  start: int = 0, stop: Optional[int] = None, payload: int = 56) -> None:
    """Echo request every ``interval`` us in ``[start, stop)``; replies feed RTT samples."""
    if interval <= 0:
        raise ValueError("interval must be positive")
    stop = world.cfg_stop() if stop is None else stop
    record = world.pings[host.name]
    dst = ip(dst)

    def fire(t: int):
        seq = host.next_seq()
        p = Packet(host.mac, host.gateway_mac, host.ip, dst, Proto.ICMP_ECHO_REQUEST,
                   payload, seq, t)
        record.sent += 1
        record.outstanding[seq] = t
        world.host_send(host, p, t)
        if t + interval < stop:
            world.sim.at(t + interval, "ping", fire, t + interval)
        return {"host": host.name, "seq": seq}

    if start < stop:
        world.sim.at(start, "ping", fire, start)


def flood_times(start: int, stop: int, rate_pps: int):
    """Evenly spaced emission instants; the k-th is ``start + floor(k * 1e6 / rate)``."""
    k = 0
    while True:
        t = start + (k * US_PER_S) // rate_pps
        if t >= stop:
            return
        yield t
        k += 1


def generate_flood(world: World, host: Host, dst, rate_pps: int, payload: int,
                   spoofed_src=None, start: int = 0, stop: Optional[int] = None) -> None:
    """hping3 ``--flood -1 [-a SRC] [-d SIZE]``: the frame keeps the host's real MAC."""
    if rate_pps <= 0:
        raise ValueError("rate must be positive")
    stop = world.cfg_stop() if stop is None else min(stop, world.cfg_stop())
    src = ip(spoofed_src) if spoofed_src is not None else host.ip
    dst = ip(dst)
    record = world.attacks[host.name]
    times = flood_times(start, stop, rate_pps)

    def fire(t: int):
        p = Packet(host.mac, host.gateway_mac, src, dst, Proto.ICMP_ECHO_REQUEST,
                   payload, host.next_seq(), t)
        if record.first_packet_at is None:
            record.first_packet_at = t
        record.packets += 1
        world.attack_bins[t // US_PER_S] += 1
        world.host_send(host, p, t)
        nxt = next(times, None)
        if nxt is not None:
            world.sim.at(nxt, "flood", fire, nxt)
        return {"host": host.name, "seq": p.seq}

    first = next(times, None)
    if first is not None:
        world.sim.at(first, "flood", fire, first)


def pingall(world: World, start: int = 0, spacing: int = 10_000) -> int:
    """One echo request per ordered pair of {h1, h2, h3, nat}; returns the end time."""
    nodes = [(h.name, h.mac, h.ip) for h in world.hosts.values()]
    nodes.append(("nat", world.nat.mac, world.nat.internal_ip))
    t = start
    for src_name, src_mac, src_ip in nodes:
        for dst_name, dst_mac, dst_ip in nodes:
            if dst_name == src_name:
                continue
            world.pingall_results[(src_name, str(dst_ip))] = None
            world.sim.at(t, "pingall", _pingall_one, world, src_name, src_mac, src_ip,
                         dst_mac, dst_ip)
            t += spacing
    return t


def _pingall_one(world: World, src_name, src_mac, src_ip, dst_mac, dst_ip):
    now = world.now()
    if src_name == "nat":
        seq = world.nat.next_seq()
        p = Packet(src_mac, dst_mac, src_ip, dst_ip, Proto.ICMP_ECHO_REQUEST, 56, seq, now)
        world.nat_send_inside(p, now)
    else:
        host = world.hosts[src_name]
        p = Packet(src_mac, dst_mac, src_ip, dst_ip, Proto.ICMP_ECHO_REQUEST, 56,
                   host.next_seq(), now)
        world.host_send(host, p, now)
    return {"src": src_name, "dst": str(dst_ip)}
