"""Snort-style rule dialect and a streaming detection engine.

Supported grammar, one rule per line::

    alert <proto> <addr> any -> <addr> any (msg:"..."; detection_filter:track by_src, count N, seconds N; dsize:>N; sid:N;)

where ``<addr>`` is ``any``, an address, a CIDR block, or a ``!``-negated
CIDR block. Only the four options shown are understood.
"""

from __future__ import annotations

import re
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, List, Optional, Tuple

from .netmodel import Cidr, Ipv4Addr, MacAddress, Packet, ProtoClass, cidr_match

US_PER_S = 1_000_000

DEFAULT_RULES = """\
# flood from the home network
alert icmp 10.0.0.0/8 any -> 192.168.56.104 any (msg:"ryu block"; detection_filter:track by_src, count 10, seconds 1; sid:1000001;)
# flood from outside the home network
alert icmp !10.0.0.0/8 any -> 192.168.56.104 any (msg:"ryu block"; detection_filter:track by_src, count 10, seconds 1; sid:1000002;)
# oversized echo payloads
alert icmp 10.0.0.0/8 any -> 192.168.56.104 any (msg:"ryu block"; dsize:>800; sid:1000003;)
"""

THRESHOLD_CONF = "event_filter gen_id 0, sig_id 0, type limit, track by_src, count 1, seconds 60\n"


class RuleSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class RateFilter:
    count: int
    seconds: int
    track: str = "by_src"


@dataclass(frozen=True)
class DetectionRule:
    proto: ProtoClass
    src: Cidr
    dst: Cidr
    msg: str
    sid: int
    rate_filter: Optional[RateFilter] = None
    dsize_gt: Optional[int] = None
    action: str = "alert"
    src_port: str = "any"
    dst_port: str = "any"

    def endpoints_match(self, p: Packet) -> bool:
        return (self.proto.matches(p.proto)
                and cidr_match(p.src_ip, self.src)
                and cidr_match(p.dst_ip, self.dst))

    def format(self) -> str:
        opts = [f'msg:"{self.msg}"']
        if self.rate_filter is not None:
            rf = self.rate_filter
            opts.append(f"detection_filter:track {rf.track}, "
                        f"count {rf.count}, seconds {rf.seconds}")
        if self.dsize_gt is not None:
            opts.append(f"dsize:>{self.dsize_gt}")
        opts.append(f"sid:{self.sid}")
        return (f"{self.action} {self.proto.value} {self.src} {self.src_port} -> "
                f"{self.dst} {self.dst_port} ({'; '.join(opts)};)")


_HEADER = re.compile(
    r"(?P<action>\S+)\s+(?P<proto>\S+)\s+(?P<src>\S+)\s+(?P<sport>\S+)\s+"
    r"(?P<dir>\S+)\s+(?P<dst>\S+)\s+(?P<dport>\S+)\s*\("
)
_PROTOS = {"icmp": ProtoClass.ICMP, "udp": ProtoClass.UDP, "ip": ProtoClass.ANY}
_FILTER = re.compile(
    r"track\s+(?P<track>\S+)\s*,\s*count\s+(?P<count>\d+)\s*,\s*seconds\s+(?P<seconds>\d+)"
)


def _split_options(body: str, offset: int, lineno: int) -> List[Tuple[str, str, int]]:
    """Split ``key:value; ...`` honouring quotes; returns (key, value, column)."""
    out = []
    start = 0
    in_quote = False
    for i, ch in enumerate(body + ";"):
        if ch == '"':
            in_quote = not in_quote
        elif ch == ";" and not in_quote:
            chunk = body[start:i]
            if chunk.strip():
                col = offset + start + (len(chunk) - len(chunk.lstrip())) + 1
                key, sep, value = chunk.strip().partition(":")
                if not sep:
                    raise RuleSyntaxError(f"option {key!r} has no value", lineno, col)
                out.append((key.strip(), value.strip(), col))
            start = i + 1
    if in_quote:
        raise RuleSyntaxError("unterminated string", lineno, offset + body.index('"') + 1)
    return out


def _positive(value: str, what: str, lineno: int, col: int) -> int:
    if not value.isdigit() or int(value) <= 0:
        raise RuleSyntaxError(f"{what} must be a positive integer, got {value!r}", lineno, col)
    return int(value)


def parse_rule(line: str, lineno: int = 1) -> DetectionRule:
    m = _HEADER.match(line)
    if m is None:
        col = len(line) - len(line.lstrip()) + 1
        raise RuleSyntaxError("expected '<action> <proto> <src> <port> -> <dst> <port> (options)'",
                              lineno, col)

    def col_of(group):
        return m.start(group) + 1

    if m["action"] != "alert":
        raise RuleSyntaxError(f"unsupported action {m['action']!r}", lineno, col_of("action"))
    proto = _PROTOS.get(m["proto"])
    if proto is None:
        raise RuleSyntaxError(f"unsupported protocol {m['proto']!r}", lineno, col_of("proto"))
    if m["dir"] != "->":
        raise RuleSyntaxError(f"expected '->', got {m['dir']!r}", lineno, col_of("dir"))
    addrs = {}
    for g in ("src", "dst"):
        try:
            addrs[g] = Cidr.parse(m[g])
        except ValueError as exc:
            raise RuleSyntaxError(f"bad address {m[g]!r}: {exc}", lineno, col_of(g)) from None
    for g in ("sport", "dport"):
        if m[g] != "any":
            raise RuleSyntaxError(f"only 'any' ports are supported, got {m[g]!r}",
                                  lineno, col_of(g))

    rest = line[m.end():]
    close = rest.rfind(")")
    if close < 0:
        raise RuleSyntaxError("missing ')'", lineno, len(line) + 1)
    if rest[close + 1:].strip():
        raise RuleSyntaxError("trailing text after ')'", lineno, m.end() + close + 2)

    fields = {}
    for key, value, col in _split_options(rest[:close], m.end(), lineno):
        if key in fields:
            raise RuleSyntaxError(f"duplicate option {key!r}", lineno, col)
        if key == "msg":
            if len(value) < 2 or value[0] != '"' or value[-1] != '"':
                raise RuleSyntaxError("msg must be a quoted string", lineno, col)
            fields["msg"] = value[1:-1]
        elif key == "sid":
            fields["sid"] = _positive(value, "sid", lineno, col)
        elif key == "dsize":
            if not value.startswith(">"):
                raise RuleSyntaxError(f"only 'dsize:>N' is supported, got {value!r}", lineno, col)
            fields["dsize"] = _positive(value[1:].strip(), "dsize", lineno, col)
        elif key == "detection_filter":
            fm = _FILTER.fullmatch(value)
            if fm is None:
                raise RuleSyntaxError(f"malformed detection_filter {value!r}", lineno, col)
            if fm["track"] != "by_src":
                raise RuleSyntaxError(f"unsupported track {fm['track']!r}", lineno, col)
            fields["detection_filter"] = RateFilter(
                _positive(fm["count"], "count", lineno, col),
                _positive(fm["seconds"], "seconds", lineno, col))
        else:
            raise RuleSyntaxError(f"unknown option {key!r}", lineno, col)

    head_col = col_of("action")
    if "sid" not in fields:
        raise RuleSyntaxError("missing sid", lineno, head_col)
    if "msg" not in fields:
        raise RuleSyntaxError("missing msg", lineno, head_col)
    if "detection_filter" not in fields and "dsize" not in fields:
        raise RuleSyntaxError("rule needs detection_filter or dsize", lineno, head_col)
    return DetectionRule(proto=proto, src=addrs["src"], dst=addrs["dst"], msg=fields["msg"],
                         sid=fields["sid"], rate_filter=fields.get("detection_filter"),
                         dsize_gt=fields.get("dsize"))


def parse_ruleset(text: str) -> List[DetectionRule]:
    rules = []
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        indent = len(raw) - len(raw.lstrip())
        try:
            rule = parse_rule(line, lineno)
        except RuleSyntaxError as exc:
            raise RuleSyntaxError(exc.message, lineno, exc.column + indent) from None
        if rule.sid in seen:
            raise RuleSyntaxError(f"duplicate sid {rule.sid} (first on line {seen[rule.sid]})",
                                  lineno, indent + 1)
        seen[rule.sid] = lineno
        rules.append(rule)
    return rules


def format_ruleset(rules: Iterable[DetectionRule]) -> str:
    return "".join(r.format() + "\n" for r in rules)


@dataclass(frozen=True)
class Alert:
    msg: str
    sid: int
    src_ip: Ipv4Addr
    src_mac: MacAddress
    dst_ip: Ipv4Addr
    proto: ProtoClass
    emitted_at: int


class EventFilter:
    """``event_filter ... type limit, track by_src``: at most ``count`` alerts
    per source inside fixed windows that open on the first passed alert."""

    def __init__(self, count: int = 1, seconds: int = 60):
        self.count = count
        self.window = seconds * US_PER_S
        self.state: Dict[Ipv4Addr, List[int]] = {}

    def passes(self, alert: Alert, now: int) -> bool:
        st = self.state.get(alert.src_ip)
        if st is None or now >= st[0] + self.window:
            self.state[alert.src_ip] = [now, 1]
            return True
        if st[1] < self.count:
            st[1] += 1
            return True
        return False


def event_filter_pass(f: EventFilter, alert: Alert, now: int) -> bool:
    return f.passes(alert, now)


_EVENT_FILTER = re.compile(
    r"event_filter\s+gen_id\s+\d+\s*,\s*sig_id\s+\d+\s*,\s*type\s+limit\s*,\s*"
    r"track\s+by_src\s*,\s*count\s+(?P<count>\d+)\s*,\s*seconds\s+(?P<seconds>\d+)\s*"
)


def parse_event_filter(text: str) -> EventFilter:
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m = _EVENT_FILTER.fullmatch(line)
        if m is None:
            raise ValueError(f"unsupported event_filter line: {line!r}")
        return EventFilter(int(m["count"]), int(m["seconds"]))
    raise ValueError("no event_filter line found")


class RateTracker:
    """Per (sid, source) timestamps inside the trailing window (now - W, now]."""

    def __init__(self):
        self.windows: Dict[Tuple[int, Ipv4Addr], Deque[int]] = defaultdict(deque)

    def record(self, sid: int, src: Ipv4Addr, now: int, window: int) -> int:
        q = self.windows[(sid, src)]
        horizon = now - window
        while q and q[0] <= horizon:
            q.popleft()
        q.append(now)
        return len(q)


@dataclass
class DetectionEngine:
    rules: List[DetectionRule]
    event_filter: EventFilter = field(default_factory=EventFilter)
    tracker: RateTracker = field(default_factory=RateTracker)
    fired: int = 0
    suppressed: int = 0

    def __post_init__(self):
        self.rules = sorted(self.rules, key=lambda r: r.sid)

    def evaluate(self, p: Packet, now: int) -> List[int]:
        """Sids of every rule firing on ``p``, ascending; updates rate state."""
        firing = []
        for rule in self.rules:
            if not rule.endpoints_match(p):
                continue
            if rule.dsize_gt is not None and p.payload_bytes <= rule.dsize_gt:
                continue
            rf = rule.rate_filter
            if rf is not None:
                n = self.tracker.record(rule.sid, p.src_ip, now, rf.seconds * US_PER_S)
                if n <= rf.count:
                    continue
            firing.append(rule.sid)
        return firing

    def observe(self, p: Packet, now: int) -> Tuple[Optional[Alert], List[int]]:
        firing = self.evaluate(p, now)
        if not firing:
            return None, firing
        self.fired += 1
        rule = next(r for r in self.rules if r.sid == firing[0])
        alert = Alert(rule.msg, rule.sid, p.src_ip, p.src_mac, p.dst_ip, rule.proto, now)
        if not self.event_filter.passes(alert, now):
            self.suppressed += 1
            return None, firing
        return alert, firing


def observe(engine: DetectionEngine, p: Packet, now: int) -> Optional[Alert]:
    return engine.observe(p, now)[0]
