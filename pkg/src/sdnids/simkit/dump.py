"""ovs-ofctl style ``dump-flows`` rendering of a switch flow table."""

from __future__ import annotations

import re
from typing import Iterable, List

from ..netmodel import FlowRule

US_PER_S = 1_000_000

LINE_RE = re.compile(
    r"^ cookie=0x(?P<cookie>[0-9a-f]+), duration=(?P<duration>\d+\.\d{3})s, table=0, "
    r"n_packets=(?P<n_packets>\d+), n_bytes=(?P<n_bytes>\d+), idle_age=(?P<idle_age>\d+), "
    r"priority=(?P<priority>\d+)(?:,(?P<match>\S+))? actions=(?P<actions>\S+)$"
)


def format_rule(rule: FlowRule, now: int) -> str:
    duration = (now - rule.installed_at) / US_PER_S
    last = rule.last_matched_at if rule.last_matched_at is not None else rule.installed_at
    idle_age = (now - last) // US_PER_S
    match = rule.match.render()
    head = f"priority={rule.priority}" + (f",{match}" if match else "")
    return (f" cookie={rule.cookie:#x}, duration={duration:.3f}s, table=0, "
            f"n_packets={rule.n_packets}, n_bytes={rule.n_bytes}, idle_age={idle_age}, "
            f"{head} actions={rule.action}")


def format_flow_table(rules: Iterable[FlowRule], now: int) -> str:
    lines = ["NXST_FLOW reply (xid=0x4):"]
    lines.extend(format_rule(r, now) for r in rules)
    return "\n".join(lines) + "\n"


def parse_dump(text: str) -> List[dict]:
    """Inverse of :func:`format_flow_table` for tests and reports."""
    rows = []
    for line in text.splitlines()[1:]:
        m = LINE_RE.match(line)
        if m is None:
            raise ValueError(f"unrecognised dump line: {line!r}")
        row = m.groupdict()
        fields = {}
        for part in (row.pop("match") or "").split(","):
            if not part:
                continue
            key, sep, value = part.partition("=")
            fields[key] = value if sep else True
        row["match"] = fields
        for key in ("n_packets", "n_bytes", "idle_age", "priority"):
            row[key] = int(row[key])
        rows.append(row)
    return rows
